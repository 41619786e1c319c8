from types import SimpleNamespace

import pytest

from fen import FenConfig, train_toy


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    """One full 200-step training run shared by the slower tests."""
    config = FenConfig(num_classes=10, images_per_class=8, steps=200, seed=0)
    checkpoint = tmp_path_factory.mktemp("ckpt") / "fen.pt"
    model, loss_mod, history = train_toy(config, checkpoint_path=str(checkpoint))
    return SimpleNamespace(
        model=model,
        loss_mod=loss_mod,
        history=history,
        config=config,
        checkpoint=str(checkpoint),
    )
