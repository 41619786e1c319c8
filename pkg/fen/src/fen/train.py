"""Seeded toy training loop."""

from __future__ import annotations

import torch

from .blocks import FeatureExtractionNetwork
from .config import FenConfig
from .data import build_dataset
from .losses import DualDomainLoss


class DivergenceError(RuntimeError):
    """Loss became non-finite during training."""


def build_model(config: FenConfig):
    torch.manual_seed(config.seed)
    model = FeatureExtractionNetwork(
        height=config.height,
        width=config.width,
        channels=config.channels,
        embedding_dim=config.embedding_dim,
    )
    loss_mod = DualDomainLoss(
        embedding_dim=config.embedding_dim,
        num_classes=config.num_classes,
        theta1=config.theta1,
        theta2=config.theta2,
    )
    return model, loss_mod


def evaluate_matching_loss(model, hr, lr) -> float:
    """Sum of squared HR/LR embedding distances, no grad."""
    model.eval()
    with torch.no_grad():
        x, _, _ = model(hr)
        y, _, _ = model(lr)
        return float(((x - y) ** 2).sum())


def train_toy(config: FenConfig, checkpoint_path=None):
    """Train on the procedural dataset; returns (model, loss_mod, history).

    history[k] is the total loss at step k.  Raises DivergenceError on a
    non-finite loss, ValueError for a single-class dataset.
    """
    if config.num_classes < 2:
        raise ValueError("training needs at least 2 classes")
    model, loss_mod = build_model(config)
    hr, lr, labels = build_dataset(config)
    params = list(model.parameters()) + list(loss_mod.parameters())
    opt = torch.optim.Adam(params, lr=config.learning_rate)
    gen = torch.Generator().manual_seed(config.seed)
    history = []
    model.train()
    for step in range(config.steps):
        idx = torch.randperm(len(labels), generator=gen)[: config.batch_size]
        xb, yb, lb = hr[idx], lr[idx], labels[idx]
        x_emb, _, _ = model(xb)
        y_emb, _, _ = model(yb)
        total, parts = loss_mod(x_emb, y_emb, lb)
        if not torch.isfinite(total):
            raise DivergenceError(
                f"non-finite loss at step {step}: "
                f"softmax={parts['softmax']}, center={parts['center']}, "
                f"matching={parts['matching']}"
            )
        opt.zero_grad()
        total.backward()
        opt.step()
        loss_mod.update_centers(x_emb.detach(), y_emb.detach(), lb)
        history.append(float(total.detach()))
    if checkpoint_path is not None:
        torch.save(
            {
                "model": model.state_dict(),
                "loss": loss_mod.state_dict(),
                "config": config.__dict__,
                "history": history,
            },
            checkpoint_path,
        )
    return model, loss_mod, history


def load_checkpoint(path):
    blob = torch.load(path, weights_only=False)
    config = FenConfig(**blob["config"])
    model, loss_mod = build_model(config)
    model.load_state_dict(blob["model"])
    loss_mod.load_state_dict(blob["loss"])
    return model, loss_mod, config, blob["history"]
