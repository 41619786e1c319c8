"""Procedural toy identity dataset.

Each identity is a seeded smooth random texture; samples jitter it with a
circular shift and pixel noise.  The low-resolution counterpart of a sample
is produced the way the recognition setting defines it: downsample by the
configured factor, then bilinearly upsample back to the original size.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .config import FenConfig


def _smooth_texture(h, w, rng):
    # coarse structure plus per-pixel detail: downsampling must actually
    # destroy information, otherwise LR counterparts are trivially close
    coarse = rng.standard_normal((h // 4 + 2, w // 4 + 2))
    t = torch.from_numpy(coarse)[None, None].float()
    up = F.interpolate(t, size=(h, w), mode="bilinear", align_corners=False)
    return up[0, 0].numpy() + 0.6 * rng.standard_normal((h, w))


def identity_texture(config: FenConfig, class_id: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0xF3, class_id)))
    return _smooth_texture(config.height, config.width, rng)


def make_pair(config: FenConfig, class_id: int, sample_id: int):
    """One (HR, LR) image pair for an identity; deterministic in all ids."""
    base = identity_texture(config, class_id)
    rng = np.random.default_rng(
        np.random.SeedSequence((config.seed, 0xA7, class_id, sample_id))
    )
    dy, dx = int(rng.integers(-2, 3)), int(rng.integers(-2, 3))
    hr = np.roll(base, (dy, dx), axis=(0, 1)) + 0.08 * rng.standard_normal(base.shape)
    hr_t = torch.from_numpy(hr)[None, None].float()
    small = F.interpolate(
        hr_t, scale_factor=1.0 / config.downscale, mode="bilinear", align_corners=False,
        recompute_scale_factor=False,
    )
    lr_t = F.interpolate(small, size=hr.shape, mode="bilinear", align_corners=False)
    return hr_t[0], lr_t[0]


def build_dataset(config: FenConfig):
    """Tensors (hr, lr, labels) over all identities and samples."""
    hrs, lrs, labels = [], [], []
    for c in range(config.num_classes):
        for s in range(config.images_per_class):
            hr, lr = make_pair(config, c, s)
            hrs.append(hr)
            lrs.append(lr)
            labels.append(c)
    return torch.stack(hrs), torch.stack(lrs), torch.tensor(labels, dtype=torch.long)
