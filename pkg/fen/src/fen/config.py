"""Training and export configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass
class FenConfig:
    """Network, loss, and toy-dataset settings.

    Stage export strides are fixed at 8/4/2/1 relative to the first stage,
    matching one stride-2 pool between consecutive stages; channels (32) and
    embedding width (512) are fixed architecture constants.
    """

    height: int = 32
    width: int = 32
    channels: int = 32
    stages: int = 4
    embedding_dim: int = 512
    downscale: int = 8
    theta1: float = 0.008  # center-loss weight; not pinned by any reference
    theta2: float = 1.0    # HR/LR matching weight
    learning_rate: float = 1e-3
    steps: int = 200
    batch_size: int = 8
    num_classes: int = 10
    images_per_class: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.height % 8 or self.width % 8:
            raise ValueError("height and width must be multiples of 8 (stage strides)")
        if self.downscale < 2:
            raise ValueError("downscale factor must be >= 2")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")

    @staticmethod
    def from_file(path) -> "FenConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        known = set(FenConfig.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        return FenConfig(**doc)
