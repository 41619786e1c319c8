"""Network blocks: the two-branch multi-scale block and the stage fuser.

One block runs parallel 3x3 and 5x5 branches, cross-concatenates them, and
bottlenecks back to the working channel width:

    M1 = relu(w1_3x3 * S + b1)        N1 = relu(w1_5x5 * S + b1)
    M2 = relu(w2_3x3 * [M1, N1] + b2) N2 = relu(w2_5x5 * [N1, M1] + b2)
    out = w3_1x1 * [M2, N2] + b3

The first- and second-level convolutions preserve their input channel count
(32 and 64), so the final concat carries 128 channels into the 1x1 reduction.
Each level's bias is shared across its two branches.  Stage outputs at
spatial ratios 8:4:2:1 are max-pooled with matching strides, concatenated,
and reduced by a 1x1 bottleneck into the fused feature block.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


class MsfbBlock(nn.Module):
    """Two-branch multi-scale feature block with cross-concatenation."""

    def __init__(self, channels: int = 32):
        super().__init__()
        c2 = 2 * channels
        self.w1_3 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.w1_5 = nn.Conv2d(channels, channels, 5, padding=2, bias=False)
        self.w2_3 = nn.Conv2d(c2, c2, 3, padding=1, bias=False)
        self.w2_5 = nn.Conv2d(c2, c2, 5, padding=2, bias=False)
        self.w3_1 = nn.Conv2d(2 * c2, channels, 1, bias=False)
        self.b1 = nn.Parameter(torch.zeros(channels))
        self.b2 = nn.Parameter(torch.zeros(c2))
        self.b3 = nn.Parameter(torch.zeros(channels))
        self.channels = channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} input channels, got {x.shape[1]}")
        b1 = self.b1.view(1, -1, 1, 1)
        b2 = self.b2.view(1, -1, 1, 1)
        m1 = F.relu(self.w1_3(x) + b1)
        n1 = F.relu(self.w1_5(x) + b1)
        m2 = F.relu(self.w2_3(torch.cat([m1, n1], dim=1)) + b2)
        n2 = F.relu(self.w2_5(torch.cat([n1, m1], dim=1)) + b2)
        return self.w3_1(torch.cat([m2, n2], dim=1)) + self.b3.view(1, -1, 1, 1)


def hierarchical_fuse(stage_outputs, bottleneck: nn.Conv2d) -> torch.Tensor:
    """Pool stages to a common grid (strides 8/4/2/1) and bottleneck to 32.

    Expects four stage tensors whose spatial sizes are in exact 8:4:2:1
    ratio; pooling windows equal their strides, so each output cell summarizes
    a disjoint region.
    """
    if len(stage_outputs) != 4:
        raise ValueError(f"expected 4 stage outputs, got {len(stage_outputs)}")
    target = stage_outputs[3].shape[-2:]
    pooled = []
    for s, stride in zip(stage_outputs, (8, 4, 2, 1)):
        expected = (target[0] * stride, target[1] * stride)
        if tuple(s.shape[-2:]) != expected:
            raise ValueError(
                f"stage with stride {stride} has spatial size {tuple(s.shape[-2:])}, "
                f"expected {expected}"
            )
        pooled.append(s if stride == 1 else F.max_pool2d(s, stride, stride))
    return bottleneck(torch.cat(pooled, dim=1))


class FeatureExtractionNetwork(nn.Module):
    """Entry conv, four multi-scale stages with stride-2 pools, fused output.

    ``forward`` returns (embedding, stage_outputs, fused): the 512-wide
    embedding feeds the losses, the per-stage 32-map tensors and their fused
    combination are what gets exported.
    """

    def __init__(self, height: int = 32, width: int = 32, channels: int = 32,
                 embedding_dim: int = 512):
        super().__init__()
        self.entry = nn.Conv2d(1, channels, 3, padding=1)
        self.blocks = nn.ModuleList([MsfbBlock(channels) for _ in range(4)])
        self.bottleneck = nn.Conv2d(4 * channels, channels, 1)
        h8, w8 = height // 8, width // 8
        self.head = nn.Linear(channels * h8 * w8, embedding_dim)
        # variance-preserving init: the default shrinking init collapses
        # activations through the deep stack, which degenerates the initial
        # HR/LR embedding mismatch the matching loss is supposed to reduce
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
            elif isinstance(m, nn.Linear):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="linear")
                nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor):
        s = F.relu(self.entry(x))
        stages = []
        for i, block in enumerate(self.blocks):
            if i > 0:
                s = F.max_pool2d(s, 3, stride=2, padding=1)
            s = block(s)
            stages.append(s)
        fused = hierarchical_fuse(stages, self.bottleneck)
        emb = self.head(fused.flatten(1))
        return emb, stages, fused
