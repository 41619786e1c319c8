"""Training losses: dual softmax, dual center loss, and HR/LR matching.

All three are batch sums (not means).  The softmax term classifies the HR and
LR embeddings through separate linear heads; the center term pulls each
embedding toward its class center in its own domain; the matching term ties
the two domains together sample-wise:

    L = L_softmax + theta1 * L_center + theta2 * sum_i ||x_i - y_i||^2

Centers are buffers, updated outside autograd with the usual count-normalized
mini-batch rule at rate 0.5.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


class DualDomainLoss(nn.Module):
    def __init__(self, embedding_dim: int, num_classes: int,
                 theta1: float = 0.008, theta2: float = 1.0,
                 center_rate: float = 0.5):
        super().__init__()
        if num_classes < 2:
            raise ValueError("softmax loss needs at least 2 classes")
        self.hr_head = nn.Linear(embedding_dim, num_classes)  # U, a
        self.lr_head = nn.Linear(embedding_dim, num_classes)  # V, b
        self.register_buffer("hr_centers", torch.zeros(num_classes, embedding_dim))
        self.register_buffer("lr_centers", torch.zeros(num_classes, embedding_dim))
        self.theta1 = theta1
        self.theta2 = theta2
        self.center_rate = center_rate
        self.num_classes = num_classes

    def softmax_term(self, x, y, labels) -> torch.Tensor:
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise ValueError("label out of range")
        return F.cross_entropy(self.hr_head(x), labels, reduction="sum") + \
            F.cross_entropy(self.lr_head(y), labels, reduction="sum")

    def center_term(self, x, y, labels) -> torch.Tensor:
        return ((x - self.hr_centers[labels]) ** 2).sum() + \
            ((y - self.lr_centers[labels]) ** 2).sum()

    def matching_term(self, x, y) -> torch.Tensor:
        return ((x - y) ** 2).sum()

    def forward(self, x, y, labels):
        """Total loss plus the three sub-losses (detached) for reporting."""
        ls = self.softmax_term(x, y, labels)
        lc = self.center_term(x, y, labels)
        le = self.matching_term(x, y)
        total = ls + self.theta1 * lc + self.theta2 * le
        parts = {"softmax": ls.detach(), "center": lc.detach(), "matching": le.detach()}
        return total, parts

    @torch.no_grad()
    def update_centers(self, x, y, labels) -> None:
        """Count-normalized center update at ``center_rate``."""
        for centers, emb in ((self.hr_centers, x), (self.lr_centers, y)):
            for c in labels.unique():
                mask = labels == c
                diff = centers[c] - emb[mask]
                centers[c] -= self.center_rate * diff.sum(dim=0) / (1.0 + mask.sum())
