"""Decision-level fusion of per-stage predictions.

A validation run produces, for every sample, one predicted label per stage.
Recording correctness as +-1 gives a decision matrix D; stacking a soft
sum-to-one row on top of it and regressing against an all-ones target yields
nonnegative per-stage weights:

    min_{sigma >= 0}  ||e_hat - D_hat sigma||^2 + tau * sum(sigma)

with D_hat = [D; 1^T] and e_hat all ones.  Since sigma is nonnegative the l1
penalty is the plain sum, so the problem is a nonnegative quadratic program;
projected gradient with a fixed 1/L step solves it deterministically with no
extra dependencies.  Fusing a sample then takes the label whose supporting
stages carry the most total weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DimensionMismatchError, ValidationError

_PG_MAX_ITER = 10_000
_PG_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PredictionTable:
    """Per-stage predicted labels ``h`` (n x s) with true labels ``z`` (n)."""

    h: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h)
        z = np.asarray(self.z)
        if h.ndim != 2:
            raise ValidationError(f"prediction table must be 2-D, got ndim={h.ndim}")
        if z.shape != (h.shape[0],):
            raise DimensionMismatchError(
                f"labels shape {z.shape} does not match {h.shape[0]} rows"
            )
        if h.shape[0] < 1 or h.shape[1] < 1:
            raise ValidationError(f"prediction table has a zero dimension: {h.shape}")
        object.__setattr__(self, "h", h.astype(np.int64))
        object.__setattr__(self, "z", z.astype(np.int64))

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def s(self) -> int:
        return self.h.shape[1]


@dataclass(frozen=True, eq=False)
class DecisionMatrix:
    """+-1 correctness matrix: +1 where a stage predicted the true label."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValidationError(f"decision matrix must be 2-D and nonempty: {d.shape}")
        if not np.all(np.abs(d) == 1.0):
            raise ValidationError("decision matrix entries must be exactly +1 or -1")
        frozen = d.copy()
        frozen.flags.writeable = False
        object.__setattr__(self, "d", frozen)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def s(self) -> int:
        return self.d.shape[1]


@dataclass(frozen=True, eq=False)
class ScaleWeights:
    """Nonnegative per-stage weights with the tau used to learn them.

    With small tau the soft sum-to-one row keeps sum(sigma) near 1; a large
    tau deliberately shrinks the total below that window.
    """

    sigma: np.ndarray
    tau: float

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.ndim != 1 or sigma.size < 1:
            raise ValidationError(f"sigma must be a nonempty vector, got {sigma.shape}")
        if not np.all(np.isfinite(sigma)):
            raise ValidationError("sigma contains a non-finite entry")
        if np.any(sigma < 0):
            raise ValidationError("sigma entries must be nonnegative")
        frozen = sigma.copy()
        frozen.flags.writeable = False
        object.__setattr__(self, "sigma", frozen)

    @property
    def s(self) -> int:
        return self.sigma.size


def build_decision_matrix(table: PredictionTable) -> DecisionMatrix:
    """D[i, j] = +1 iff stage j predicted sample i's true label, else -1."""
    return DecisionMatrix(np.where(table.h == table.z[:, None], 1.0, -1.0))


def _power_iteration_eigmax(M: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Runs from a fixed-seed random start plus every canonical basis vector and
    keeps the largest estimate: a single deterministic start can be exactly
    orthogonal to the top eigenvector (the all-ones vector is, whenever two
    columns of D_hat mirror each other), which silently underestimates the
    step's Lipschitz constant.
    """
    s = M.shape[0]
    starts = [np.random.default_rng(0xD5).standard_normal(s)]
    starts.extend(np.eye(s))
    best = 0.0
    for v in starts:
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        v = v / nv
        lam = 0.0
        for _ in range(500):
            w = M @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                lam = 0.0
                break
            v = w / nw
            new_lam = float(v @ (M @ v))
            if abs(new_lam - lam) <= 1e-14 * max(1.0, abs(new_lam)):
                lam = new_lam
                break
            lam = new_lam
        best = max(best, lam)
    return best


def learn_scale_weights(
    D: DecisionMatrix, tau: float, weight_floor: float = 0.0
) -> ScaleWeights:
    """Solve the nonnegative weight program by projected gradient.

    Runs with a fixed step of one over the gradient Lipschitz constant
    (2 * eigmax(D_hat^T D_hat), eigmax by power iteration) until the
    first-order optimality measure drops to 1e-8: active entries need a near
    zero gradient, entries at the floor a nonnegative one.  ``weight_floor``
    lifts the nonnegativity bound for callers wanting strictly positive
    weights.
    """
    if tau < 0:
        raise ValidationError(f"tau must be nonnegative, got {tau}")
    if weight_floor < 0:
        raise ValidationError(f"weight_floor must be nonnegative, got {weight_floor}")
    D_hat = np.vstack([D.d, np.ones((1, D.s))])
    e_hat = np.ones(D_hat.shape[0])
    gram = D_hat.T @ D_hat
    rhs = D_hat.T @ e_hat
    lip = 2.0 * _power_iteration_eigmax(gram)
    step = 1.0 / lip if lip > 0 else 1.0

    sigma = np.full(D.s, weight_floor)
    for _ in range(_PG_MAX_ITER):
        grad = 2.0 * (gram @ sigma - rhs) + tau
        at_floor = sigma <= weight_floor
        kkt = np.where(at_floor, np.maximum(0.0, -grad), np.abs(grad))
        if kkt.max() <= _PG_TOL:
            break
        sigma = np.maximum(weight_floor, sigma - step * grad)
    return ScaleWeights(sigma=sigma, tau=float(tau))


def fuse(preds, weights: ScaleWeights) -> int:
    """Weighted vote: the label whose supporting stages carry the most weight.

    Only labels some stage actually predicted can win; ties break to the
    smallest label.
    """
    preds = np.asarray(preds)
    if preds.ndim != 1 or preds.size == 0:
        raise ValidationError(f"predictions must be a nonempty vector, got {preds.shape}")
    if preds.size != weights.s:
        raise DimensionMismatchError(
            f"{preds.size} predictions for {weights.s} stage weights"
        )
    candidates = np.unique(preds)  # sorted, so argmax ties pick the smallest
    scores = np.array(
        [weights.sigma[preds == k].sum() for k in candidates]
    )
    return int(candidates[np.argmax(scores)])


class StagePredictionFuser(BaseEstimator, ClassifierMixin):
    """Estimator facade: learn stage weights on validation predictions.

    ``fit(H, z)`` takes the (n x s) per-stage predicted labels and the true
    labels; ``predict(H)`` fuses new prediction rows with the learned weights.
    """

    def __init__(self, tau: float = 0.01, weight_floor: float = 0.0):
        self.tau = tau
        self.weight_floor = weight_floor

    def fit(self, X, y):
        table = PredictionTable(h=np.asarray(X), z=np.asarray(y))
        self.weights_ = learn_scale_weights(
            build_decision_matrix(table), self.tau, self.weight_floor
        )
        self.classes_ = np.unique(table.z)
        return self

    def predict(self, X):
        if not hasattr(self, "weights_"):
            raise ValidationError("fuser is not fitted; call fit(H, z) first")
        X = np.asarray(X)
        if X.ndim != 2:
            raise ValidationError(f"prediction rows must be 2-D, got ndim={X.ndim}")
        return np.array([fuse(row, self.weights_) for row in X])
