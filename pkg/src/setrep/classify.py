"""Class decisions from regularized representation residuals.

One joint hull solve runs against the full gallery stack; each class is then
scored by how well its slice of the representation reconstructs the query
hull, normalized by the energy of its coefficients:

    r_c = ||Y(a_hat) - X_c(b_hat_c)||^2 / ||b_hat_c||^2

(squared Frobenius norm in matrix form).  The decision is the argmin class,
ties broken by the smallest label.  A class whose coefficient slice is
numerically zero is unrepresented and scores +inf rather than dividing by
zero.

``CollaborativeSetClassifier`` wraps this in the usual fit/predict estimator
surface so galleries plug into sklearn-style pipelines and model selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import (
    ConfigError,
    DimensionMismatchError,
    NoRepresentableClassError,
    ValidationError,
)
from .matrix_solver import MatrixCRParams, combine, solve_matrix_hull
from .sets import (
    FeatureSet,
    Gallery,
    HullSolution,
    MatrixFeatureSet,
    concat_gallery,
)
from .vector_solver import VectorCRParams, solve_vector_hull

# coefficient slices with squared norm below this are treated as unrepresented
_BETA_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ClassDecision:
    """Argmin-residual decision with the full per-class residual vector."""

    label: int
    labels: tuple
    residuals: np.ndarray
    margin: float

    def residual_of(self, label: int) -> float:
        return float(self.residuals[self.labels.index(label)])


def class_residual(solution: HullSolution, query, gallery: Gallery, class_id: int) -> float:
    """Regularized residual of one class given a joint hull solution."""
    start, stop = gallery.class_range(class_id)
    beta_c = solution.beta[start:stop]
    denom = float(beta_c @ beta_c)
    if denom < _BETA_FLOOR:
        return np.inf
    i = gallery.labels.index(class_id)
    cset = gallery.sets[i]
    if gallery.is_matrix:
        diff = combine(query, solution.alpha) - combine(cset, beta_c)
        num = float(np.sum(diff * diff))
    else:
        diff = query.data @ solution.alpha - cset.data @ beta_c
        num = float(diff @ diff)
    return num / denom


def _solve(query, gallery, solver: str, params):
    if solver == "vector":
        if params is None:
            params = VectorCRParams()
        return solve_vector_hull(query, gallery, params)
    if solver == "matrix":
        if params is None:
            params = MatrixCRParams()
        return solve_matrix_hull(query, gallery, params)
    raise ConfigError(f"unknown solver {solver!r}; expected 'vector' or 'matrix'")


def classify(query, gallery: Gallery, solver: str = "vector", params=None) -> ClassDecision:
    """Joint solve over the full gallery, then per-class residual ranking.

    Deterministic: identical inputs give bit-identical decisions (fixed
    smallest-label tie-break, no randomness anywhere).
    """
    if gallery.num_classes < 1:
        raise ValidationError("gallery has no classes")
    solution = _solve(query, gallery, solver, params)
    residuals = np.array(
        [class_residual(solution, query, gallery, lab) for lab in gallery.labels]
    )
    if np.all(np.isinf(residuals)):
        raise NoRepresentableClassError(
            "every class has zero coefficient energy; no representable class"
        )
    # ties (exact, or within 1e-12 relative float noise, e.g. duplicated
    # classes) break to the smallest label
    best_r = residuals.min()
    tie_cut = best_r * (1.0 + 1e-12)
    label = min(lab for r, lab in zip(residuals, gallery.labels) if r <= tie_cut)
    if len(residuals) == 1:
        margin = np.inf
    else:
        ordered = np.sort(residuals)
        margin = float(ordered[1] - ordered[0])
    return ClassDecision(
        label=int(label),
        labels=tuple(gallery.labels),
        residuals=residuals,
        margin=margin,
    )


def _as_set(item, mode: str):
    if isinstance(item, (FeatureSet, MatrixFeatureSet)):
        return item
    if mode == "vector":
        return FeatureSet(np.atleast_2d(np.asarray(item, dtype=np.float64)))
    return MatrixFeatureSet([np.asarray(m, dtype=np.float64) for m in item])


class CollaborativeSetClassifier(BaseEstimator, ClassifierMixin):
    """Estimator facade over the joint-solve residual classifier.

    Parameters
    ----------
    mode : {'vector', 'matrix'}
        Which hull solver scores queries.  Vector mode flattens maps to
        columns and solves in closed form; matrix mode keeps 2-D maps and
        runs the nuclear-norm ADMM.
    lambda1, lambda2 : float
        Regularizer weights on the query-hull and gallery coefficients.
    mu, epsilon, max_iter : matrix-mode ADMM controls (ignored in vector mode).

    ``fit`` takes one feature set per gallery image plus its label; sets
    sharing a label are merged into that class.  ``predict`` takes query sets.
    """

    def __init__(
        self,
        mode: str = "vector",
        lambda1: float = 1e-3,
        lambda2: float = 1e-3,
        mu: float = 1.0,
        epsilon: float = 1e-6,
        max_iter: int = 500,
    ):
        self.mode = mode
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.mu = mu
        self.epsilon = epsilon
        self.max_iter = max_iter

    def _params(self):
        if self.mode == "vector":
            return VectorCRParams(lambda1=self.lambda1, lambda2=self.lambda2)
        if self.mode == "matrix":
            return MatrixCRParams(
                lambda1=self.lambda1,
                lambda2=self.lambda2,
                mu=self.mu,
                epsilon=self.epsilon,
                max_iter=self.max_iter,
            )
        raise ConfigError(f"unknown mode {self.mode!r}; expected 'vector' or 'matrix'")

    def fit(self, X, y):
        """Assemble the labeled gallery from (set, label) pairs."""
        params = self._params()  # validates mode and ranges up front
        y = np.asarray(y)
        if len(X) != len(y):
            raise DimensionMismatchError(f"{len(X)} sets but {len(y)} labels")
        merged: dict = {}
        for item, label in zip(X, y):
            merged.setdefault(int(label), []).append(_as_set(item, self.mode))
        classes = []
        for label in sorted(merged):
            sets = merged[label]
            if self.mode == "vector":
                joined = FeatureSet(np.hstack([s.data for s in sets]))
            else:
                joined = MatrixFeatureSet([m for s in sets for m in s.maps])
            classes.append((label, joined))
        self.gallery_ = concat_gallery(classes)
        self.classes_ = np.array(sorted(merged))
        self._fit_params = params
        return self

    def decide(self, X):
        """Full :class:`ClassDecision` per query (residuals and margins)."""
        self._check_fitted()
        return [
            classify(_as_set(item, self.mode), self.gallery_, self.mode, self._fit_params)
            for item in X
        ]

    def predict(self, X):
        return np.array([d.label for d in self.decide(X)])

    def decision_function(self, X):
        """Negated residual matrix (higher is better), one row per query."""
        return np.array([-d.residuals for d in self.decide(X)])

    def _check_fitted(self):
        if not hasattr(self, "gallery_"):
            raise ConfigError("classifier is not fitted; call fit(X, y) first")
