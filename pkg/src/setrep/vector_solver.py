"""Closed-form solver for the ridge-regularized vector hull representation.

The problem: represent the affine hull of the query columns over the
concatenated gallery,

    min_{a, b}  ||Y a - X b||^2 + lambda1 ||a||^2 + lambda2 ||b||^2
    s.t.        sum(a) = 1.

Stacking z = [a; b], A = [Y, -X], B = blockdiag(lambda1 I, lambda2 I) and
d = [1,...,1, 0,...,0], the stationarity system is (A^T A + B) z + phi d = 0
with d^T z = 1, giving the closed form z_hat = z0 / (d^T z0) where
z0 = (A^T A + B)^{-1} d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateConstraintError,
    DimensionMismatchError,
    SingularSystemError,
    ValidationError,
)
from .sets import FeatureSet, Gallery, HullSolution, SolveDiagnostics

# relative floor on |d^T z0| below which the hull constraint is unreachable
_DEGENERACY_FLOOR = 1e-12


@dataclass(frozen=True)
class VectorCRParams:
    """Regularizer weights for the vector solver (both must be >= 0)."""

    lambda1: float = 1e-3
    lambda2: float = 1e-3

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValidationError(
                f"regularizers must be nonnegative, got ({self.lambda1}, {self.lambda2})"
            )


def assemble_system(query: FeatureSet, gallery: Gallery, params: VectorCRParams):
    """Build the stacked system pieces (A, B, d) for the Lagrangian.

    Returns
    -------
    A : ndarray, shape (d, n_a + n_b)
        Column concatenation [Y, -X].
    B : ndarray, shape (n_a + n_b, n_a + n_b)
        Diagonal regularizer blockdiag(lambda1 I, lambda2 I).
    dvec : ndarray, shape (n_a + n_b,)
        Constraint direction: ones over the alpha block, zeros elsewhere.
    """
    if gallery.is_matrix:
        raise DimensionMismatchError("vector solver needs a vector-form gallery")
    X = gallery.stacked_matrix()
    Y = query.data
    if Y.shape[0] != X.shape[0]:
        raise DimensionMismatchError(f"query d={Y.shape[0]} != gallery d={X.shape[0]}")
    n_a, n_b = Y.shape[1], X.shape[1]
    A = np.hstack([Y, -X]).astype(np.float64)
    diag = np.concatenate([np.full(n_a, params.lambda1), np.full(n_b, params.lambda2)])
    B = np.diag(diag)
    dvec = np.concatenate([np.ones(n_a), np.zeros(n_b)])
    return A, B, dvec


def solve_vector_hull(
    query: FeatureSet, gallery: Gallery, params: VectorCRParams
) -> HullSolution:
    """Solve the constrained ridge problem in closed form.

    Raises :class:`SingularSystemError` when A^T A + B is singular (increase
    the lambdas) and :class:`DegenerateConstraintError` when d^T z0 vanishes.
    """
    A, B, dvec = assemble_system(query, gallery, params)
    n_a = query.n
    M = A.T @ A + B
    try:
        z0 = scipy.linalg.solve(M, dvec, assume_a="sym")
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "A^T A + B is singular; increase lambda1/lambda2"
        ) from exc
    if not np.all(np.isfinite(z0)):
        raise SingularSystemError(
            "A^T A + B is numerically singular; increase lambda1/lambda2"
        )
    scale = np.dot(dvec, z0)
    if abs(scale) <= _DEGENERACY_FLOOR * max(
        1.0, np.linalg.norm(z0) * np.linalg.norm(dvec)
    ):
        raise DegenerateConstraintError(
            f"constraint direction is degenerate (d^T z0 = {scale:.3e})"
        )
    z_hat = z0 / scale
    alpha, beta = z_hat[:n_a], z_hat[n_a:]
    obj = objective_vector(query, gallery, alpha, beta, params)
    gap = abs(float(np.sum(alpha)) - 1.0)
    return HullSolution(
        alpha=alpha,
        beta=beta,
        diagnostics=SolveDiagnostics(
            iterations=1, final_primal_residual=gap, objective=obj, converged=True
        ),
    )


def objective_vector(query, gallery, alpha, beta, params: VectorCRParams) -> float:
    """||Y a - X b||^2 + lambda1 ||a||^2 + lambda2 ||b||^2 (squared norms)."""
    if gallery.is_matrix:
        raise DimensionMismatchError("vector objective needs a vector-form gallery")
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    X = gallery.stacked_matrix()
    Y = query.data
    if Y.shape[0] != X.shape[0]:
        raise DimensionMismatchError(f"query d={Y.shape[0]} != gallery d={X.shape[0]}")
    if alpha.shape != (Y.shape[1],) or beta.shape != (X.shape[1],):
        raise DimensionMismatchError(
            f"coefficient shapes {alpha.shape}, {beta.shape} do not match "
            f"n_a={Y.shape[1]}, n_b={X.shape[1]}"
        )
    r = Y @ alpha - X @ beta
    return float(
        r @ r + params.lambda1 * (alpha @ alpha) + params.lambda2 * (beta @ beta)
    )


def stationarity_residual(query, gallery, solution: HullSolution, params) -> float:
    """Relative norm of (A^T A + B) z + phi d with phi fit by least squares.

    Diagnostic used by the test suite; small values certify first-order
    optimality of a solution.
    """
    A, B, dvec = assemble_system(query, gallery, params)
    z = np.concatenate([solution.alpha, solution.beta])
    g = (A.T @ A + B) @ z
    phi = -np.dot(g, dvec) / np.dot(dvec, dvec)
    return float(np.linalg.norm(g + phi * dvec) / np.linalg.norm(dvec))
