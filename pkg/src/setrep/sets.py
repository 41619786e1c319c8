"""Core domain types: feature sets, the labeled gallery, and hull solutions.

A feature set is the bag of feature maps one image produces at one network
stage.  ``FeatureSet`` keeps each map flattened as a column of a dense
``d x n`` matrix; ``MatrixFeatureSet`` keeps the raw ``p x q`` maps so that
2-D structure survives into the matrix-form solver.  Flattening is always
column-major so the two forms stay interchangeable.

All types are immutable after construction (arrays are copied and marked
read-only), so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, ValidationError

_ALLOWED_DTYPES = (np.float64, np.float32)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


def _check_finite(data: np.ndarray, what: str) -> None:
    if data.size and not np.all(np.isfinite(data)):
        idx = np.argwhere(~np.isfinite(data))[0]
        raise ValidationError(
            f"{what} contains a non-finite entry at {tuple(int(i) for i in idx)}"
        )


def _coerce(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        arr = arr.astype(np.float64)
    return arr


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Feature maps of one image at one stage, flattened to columns.

    ``data`` is ``d x n``: d the flattened map size, n the number of maps.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _coerce(self.data)
        if arr.ndim != 2:
            raise ValidationError(f"feature set must be 2-D, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"feature set has a zero dimension: shape={arr.shape}")
        _check_finite(arr, "feature set")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class MatrixFeatureSet:
    """Feature maps of one image at one stage, kept in primitive 2-D form."""

    maps: tuple

    def __init__(self, maps: Iterable[np.ndarray]):
        maps = tuple(_coerce(m) for m in maps)
        if len(maps) == 0:
            raise ValidationError("matrix feature set has zero maps")
        shape = maps[0].shape
        if len(shape) != 2:
            raise ValidationError(f"feature maps must be 2-D, got ndim={len(shape)}")
        if shape[0] < 1 or shape[1] < 1:
            raise ValidationError(f"feature map has a zero dimension: shape={shape}")
        for i, m in enumerate(maps):
            if m.shape != shape:
                raise DimensionMismatchError(
                    f"map {i} has shape {m.shape}, expected {shape}"
                )
            _check_finite(m, f"feature map {i}")
        object.__setattr__(self, "maps", tuple(_freeze(m) for m in maps))

    @property
    def p(self) -> int:
        return self.maps[0].shape[0]

    @property
    def q(self) -> int:
        return self.maps[0].shape[1]

    @property
    def n(self) -> int:
        return len(self.maps)

    def stacked(self) -> np.ndarray:
        """All maps as one ``n x p x q`` array (copy)."""
        return np.stack(self.maps, axis=0)

    def vec_matrix(self) -> np.ndarray:
        """Column-major flattening of each map, as columns of a ``pq x n`` matrix."""
        return np.column_stack([m.flatten(order="F") for m in self.maps])


AnySet = Union[FeatureSet, MatrixFeatureSet]


def to_vector_form(mset: MatrixFeatureSet, dtype=None) -> FeatureSet:
    """Flatten a matrix set into the equivalent vector set (column-major)."""
    data = mset.vec_matrix()
    if dtype is not None:
        data = data.astype(dtype)
    return FeatureSet(data)


def to_matrix_form(fset: FeatureSet, p: int, q: int) -> MatrixFeatureSet:
    """Reshape a vector set back into ``p x q`` maps (column-major inverse)."""
    if p * q != fset.d:
        raise DimensionMismatchError(f"cannot reshape d={fset.d} into {p}x{q}")
    maps = [fset.data[:, j].reshape(p, q, order="F") for j in range(fset.n)]
    return MatrixFeatureSet(maps)


def validate(fset: AnySet) -> None:
    """Re-check the structural invariants of an existing set.

    Constructors already enforce these; this re-runs the checks (useful after
    deserialization of trusted-but-external data) and raises
    :class:`ValidationError` on the first violation.
    """
    if isinstance(fset, FeatureSet):
        if fset.data.ndim != 2 or fset.d < 1 or fset.n < 1:
            raise ValidationError(f"feature set has a zero dimension: shape={fset.data.shape}")
        _check_finite(fset.data, "feature set")
    elif isinstance(fset, MatrixFeatureSet):
        if fset.n < 1 or fset.p < 1 or fset.q < 1:
            raise ValidationError("matrix feature set has a zero dimension")
        shape = fset.maps[0].shape
        for i, m in enumerate(fset.maps):
            if m.shape != shape:
                raise DimensionMismatchError(f"map {i} has shape {m.shape}, expected {shape}")
            _check_finite(m, f"feature map {i}")
    else:
        raise ValidationError(f"not a feature set: {type(fset).__name__}")


@dataclass(frozen=True)
class Gallery:
    """Ordered labeled classes with their position in the concatenated stack.

    ``partition[i] = (start, stop)`` is the half-open column (or map) range of
    class i inside the stack formed by concatenating the class sets in order.
    """

    labels: tuple
    sets: tuple
    partition: tuple

    @property
    def num_classes(self) -> int:
        return len(self.labels)

    @property
    def n_total(self) -> int:
        return self.partition[-1][1] if self.partition else 0

    @property
    def is_matrix(self) -> bool:
        return isinstance(self.sets[0], MatrixFeatureSet)

    @property
    def d(self) -> int:
        s = self.sets[0]
        return s.d if isinstance(s, FeatureSet) else s.p * s.q

    @property
    def map_shape(self) -> tuple:
        s = self.sets[0]
        if not isinstance(s, MatrixFeatureSet):
            raise ValidationError("gallery holds vector sets, not matrix maps")
        return (s.p, s.q)

    def class_range(self, label: int) -> tuple:
        """Stack range of the class with the given label."""
        i = self.labels.index(label)
        return self.partition[i]

    def class_of_column(self, j: int) -> tuple:
        """Inverse lookup: stack column -> (label, local index)."""
        for lab, (start, stop) in zip(self.labels, self.partition):
            if start <= j < stop:
                return lab, j - start
        raise IndexError(f"column {j} outside the stack (n_total={self.n_total})")

    def stacked_matrix(self) -> np.ndarray:
        """Concatenated ``d x n_total`` matrix (vector galleries only)."""
        if self.is_matrix:
            return np.hstack([s.vec_matrix() for s in self.sets])
        return np.hstack([s.data for s in self.sets])

    def stacked_maps(self) -> np.ndarray:
        """Concatenated ``n_total x p x q`` array (matrix galleries only)."""
        if not self.is_matrix:
            raise ValidationError("gallery holds vector sets, not matrix maps")
        return np.concatenate([s.stacked() for s in self.sets], axis=0)


def concat_gallery(classes: Sequence) -> Gallery:
    """Build a :class:`Gallery` from ``(label, set)`` pairs.

    Concatenation order equals input order; the partition covers all columns
    contiguously and disjointly.  Raises on duplicate labels, empty input, or
    dimensionally incompatible sets.
    """
    classes = list(classes)
    if not classes:
        raise ValidationError("gallery needs at least one class")
    labels = []
    sets = []
    for label, fset in classes:
        labels.append(int(label))
        if not isinstance(fset, (FeatureSet, MatrixFeatureSet)):
            raise ValidationError(f"class {label}: not a feature set: {type(fset).__name__}")
        sets.append(fset)
    if len(set(labels)) != len(labels):
        dupes = sorted({l for l in labels if labels.count(l) > 1})
        raise ValidationError(f"duplicate class labels: {dupes}")

    first = sets[0]
    if isinstance(first, FeatureSet):
        for lab, s in zip(labels, sets):
            if not isinstance(s, FeatureSet):
                raise DimensionMismatchError(f"class {lab}: mixed vector/matrix sets")
            if s.d != first.d:
                raise DimensionMismatchError(f"class {lab}: d={s.d} != {first.d}")
    else:
        for lab, s in zip(labels, sets):
            if not isinstance(s, MatrixFeatureSet):
                raise DimensionMismatchError(f"class {lab}: mixed vector/matrix sets")
            if (s.p, s.q) != (first.p, first.q):
                raise DimensionMismatchError(
                    f"class {lab}: map shape {(s.p, s.q)} != {(first.p, first.q)}"
                )

    partition = []
    start = 0
    for s in sets:
        stop = start + s.n
        partition.append((start, stop))
        start = stop
    return Gallery(labels=tuple(labels), sets=tuple(sets), partition=tuple(partition))


@dataclass(frozen=True)
class SolveDiagnostics:
    """Solver bookkeeping attached to every hull solution."""

    iterations: int
    final_primal_residual: float
    objective: float
    converged: bool = True


@dataclass(frozen=True, eq=False)
class HullSolution:
    """Representation pair (alpha over the query hull, beta over the gallery)."""

    alpha: np.ndarray
    beta: np.ndarray
    diagnostics: SolveDiagnostics

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        _check_finite(alpha, "alpha")
        _check_finite(beta, "beta")
        object.__setattr__(self, "alpha", _freeze(alpha))
        object.__setattr__(self, "beta", _freeze(beta))

    @property
    def constraint_gap(self) -> float:
        """|sum(alpha) - 1|; tightness depends on the solver (see its contract)."""
        return abs(float(np.sum(self.alpha)) - 1.0)
