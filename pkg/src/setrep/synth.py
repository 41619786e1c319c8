"""Deterministic synthetic feature-set corpus and corruption model.

Each class is a Gaussian cloud around a seeded random prototype map; galleries
and queries are fully reproducible from (config, seed) and independent of
generation order because every class draws from its own derived stream
(seed XOR class id, with distinct salts separating gallery, query, and
prototype draws).

``occlude`` is the toy analog of pasting an image patch over a probe: a
near-square region covering exactly ceil(fraction * p * q) entries, placed at
a seeded random location per map, is overwritten either by a constant or by a
smooth structured texture.  A nominal square of side ceil(sqrt(count)) is
clipped to the map borders and trimmed, row-major, to the exact entry count,
so corruption size is exact for every fraction and map shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError
from .sets import Gallery, MatrixFeatureSet, concat_gallery, to_vector_form

_QUERY_SALT = 0x51
_OCCLUSION_SALT = 0x0C


@dataclass(frozen=True)
class SynthConfig:
    """Shape and randomness of one synthetic stage."""

    num_classes: int
    maps_per_class: int
    p: int
    q: int = 1
    noise_sigma: float = 0.1
    separation: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.num_classes, self.maps_per_class, self.p, self.q) < 1:
            raise ValidationError("counts and map dimensions must be >= 1")
        if self.noise_sigma < 0 or self.separation < 0:
            raise ValidationError("noise_sigma and separation must be nonnegative")
        if self.seed < 0:
            raise ValidationError(f"seed must be nonnegative, got {self.seed}")


@dataclass(frozen=True)
class OcclusionSpec:
    """Area fraction, fill style ('constant' or 'patch'), and seed."""

    fraction: float
    fill: str = "constant"
    seed: int = 0
    fill_value: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValidationError(f"fraction must be in [0, 1], got {self.fraction}")
        if self.fill not in ("constant", "patch"):
            raise ValidationError(f"fill must be 'constant' or 'patch', got {self.fill!r}")
        if self.seed < 0:
            raise ValidationError(f"seed must be nonnegative, got {self.seed}")


def _class_rng(config: SynthConfig, class_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.seed ^ class_id))


def class_prototype(config: SynthConfig, class_id: int) -> np.ndarray:
    """The seeded prototype map every member of the class scatters around."""
    if not 0 <= class_id < config.num_classes:
        raise ConfigError(f"class id {class_id} outside [0, {config.num_classes})")
    rng = _class_rng(config, class_id)
    return config.separation * rng.standard_normal((config.p, config.q))


def _noisy_maps(proto, sigma, count, rng):
    if sigma == 0.0:
        return [proto.copy() for _ in range(count)]
    return [proto + sigma * rng.standard_normal(proto.shape) for _ in range(count)]


def gen_gallery(config: SynthConfig):
    """The labeled gallery plus the ground-truth class prototypes.

    Returns ``(Gallery, prototypes)``; labels are 0..num_classes-1 in order.
    """
    classes = []
    prototypes = []
    for c in range(config.num_classes):
        rng = _class_rng(config, c)
        proto = config.separation * rng.standard_normal((config.p, config.q))
        maps = _noisy_maps(proto, config.noise_sigma, config.maps_per_class, rng)
        classes.append((c, MatrixFeatureSet(maps)))
        prototypes.append(proto)
    return concat_gallery(classes), prototypes


def gallery_to_vector_form(gallery: Gallery) -> Gallery:
    """The same gallery with every class set flattened to vector form."""
    return concat_gallery(
        [(lab, to_vector_form(s)) for lab, s in zip(gallery.labels, gallery.sets)]
    )


def gen_query(config: SynthConfig, class_id: int, n_a: int, index: int = 0) -> MatrixFeatureSet:
    """One query set: ``n_a`` noisy draws around the class prototype.

    ``index`` selects independent query draws; queries never share noise with
    the gallery stream.
    """
    if n_a < 1:
        raise ValidationError(f"n_a must be >= 1, got {n_a}")
    proto = class_prototype(config, class_id)
    rng = np.random.default_rng(
        np.random.SeedSequence((config.seed, _QUERY_SALT, class_id, index))
    )
    return MatrixFeatureSet(_noisy_maps(proto, config.noise_sigma, n_a, rng))


def _patch_geometry(p: int, q: int, count: int):
    """Height/width of the clipped near-square region holding ``count`` cells."""
    side = int(np.ceil(np.sqrt(count)))
    w = min(side, q)
    h = int(np.ceil(count / w))
    if h > p:
        h = p
        w = int(np.ceil(count / h))
    return h, w


def _smooth_texture(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Low-frequency noise: a coarse Gaussian grid, bilinearly upsampled."""
    ch, cw = max(2, h // 4 + 1), max(2, w // 4 + 1)
    grid = rng.standard_normal((ch, cw))
    rows = np.linspace(0, ch - 1, h)
    cols = np.linspace(0, cw - 1, w)
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    r1 = np.minimum(r0 + 1, ch - 1)
    c1 = np.minimum(c0 + 1, cw - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    return (
        grid[np.ix_(r0, c0)] * (1 - fr) * (1 - fc)
        + grid[np.ix_(r1, c0)] * fr * (1 - fc)
        + grid[np.ix_(r0, c1)] * (1 - fr) * fc
        + grid[np.ix_(r1, c1)] * fr * fc
    )


def occlude(mset: MatrixFeatureSet, spec: OcclusionSpec) -> MatrixFeatureSet:
    """Overwrite a seeded near-square region of every map with the fill.

    Exactly ``ceil(fraction * p * q)`` entries change per map (assuming the
    fill differs from the data there); nothing outside the region is touched.
    """
    p, q = mset.p, mset.q
    count = int(np.ceil(spec.fraction * p * q))
    if count == 0:
        return mset
    h, w = _patch_geometry(p, q, count)
    out = []
    for i, m in enumerate(mset.maps):
        rng = np.random.default_rng(
            np.random.SeedSequence((spec.seed, _OCCLUSION_SALT, i))
        )
        r0 = int(rng.integers(0, p - h + 1))
        c0 = int(rng.integers(0, q - w + 1))
        if spec.fill == "constant":
            fill = np.full((h, w), spec.fill_value)
        else:
            fill = spec.amplitude * _smooth_texture(h, w, rng)
        corrupted = m.copy()
        block = corrupted[r0 : r0 + h, c0 : c0 + w]
        mask = (np.arange(h)[:, None] * w + np.arange(w)[None, :]) < count
        block[mask] = fill[mask]
        out.append(corrupted)
    return MatrixFeatureSet(out)
