"""On-disk formats: the FSET binary container, manifests, and weight files.

FSET layout (fixed little-endian, self-describing):

    offset  size  field
    0       4     magic  b"FSET"
    4       1     version, currently 1
    5       1     dtype code: 0 = float32, 1 = float64
    6       2     reserved, must be zero
    8       4     p (rows per map, u32)
    12      4     q (columns per map, u32)
    16      4     n (number of maps, u32)
    20      ...   payload: n maps, each p*q values column-major, consecutive

Vector-form sets are stored with p = d, q = 1.  The payload length must be
exactly n*p*q elements; every way a file can be malformed raises its own
exception class so callers (and the CLI's exit codes) can tell them apart.

Manifests and weight files are JSON documents with a ``schema`` tag; floats
round-trip exactly because they are serialized via ``repr``.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataIOError,
    FsetDimensionError,
    FsetDtypeError,
    FsetHeaderError,
    FsetLengthError,
    FsetMagicError,
    FsetVersionError,
    ManifestError,
    ValidationError,
)
from .fusion import ScaleWeights
from .sets import FeatureSet, Gallery, MatrixFeatureSet, concat_gallery

_MAGIC = b"FSET"
_VERSION = 1
_HEADER = struct.Struct("<4sBBHIII")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}

GALLERY_SCHEMA = "setrep-gallery-manifest/1"
WEIGHTS_SCHEMA = "setrep-scale-weights/1"


def write_fset(fset, path) -> None:
    """Serialize a feature set; the round trip back is bit-exact."""
    if isinstance(fset, FeatureSet):
        p, q, n = fset.d, 1, fset.n
        cols = fset.data
        dtype = fset.data.dtype
    elif isinstance(fset, MatrixFeatureSet):
        p, q, n = fset.p, fset.q, fset.n
        cols = fset.vec_matrix()
        dtype = fset.maps[0].dtype
    else:
        raise ValidationError(f"not a feature set: {type(fset).__name__}")
    code = _DTYPE_CODES[np.dtype(dtype)]
    header = _HEADER.pack(_MAGIC, _VERSION, code, 0, p, q, n)
    payload = np.asfortranarray(cols).astype(_DTYPES[code], copy=False)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.tobytes(order="F"))
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def read_fset(path):
    """Parse an FSET file into a feature set.

    Files with q == 1 come back as :class:`FeatureSet`, anything else as
    :class:`MatrixFeatureSet`.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc

    if len(raw) < _HEADER.size:
        raise FsetHeaderError(f"{path}: header truncated ({len(raw)} bytes)")
    magic, version, code, reserved, p, q, n = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise FsetMagicError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise FsetVersionError(f"{path}: unsupported version {version}")
    if code not in _DTYPES:
        raise FsetDtypeError(f"{path}: unknown dtype code {code}")
    if reserved != 0:
        raise FsetHeaderError(f"{path}: reserved bytes nonzero ({reserved})")
    if min(p, q, n) < 1:
        raise FsetDimensionError(f"{path}: zero dimension p={p} q={q} n={n}")

    dtype = _DTYPES[code]
    expected = _HEADER.size + n * p * q * dtype.itemsize
    if len(raw) < expected:
        raise FsetLengthError(
            f"{path}: payload truncated ({len(raw)} bytes, expected {expected})"
        )
    if len(raw) > expected:
        raise FsetLengthError(
            f"{path}: trailing bytes ({len(raw)} bytes, expected {expected})"
        )
    flat = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    cols = flat.reshape((p * q, n), order="F")
    if q == 1:
        return FeatureSet(cols)
    return MatrixFeatureSet(
        [cols[:, j].reshape(p, q, order="F") for j in range(n)]
    )


def _require(cond, path, msg):
    if not cond:
        raise ManifestError(f"{path}: {msg}")


@dataclass(frozen=True)
class ManifestClass:
    label: int
    name: str
    files: tuple


@dataclass(frozen=True)
class ManifestStage:
    id: str
    classes: tuple


@dataclass(frozen=True)
class GalleryManifest:
    """Stage list with per-class labels, display names, and FSET paths."""

    stages: tuple
    base_dir: str

    def stage_ids(self):
        return [s.id for s in self.stages]

    def stage(self, stage_id: str) -> ManifestStage:
        for s in self.stages:
            if s.id == stage_id:
                return s
        raise ManifestError(f"unknown stage {stage_id!r}; have {self.stage_ids()}")


def load_manifest(path) -> GalleryManifest:
    """Load and structurally validate a gallery or probe manifest."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc

    _require(isinstance(doc, dict), path, "document must be a JSON object")
    _require(doc.get("schema") == GALLERY_SCHEMA, path,
             f"schema must be {GALLERY_SCHEMA!r}, got {doc.get('schema')!r}")
    _require(isinstance(doc.get("stages"), list) and doc["stages"], path,
             "stages must be a nonempty list")
    stages = []
    for st in doc["stages"]:
        _require(isinstance(st.get("id"), str), path, "stage id must be a string")
        _require(isinstance(st.get("classes"), list) and st["classes"], path,
                 f"stage {st.get('id')!r}: classes must be a nonempty list")
        classes = []
        labels = set()
        for cl in st["classes"]:
            _require(isinstance(cl.get("label"), int), path, "class label must be an integer")
            _require(cl["label"] not in labels, path,
                     f"stage {st['id']!r}: duplicate label {cl['label']}")
            labels.add(cl["label"])
            files = cl.get("files")
            _require(isinstance(files, list) and files, path,
                     f"label {cl['label']}: files must be a nonempty list")
            classes.append(ManifestClass(
                label=cl["label"],
                name=str(cl.get("name", f"class-{cl['label']}")),
                files=tuple(files),
            ))
        stages.append(ManifestStage(id=st["id"], classes=tuple(classes)))
    ids = [s.id for s in stages]
    _require(len(set(ids)) == len(ids), path, f"duplicate stage ids: {ids}")
    return GalleryManifest(stages=tuple(stages), base_dir=os.path.dirname(os.path.abspath(path)))


def save_manifest(manifest_doc: dict, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest_doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def _resolve(base_dir: str, rel: str) -> str:
    return rel if os.path.isabs(rel) else os.path.join(base_dir, rel)


def load_stage_gallery(manifest: GalleryManifest, stage_id: str, form: str = "auto") -> Gallery:
    """Read every class of one stage and concatenate into a gallery.

    ``form`` forces 'vector' or 'matrix' sets; 'auto' keeps whatever the
    files contain (q == 1 loads as vector sets).
    """
    stage = manifest.stage(stage_id)
    classes = []
    for cl in stage.classes:
        sets = [read_fset(_resolve(manifest.base_dir, f)) for f in cl.files]
        sets = [_coerce_form(s, form) for s in sets]
        if isinstance(sets[0], FeatureSet):
            joined = FeatureSet(np.hstack([s.data for s in sets]))
        else:
            joined = MatrixFeatureSet([m for s in sets for m in s.maps])
        classes.append((cl.label, joined))
    return concat_gallery(classes)


def _coerce_form(fset, form: str):
    if form == "auto":
        return fset
    if form == "vector":
        if isinstance(fset, FeatureSet):
            return fset
        return FeatureSet(fset.vec_matrix())
    if form == "matrix":
        if isinstance(fset, MatrixFeatureSet):
            return fset
        return MatrixFeatureSet([fset.data[:, j].reshape(-1, 1) for j in range(fset.n)])
    raise ManifestError(f"unknown form {form!r}")


def save_weights(weights: ScaleWeights, stage_ids, path) -> None:
    """Persist learned stage weights as JSON with exact float round-trip."""
    doc = {
        "schema": WEIGHTS_SCHEMA,
        "tau": weights.tau,
        "stages": list(stage_ids),
        "sigma": [float(v) for v in weights.sigma],
    }
    save_manifest(doc, path)


def load_weights(path):
    """Load stage weights; returns (ScaleWeights, stage_ids)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc
    _require(doc.get("schema") == WEIGHTS_SCHEMA, path,
             f"schema must be {WEIGHTS_SCHEMA!r}, got {doc.get('schema')!r}")
    _require(isinstance(doc.get("sigma"), list) and doc["sigma"], path,
             "sigma must be a nonempty list")
    _require(isinstance(doc.get("stages"), list), path, "stages must be a list")
    _require(len(doc["stages"]) == len(doc["sigma"]), path,
             "stages and sigma must have equal length")
    weights = ScaleWeights(sigma=np.array(doc["sigma"], dtype=np.float64),
                           tau=float(doc.get("tau", 0.0)))
    return weights, [str(s) for s in doc["stages"]]
