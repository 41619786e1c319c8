"""Writer for the FSET feature-set container consumed by the recognition CLI.

Byte layout (little-endian): magic b"FSET", version u8=1, dtype u8 (0=f32,
1=f64), reserved u16=0, then p, q, n as u32, then n maps of p*q values each,
column-major, consecutive.  This is an independent implementation of the
documented interchange format; compatibility is covered by a golden test
against the consumer.
"""

from __future__ import annotations

import json
import struct

import numpy as np

_HEADER = struct.Struct("<4sBBHIII")
GALLERY_SCHEMA = "setrep-gallery-manifest/1"


def write_fset(maps: np.ndarray, path, dtype="f4") -> None:
    """Write an (n, p, q) stack of feature maps."""
    maps = np.asarray(maps)
    if maps.ndim != 3:
        raise ValueError(f"expected (n, p, q) maps, got shape {maps.shape}")
    n, p, q = maps.shape
    code = {"f4": 0, "f8": 1}[dtype]
    out_dtype = np.dtype("<" + dtype)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"FSET", 1, code, 0, p, q, n))
        for i in range(n):
            fh.write(maps[i].astype(out_dtype).flatten(order="F").tobytes())


def write_manifest(stages: dict, path) -> None:
    """Gallery/probe manifest: {stage_id: [{label, name, files}, ...]}."""
    doc = {
        "schema": GALLERY_SCHEMA,
        "stages": [
            {"id": sid, "classes": classes} for sid, classes in stages.items()
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
