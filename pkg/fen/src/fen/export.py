"""Export per-stage feature sets for the recognition pipeline.

Every image yields one FSET file per stage (n=32 maps at the stage's spatial
size) plus one for the fused block; manifests group them into galleries and
probes the recognition CLI can consume directly.
"""

from __future__ import annotations

import os

import torch

from .config import FenConfig
from .data import make_pair
from .fsetio import write_fset, write_manifest

STAGE_IDS = ("stage1", "stage2", "stage3", "stage4", "fused")


def export_stage_features(model, image: torch.Tensor, out_dir, prefix: str):
    """Write the 4 stage files plus the fused file for one image.

    Returns {stage_id: relative path}.  ``image`` is (1, H, W).
    """
    model.eval()
    with torch.no_grad():
        _, stages, fused = model(image[None])
    tensors = list(stages) + [fused]
    paths = {}
    for sid, t in zip(STAGE_IDS, tensors):
        rel = f"{sid}/{prefix}.fset"
        full = os.path.join(out_dir, rel)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        write_fset(t[0].numpy(), full, dtype="f4")
        paths[sid] = rel
    return paths


def export_corpus(model, config: FenConfig, out_dir,
                  gallery_per_class: int = 6, probes_per_class: int = 4,
                  validation_per_class: int = 0):
    """Export HR gallery and LR probe feature sets with manifests.

    Gallery entries come from HR images (indices below gallery_per_class),
    probes and validation sets from LR images on fresh sample indices,
    mirroring the high-resolution-gallery / low-resolution-probe matching
    setting.
    """
    gallery = {sid: [] for sid in STAGE_IDS}
    probes = {sid: [] for sid in STAGE_IDS}
    validation = {sid: [] for sid in STAGE_IDS}
    for c in range(config.num_classes):
        gal_files = {sid: [] for sid in STAGE_IDS}
        probe_files = {sid: [] for sid in STAGE_IDS}
        val_files = {sid: [] for sid in STAGE_IDS}
        for s in range(gallery_per_class):
            hr, _ = make_pair(config, c, s)
            paths = export_stage_features(model, hr, out_dir, f"gallery_c{c:03d}_{s:03d}")
            for sid, rel in paths.items():
                gal_files[sid].append(rel)
        for s in range(probes_per_class):
            _, lr = make_pair(config, c, 1000 + s)
            paths = export_stage_features(model, lr, out_dir, f"probe_c{c:03d}_{s:03d}")
            for sid, rel in paths.items():
                probe_files[sid].append(rel)
        for s in range(validation_per_class):
            _, lr = make_pair(config, c, 2000 + s)
            paths = export_stage_features(model, lr, out_dir, f"val_c{c:03d}_{s:03d}")
            for sid, rel in paths.items():
                val_files[sid].append(rel)
        for sid in STAGE_IDS:
            gallery[sid].append(
                {"label": c, "name": f"identity-{c}", "files": gal_files[sid]}
            )
            probes[sid].append(
                {"label": c, "name": f"identity-{c}", "files": probe_files[sid]}
            )
            if validation_per_class:
                validation[sid].append(
                    {"label": c, "name": f"identity-{c}", "files": val_files[sid]}
                )
    write_manifest(gallery, os.path.join(out_dir, "gallery_manifest.json"))
    write_manifest(probes, os.path.join(out_dir, "probe_manifest.json"))
    if validation_per_class:
        write_manifest(validation, os.path.join(out_dir, "validation_manifest.json"))
