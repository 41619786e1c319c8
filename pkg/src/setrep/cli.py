"""Command-line harness: synth, classify, fuse-train, and eval.

Every subcommand takes ``--config <json>`` plus ``--seed`` / ``--out``
overrides.  Reports are deterministic (aligned text on stdout, JSONL rows to
``--out``): rerunning with the same inputs, seeds, and config regenerates
them byte for byte.  Errors map to distinct exit codes by failure class:
2 config, 3 I/O, 4 format, 5 solver divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .classify import classify
from .errors import (
    ConfigError,
    DataIOError,
    ManifestError,
    MissingWeightsError,
    SetrepError,
)
from .fileio import (
    GALLERY_SCHEMA,
    GalleryManifest,
    load_manifest,
    load_stage_gallery,
    load_weights,
    read_fset,
    save_manifest,
    save_weights,
    write_fset,
)
from .fusion import PredictionTable, build_decision_matrix, fuse, learn_scale_weights
from .matrix_solver import MatrixCRParams
from .sets import to_vector_form
from .synth import SynthConfig, gen_gallery, gen_query
from .vector_solver import VectorCRParams


@dataclass
class ExperimentConfig:
    """Solver and fusion settings shared by the harness commands."""

    solver: str = "vector"
    lambda1: float = 1e-3
    lambda2: float = 1e-3
    mu: float = 1.0
    epsilon: float = 1e-6
    max_iter: int = 500
    tau: float = 0.01
    stages: list = field(default_factory=list)
    seed: int = 0
    stage_overrides: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        if path is None:
            return ExperimentConfig()
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise DataIOError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        known = set(ExperimentConfig.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        if doc.get("solver", "vector") not in ("vector", "matrix"):
            raise ConfigError(f"{path}: solver must be 'vector' or 'matrix'")
        return ExperimentConfig(**doc)

    def params_for(self, stage_id: str):
        merged = {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "mu": self.mu,
            "epsilon": self.epsilon,
            "max_iter": self.max_iter,
        }
        override = self.stage_overrides.get(stage_id, {})
        unknown = set(override) - set(merged)
        if unknown:
            raise ConfigError(f"stage {stage_id!r}: unknown override keys {sorted(unknown)}")
        merged.update(override)
        if self.solver == "vector":
            return VectorCRParams(lambda1=merged["lambda1"], lambda2=merged["lambda2"])
        return MatrixCRParams(**merged)


def _query_for_solver(fset, solver: str):
    if solver == "vector" and not hasattr(fset, "data"):
        return to_vector_form(fset)
    if solver == "matrix" and hasattr(fset, "data"):
        raise ConfigError("matrix solver needs matrix-form sets (q > 1 in FSET files)")
    return fset


def _stage_ids(config: ExperimentConfig, manifest: GalleryManifest):
    ids = config.stages or manifest.stage_ids()
    for sid in ids:
        manifest.stage(sid)  # raises on unknown stage
    return ids


def _emit(text_lines, rows, out_path):
    print("\n".join(text_lines))
    if out_path:
        try:
            with open(out_path, "w", encoding="utf-8") as fh:
                for row in rows:
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
        except OSError as exc:
            raise DataIOError(f"cannot write {out_path}: {exc}") from exc


# ---------------------------------------------------------------- synth

def _synth_stage_config(stage_doc, common, seed, stage_index):
    # distinct derived seed per stage: stages are different feature layers,
    # not copies of each other
    return SynthConfig(
        num_classes=common["num_classes"],
        maps_per_class=common["maps_per_class"],
        p=stage_doc["p"],
        q=stage_doc.get("q", 1),
        noise_sigma=stage_doc.get("noise_sigma", 0.1),
        separation=stage_doc.get("separation", 1.0),
        seed=seed + 7919 * stage_index,
    )


def cmd_synth(config: ExperimentConfig, out_dir: str):
    """Generate per-stage gallery/validation/probe FSET files and manifests."""
    sdoc = config.synth
    if not sdoc:
        raise ConfigError("synth command needs a 'synth' section in the config")
    for key in ("num_classes", "maps_per_class", "stages"):
        if key not in sdoc:
            raise ConfigError(f"synth config missing {key!r}")
    query_maps = int(sdoc.get("query_maps", 3))
    n_validation = int(sdoc.get("validation_per_class", 0))
    n_probes = int(sdoc.get("probes_per_class", 5))
    os.makedirs(out_dir, exist_ok=True)

    gallery_stages, val_stages, probe_stages = [], [], []
    for stage_index, stage_doc in enumerate(sdoc["stages"]):
        sid = stage_doc["id"]
        cfg = _synth_stage_config(stage_doc, sdoc, config.seed, stage_index)
        stage_gallery, _ = gen_gallery(cfg)
        stage_dir = os.path.join(out_dir, sid)
        os.makedirs(stage_dir, exist_ok=True)
        gal_classes = []
        for label, mset in zip(stage_gallery.labels, stage_gallery.sets):
            files = []
            for j, m in enumerate(mset.maps):
                rel = f"{sid}/gallery_c{label:03d}_m{j:02d}.fset"
                write_fset(
                    type(mset)([m]), os.path.join(out_dir, rel)
                )
                files.append(rel)
            gal_classes.append({"label": label, "name": f"identity-{label}", "files": files})
        gallery_stages.append({"id": sid, "classes": gal_classes})

        for kind, count, acc in (
            ("validation", n_validation, val_stages),
            ("probe", n_probes, probe_stages),
        ):
            if count == 0:
                continue
            stage_classes = []
            for label in range(cfg.num_classes):
                files = []
                for i in range(count):
                    index = i if kind == "probe" else 10_000 + i
                    qset = gen_query(cfg, label, query_maps, index=index)
                    rel = f"{sid}/{kind}_c{label:03d}_{i:03d}.fset"
                    write_fset(qset, os.path.join(out_dir, rel))
                    files.append(rel)
                stage_classes.append({"label": label, "name": f"identity-{label}", "files": files})
            acc.append({"id": sid, "classes": stage_classes})

    save_manifest({"schema": GALLERY_SCHEMA, "stages": gallery_stages},
                  os.path.join(out_dir, "gallery_manifest.json"))
    if val_stages:
        save_manifest({"schema": GALLERY_SCHEMA, "stages": val_stages},
                      os.path.join(out_dir, "validation_manifest.json"))
    save_manifest({"schema": GALLERY_SCHEMA, "stages": probe_stages},
                  os.path.join(out_dir, "probe_manifest.json"))
    print(f"synthesized {len(sdoc['stages'])} stages in {out_dir}")
    return 0


# ------------------------------------------------------------- classify

def cmd_classify(config, manifest_path, query_specs, weights_path, do_fuse, out_path):
    """Per-stage decisions for one query, optionally fused."""
    manifest = load_manifest(manifest_path)
    queries = {}
    for spec in query_specs:
        if "=" not in spec:
            raise ConfigError(f"--query expects STAGE=PATH, got {spec!r}")
        sid, path = spec.split("=", 1)
        queries[sid] = path
    stage_ids = config.stages or sorted(queries)
    missing = [s for s in stage_ids if s not in queries]
    if missing:
        raise ManifestError(f"no query file for stages {missing}")
    unknown = [s for s in queries if s not in manifest.stage_ids()]
    if unknown:
        raise ManifestError(f"query stages {unknown} not in manifest {manifest.stage_ids()}")

    weights = stage_order = None
    if do_fuse:
        if not weights_path:
            raise MissingWeightsError("--fuse requires --weights <file>")
        weights, stage_order = load_weights(weights_path)
        if set(stage_order) != set(stage_ids):
            raise ManifestError(
                f"weights stages {stage_order} do not match requested stages {stage_ids}"
            )

    form = "vector" if config.solver == "vector" else "matrix"
    rows, lines = [], []
    lines.append(f"{'stage':<12} {'label':>6} {'margin':>12}")
    decisions = {}
    for sid in stage_ids:
        gallery = load_stage_gallery(manifest, sid, form=form)
        qset = _query_for_solver(read_fset(queries[sid]), config.solver)
        decision = classify(qset, gallery, config.solver, config.params_for(sid))
        decisions[sid] = decision
        lines.append(f"{sid:<12} {decision.label:>6} {decision.margin:>12.4e}")
        rows.append({
            "kind": "stage_decision",
            "stage": sid,
            "label": decision.label,
            "margin": decision.margin,
            "labels": list(decision.labels),
            "residuals": [float(r) for r in decision.residuals],
        })
    if do_fuse:
        preds = [decisions[sid].label for sid in stage_order]
        fused = fuse(np.array(preds), weights)
        lines.append(f"{'fused':<12} {fused:>6}")
        rows.append({"kind": "fused_decision", "label": fused, "stages": stage_order})
    _emit(lines, rows, out_path)
    return 0


# ------------------------------------------------------- probe iteration

def _aligned_probes(manifest: GalleryManifest, stage_ids):
    """Yield (true_label, {stage: file_path}) with cross-stage consistency checks."""
    base = manifest.stage(stage_ids[0])
    layout = [(cl.label, len(cl.files)) for cl in base.classes]
    for sid in stage_ids[1:]:
        st = manifest.stage(sid)
        if [(cl.label, len(cl.files)) for cl in st.classes] != layout:
            raise ManifestError(
                f"stage {sid!r} probe layout differs from {stage_ids[0]!r} "
                "(label set or file counts mismatch)"
            )
    probes = []
    for ci, (label, count) in enumerate(layout):
        for fi in range(count):
            probes.append(
                (label, {sid: manifest.stage(sid).classes[ci].files[fi] for sid in stage_ids})
            )
    return probes


def _predict_stage_table(config, gallery_manifest, probe_manifest, stage_ids):
    """Classify every probe at every stage; returns (h, z) arrays."""
    form = "vector" if config.solver == "vector" else "matrix"
    probes = _aligned_probes(probe_manifest, stage_ids)
    galleries = {sid: load_stage_gallery(gallery_manifest, sid, form=form) for sid in stage_ids}
    gal_labels = set(galleries[stage_ids[0]].labels)
    probe_labels = {label for label, _ in probes}
    if not probe_labels <= gal_labels:
        raise ManifestError(
            f"probe labels {sorted(probe_labels - gal_labels)} missing from gallery"
        )
    h = np.zeros((len(probes), len(stage_ids)), dtype=np.int64)
    z = np.zeros(len(probes), dtype=np.int64)
    for i, (label, files) in enumerate(probes):
        z[i] = label
        for j, sid in enumerate(stage_ids):
            qset = _query_for_solver(
                read_fset(os.path.join(probe_manifest.base_dir, files[sid])),
                config.solver,
            )
            h[i, j] = classify(qset, galleries[sid], config.solver, config.params_for(sid)).label
    return h, z


# ------------------------------------------------------------ fuse-train

def cmd_fuse_train(config, manifest_path, validation_path, out_path):
    """Learn stage weights from per-stage decisions on a validation set."""
    manifest = load_manifest(manifest_path)
    validation = load_manifest(validation_path)
    stage_ids = _stage_ids(config, manifest)
    h, z = _predict_stage_table(config, manifest, validation, stage_ids)
    if h.shape[0] == 0:
        raise ManifestError("validation set is empty")
    table = PredictionTable(h=h, z=z)
    weights = learn_scale_weights(build_decision_matrix(table), config.tau)
    save_weights(weights, stage_ids, out_path)
    sigma_txt = " ".join(f"{v:.6f}" for v in weights.sigma)
    print(f"learned weights [{sigma_txt}] for stages {stage_ids} -> {out_path}")
    return 0


# ------------------------------------------------------------------ eval

def cmd_eval(config, manifest_path, probes_path, weights_path, out_path):
    """Per-stage and fused accuracy over a labeled probe manifest."""
    manifest = load_manifest(manifest_path)
    probes = load_manifest(probes_path)
    stage_ids = _stage_ids(config, manifest)
    h, z = _predict_stage_table(config, manifest, probes, stage_ids)

    rows, lines = [], []
    lines.append(f"{'stage':<12} {'accuracy':>9} {'correct':>8} {'total':>6}")
    for j, sid in enumerate(stage_ids):
        correct = int(np.sum(h[:, j] == z))
        acc = correct / len(z)
        lines.append(f"{sid:<12} {acc:>9.4f} {correct:>8} {len(z):>6}")
        rows.append({
            "kind": "stage_accuracy",
            "stage": sid,
            "accuracy": acc,
            "correct": correct,
            "total": len(z),
        })
    if weights_path:
        weights, stage_order = load_weights(weights_path)
        if set(stage_order) != set(stage_ids):
            raise ManifestError(
                f"weights stages {stage_order} do not match eval stages {stage_ids}"
            )
        cols = [stage_ids.index(sid) for sid in stage_order]
        fused_preds = np.array([fuse(row[cols], weights) for row in h])
        correct = int(np.sum(fused_preds == z))
        acc = correct / len(z)
        lines.append(f"{'fused':<12} {acc:>9.4f} {correct:>8} {len(z):>6}")
        rows.append({
            "kind": "fused_accuracy",
            "accuracy": acc,
            "correct": correct,
            "total": len(z),
            "stages": stage_order,
        })
    _emit(lines, rows, out_path)
    return 0


# ------------------------------------------------------------------ main

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="setrep",
        description="Set-based collaborative representation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config JSON")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output path")

    sp = sub.add_parser("synth", help="generate a synthetic multi-stage corpus")
    common(sp)

    sp = sub.add_parser("classify", help="classify one query across stages")
    common(sp)
    sp.add_argument("--manifest", required=True, help="gallery manifest JSON")
    sp.add_argument("--query", action="append", default=[], metavar="STAGE=PATH",
                    help="query FSET file for a stage (repeatable)")
    sp.add_argument("--weights", help="scale weights JSON")
    sp.add_argument("--fuse", action="store_true", help="fuse stage decisions")

    sp = sub.add_parser("fuse-train", help="learn stage weights on a validation set")
    common(sp)
    sp.add_argument("--manifest", required=True, help="gallery manifest JSON")
    sp.add_argument("--validation", required=True, help="validation probe manifest JSON")

    sp = sub.add_parser("eval", help="accuracy table over labeled probes")
    common(sp)
    sp.add_argument("--manifest", required=True, help="gallery manifest JSON")
    sp.add_argument("--probes", required=True, help="probe manifest JSON")
    sp.add_argument("--weights", help="scale weights JSON (enables fused accuracy)")

    return parser


def run(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be nonnegative, got {args.seed}")
        config.seed = args.seed

    if args.command == "synth":
        if not args.out:
            raise ConfigError("synth requires --out <directory>")
        return cmd_synth(config, args.out)
    if args.command == "classify":
        return cmd_classify(config, args.manifest, args.query,
                            args.weights, args.fuse, args.out)
    if args.command == "fuse-train":
        if not args.out:
            raise ConfigError("fuse-train requires --out <weights file>")
        return cmd_fuse_train(config, args.manifest, args.validation, args.out)
    if args.command == "eval":
        return cmd_eval(config, args.manifest, args.probes, args.weights, args.out)
    raise ConfigError(f"unknown command {args.command!r}")


def main() -> None:
    try:
        sys.exit(run())
    except SetrepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(exc.exit_code)


if __name__ == "__main__":
    main()
