import json
import subprocess
import sys

import pytest

from setrep.cli import ExperimentConfig, run
from setrep.errors import ConfigError
from setrep.matrix_solver import MatrixCRParams
from setrep.vector_solver import VectorCRParams

BASE_SYNTH = {
    "num_classes": 5,
    "maps_per_class": 3,
    "query_maps": 2,
    "validation_per_class": 6,
    "probes_per_class": 8,
    "stages": [
        {"id": "stage1", "p": 8, "q": 8, "noise_sigma": 2.6, "separation": 1.0},
        {"id": "stage2", "p": 8, "q": 8, "noise_sigma": 1.8, "separation": 1.0},
        {"id": "stage3", "p": 8, "q": 8, "noise_sigma": 1.2, "separation": 1.0},
        {"id": "stage4", "p": 8, "q": 8, "noise_sigma": 0.4, "separation": 1.0},
    ],
}


def write_config(tmp_path, **overrides):
    doc = {
        "solver": "vector",
        "lambda1": 1e-2,
        "lambda2": 1e-2,
        "tau": 0.01,
        "seed": 11,
        "synth": BASE_SYNTH,
    }
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """One synthesized corpus with trained weights, shared across CLI tests."""
    tmp_path = tmp_path_factory.mktemp("corpus")
    config = write_config(tmp_path)
    out = str(tmp_path / "data")
    assert run(["synth", "--config", config, "--out", out]) == 0
    weights = str(tmp_path / "weights.json")
    rc = run([
        "fuse-train", "--config", config,
        "--manifest", f"{out}/gallery_manifest.json",
        "--validation", f"{out}/validation_manifest.json",
        "--out", weights,
    ])
    assert rc == 0
    return {"config": config, "out": out, "weights": weights, "tmp": tmp_path}


class TestSynth:
    def test_file_count_is_classes_times_maps(self, corpus):
        import os

        stage_dir = os.path.join(corpus["out"], "stage1")
        gallery_files = [f for f in os.listdir(stage_dir) if f.startswith("gallery")]
        assert len(gallery_files) == 5 * 3
        probe_files = [f for f in os.listdir(stage_dir) if f.startswith("probe")]
        assert len(probe_files) == 5 * 8

    def test_determinism_bit_identical(self, corpus, tmp_path):
        import filecmp
        import os

        out2 = str(tmp_path / "data2")
        assert run(["synth", "--config", corpus["config"], "--out", out2]) == 0
        for sub in ("gallery_manifest.json", "probe_manifest.json",
                    "stage1/gallery_c000_m00.fset", "stage4/probe_c004_007.fset"):
            assert filecmp.cmp(
                os.path.join(corpus["out"], sub), os.path.join(out2, sub), shallow=False
            )


class TestEval:
    def test_stage_ladder_and_fusion(self, corpus, tmp_path):
        report = str(tmp_path / "report.jsonl")
        rc = run([
            "eval", "--config", corpus["config"],
            "--manifest", f"{corpus['out']}/gallery_manifest.json",
            "--probes", f"{corpus['out']}/probe_manifest.json",
            "--weights", corpus["weights"],
            "--out", report,
        ])
        assert rc == 0
        rows = [json.loads(line) for line in open(report)]
        accs = [r["accuracy"] for r in rows if r["kind"] == "stage_accuracy"]
        fused = [r["accuracy"] for r in rows if r["kind"] == "fused_accuracy"]
        assert len(accs) == 4 and len(fused) == 1
        for earlier, later in zip(accs, accs[1:]):
            assert later >= earlier - 0.05  # expected increasing ladder
        assert fused[0] >= max(accs) - 0.05

    def test_report_regenerates_bit_identically(self, corpus, tmp_path):
        args = [
            "eval", "--config", corpus["config"],
            "--manifest", f"{corpus['out']}/gallery_manifest.json",
            "--probes", f"{corpus['out']}/probe_manifest.json",
        ]
        r1, r2 = str(tmp_path / "r1.jsonl"), str(tmp_path / "r2.jsonl")
        assert run(args + ["--out", r1]) == 0
        assert run(args + ["--out", r2]) == 0
        assert open(r1).read() == open(r2).read()


class TestClassify:
    def test_single_stage_single_class(self, tmp_path):
        config = write_config(
            tmp_path,
            synth={
                "num_classes": 1,
                "maps_per_class": 3,
                "query_maps": 2,
                "probes_per_class": 1,
                "stages": [{"id": "only", "p": 6, "q": 6, "noise_sigma": 0.2}],
            },
        )
        out = str(tmp_path / "data")
        assert run(["synth", "--config", config, "--out", out]) == 0
        rc = run([
            "classify", "--config", config,
            "--manifest", f"{out}/gallery_manifest.json",
            "--query", f"only={out}/only/probe_c000_000.fset",
            "--out", str(tmp_path / "decision.jsonl"),
        ])
        assert rc == 0
        rows = [json.loads(l) for l in open(tmp_path / "decision.jsonl")]
        assert rows[0]["label"] == 0
        assert rows[0]["margin"] is None or rows[0]["margin"] > 0  # inf serializes oddly

    def test_fused_decision_follows_informative_stage(self, corpus):
        # probe from class 3: stage4 is reliable, fused must agree with truth
        rc = run([
            "classify", "--config", corpus["config"],
            "--manifest", f"{corpus['out']}/gallery_manifest.json",
            "--query", f"stage1={corpus['out']}/stage1/probe_c003_000.fset",
            "--query", f"stage2={corpus['out']}/stage2/probe_c003_000.fset",
            "--query", f"stage3={corpus['out']}/stage3/probe_c003_000.fset",
            "--query", f"stage4={corpus['out']}/stage4/probe_c003_000.fset",
            "--weights", corpus["weights"], "--fuse",
            "--out", str(corpus["tmp"] / "fused.jsonl"),
        ])
        assert rc == 0
        rows = [json.loads(l) for l in open(corpus["tmp"] / "fused.jsonl")]
        fused = [r for r in rows if r["kind"] == "fused_decision"]
        assert fused[0]["label"] == 3

    def test_fuse_without_weights_fails_with_config_exit_code(self, corpus):
        proc = subprocess.run(
            [sys.executable, "-m", "setrep.cli", "classify",
             "--config", corpus["config"],
             "--manifest", f"{corpus['out']}/gallery_manifest.json",
             "--query", f"stage1={corpus['out']}/stage1/probe_c000_000.fset",
             "--fuse"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
        assert "weights" in proc.stderr


class TestExperimentConfig:
    def test_stage_overrides_apply_per_stage(self):
        config = ExperimentConfig(
            solver="vector", lambda1=0.5, lambda2=0.5,
            stage_overrides={"stage4": {"lambda1": 0.001}},
        )
        base = config.params_for("stage1")
        tuned = config.params_for("stage4")
        assert isinstance(base, VectorCRParams)
        assert base.lambda1 == 0.5
        assert tuned.lambda1 == 0.001
        assert tuned.lambda2 == 0.5

    def test_matrix_params_carry_admm_knobs(self):
        config = ExperimentConfig(solver="matrix", mu=2.0, epsilon=1e-5, max_iter=99)
        params = config.params_for("s")
        assert isinstance(params, MatrixCRParams)
        assert (params.mu, params.epsilon, params.max_iter) == (2.0, 1e-5, 99)

    def test_unknown_override_key_rejected(self):
        config = ExperimentConfig(stage_overrides={"s": {"lambda9": 1.0}})
        with pytest.raises(ConfigError, match="override"):
            config.params_for("s")


class TestExitCodes:
    def test_missing_manifest_is_io_error(self, corpus):
        proc = subprocess.run(
            [sys.executable, "-m", "setrep.cli", "eval",
             "--config", corpus["config"],
             "--manifest", "/nonexistent/m.json",
             "--probes", f"{corpus['out']}/probe_manifest.json"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 3

    def test_malformed_fset_is_format_error(self, corpus, tmp_path):
        bad = tmp_path / "bad.fset"
        bad.write_bytes(b"FSEXgarbage" + b"\x00" * 32)
        proc = subprocess.run(
            [sys.executable, "-m", "setrep.cli", "classify",
             "--config", corpus["config"],
             "--manifest", f"{corpus['out']}/gallery_manifest.json",
             "--query", f"stage1={bad}"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 4

    def test_bad_config_key_is_config_error(self, corpus, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"solverr": "vector"}))
        proc = subprocess.run(
            [sys.executable, "-m", "setrep.cli", "synth",
             "--config", str(cfg), "--out", str(tmp_path / "d")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
