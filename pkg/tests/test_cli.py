import json
import math
from pathlib import Path

import pytest

from cli.config import RunConfig, load_run_config
from cli.main import main
from inference.export import read_export
from network.checkpoint import load_checkpoint

RUN_CONFIG = {
    "model": {"patches": 8, "patch_size": 4, "proxies": 4, "width": 8, "layers": 1, "heads": 2},
    "data": {"spec": {"primitive_count_range": [6, 6], "type_mix": {"plane": 1.0}, "point_count": 1024},
             "partial_points": 64},
    "evaluation": {"samples": 128},
    "ransac": {"iterations": 10, "min_support": 10},
}


def numeric_leaves(value):
    if isinstance(value, dict):
        for item in value.values():
            yield from numeric_leaves(item)
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        yield value


@pytest.fixture
def config_file(tmp_path) -> str:
    path = tmp_path / "run.json"
    path.write_text(json.dumps(RUN_CONFIG))
    return str(path)


@pytest.fixture
def data_dir(tmp_path, config_file) -> Path:
    out = tmp_path / "data"
    assert main(["generate", "--config", config_file, "--count", "2", "--out", str(out)]) == 0
    return out


class TestConfig:
    def test_defaults(self):
        assert load_run_config() == RunConfig.desk()

    def test_sections_merge_with_preset(self, config_file):
        run = load_run_config(config_file)
        assert run.model.width == 8
        assert run.model.type_count == 5
        assert run.data.ratio == 0.5
        assert run.data.spec.primitive_count_range == (6, 6)
        assert run.evaluation.samples == 128

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"model": {"depth": 3}}))
        with pytest.raises(ValueError):
            load_run_config(path)


class TestGenerate:
    def test_files_and_manifest(self, data_dir):
        assert sorted(p.name for p in data_dir.iterdir()) == ["manifest.json", "shape_0000.lpc", "shape_0001.lpc"]
        manifest = json.loads((data_dir / "manifest.json").read_text())
        assert manifest["count"] == 2
        assert [s["primitives"] for s in manifest["shapes"]] == [6, 6]
        assert [s["seed"] for s in manifest["shapes"]] == [0, 1]

    def test_reproducible(self, data_dir, tmp_path, config_file):
        again = tmp_path / "again"
        assert main(["generate", "--config", config_file, "--count", "2", "--out", str(again)]) == 0
        first = json.loads((data_dir / "manifest.json").read_text())
        second = json.loads((again / "manifest.json").read_text())
        assert first["hash"] == second["hash"]
        assert (data_dir / "shape_0001.lpc").read_bytes() == (again / "shape_0001.lpc").read_bytes()

    def test_invalid_spec(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"primitive_count_range": [1, 1]}))
        assert main(["generate", "--count", "1", "--out", str(tmp_path / "x"), "--spec", str(spec)]) == 2

    def test_nonpositive_count(self, tmp_path):
        assert main(["generate", "--count", "0", "--out", str(tmp_path / "x")]) == 2


class TestEval:
    def test_oracle(self, data_dir, tmp_path, config_file):
        report = tmp_path / "oracle.json"
        assert main(["eval", "--config", config_file, "--oracle", "--data", str(data_dir),
                     "--report", str(report)]) == 0
        summary = json.loads(report.read_text())
        assert summary["cd"] == 0.0
        assert summary["cov"] == 100.0
        assert summary["shapes"] == 2
        lines = report.with_suffix(".shapes.jsonl").read_text().splitlines()
        assert [json.loads(line)["shape"] for line in lines] == ["shape_0000", "shape_0001"]

    def test_ransac_baseline(self, data_dir, tmp_path, config_file):
        report = tmp_path / "ransac.json"
        assert main(["eval", "--config", config_file, "--baseline", "ransac", "--data", str(data_dir),
                     "--report", str(report)]) == 0
        summary = json.loads(report.read_text())
        assert summary["shapes"] == 2
        assert summary["evaluated"] >= 1
        assert all(math.isfinite(v) for v in numeric_leaves(summary))

    def test_missing_data(self, tmp_path):
        assert main(["eval", "--oracle", "--data", str(tmp_path / "none"), "--report", str(tmp_path / "r.json")]) == 2

    def test_needs_a_source(self, data_dir, tmp_path):
        assert main(["eval", "--data", str(data_dir), "--report", str(tmp_path / "r.json")]) == 2


class TestGradcheck:
    def test_passes(self, config_file, tmp_path):
        report = tmp_path / "grad.json"
        assert main(["gradcheck", "--config", config_file, "--seeds", "1", "--samples", "2",
                     "--report", str(report)]) == 0
        assert json.loads(report.read_text())["passed"] is True

    def test_corrupted_layer_fails(self, config_file):
        assert main(["gradcheck", "--config", config_file, "--seeds", "1", "--samples", "2",
                     "--corrupt", "heads.semantic"]) == 1

    def test_unknown_layer(self, config_file):
        assert main(["gradcheck", "--config", config_file, "--seeds", "1", "--corrupt", "nope"]) == 2


class TestTrainAndInfer:
    def test_train_then_infer(self, data_dir, tmp_path, config_file):
        ckpt = tmp_path / "tiny.ckpt"
        assert main(["train", "--config", config_file, "--data", str(data_dir), "--out", str(ckpt),
                     "--steps", "2"]) == 0
        params, state = load_checkpoint(ckpt)
        assert state.step == 2
        assert params.config.width == 8
        steps = [json.loads(line) for line in ckpt.with_suffix(".jsonl").read_text().splitlines()]
        assert [s["step"] for s in steps] == [0, 1]
        manifest = json.loads(ckpt.with_suffix(".manifest.json").read_text())
        assert manifest["final_step"] == 2
        assert manifest["static_targets"] is False
        assert manifest["diagnostics"]["matched"] == 2 * 4
        assert 0.0 <= manifest["diagnostics"]["membership_iou"] <= 1.0

        out = tmp_path / "prims.json"
        assert main(["infer", "--config", config_file, "--model", str(ckpt), "--in", str(data_dir / "shape_0000.lpc"),
                     "--out", str(out), "--threshold", "0.0", "--no-points"]) == 0
        assert all(record.points is None for record in read_export(out))

    def test_resume(self, data_dir, tmp_path, config_file):
        first = tmp_path / "first.ckpt"
        assert main(["train", "--config", config_file, "--data", str(data_dir), "--out", str(first),
                     "--steps", "1"]) == 0
        second = tmp_path / "second.ckpt"
        assert main(["train", "--config", config_file, "--data", str(data_dir), "--out", str(second),
                     "--steps", "1", "--resume", str(first)]) == 0
        assert load_checkpoint(second)[1].step == 2

    def test_missing_checkpoint(self, data_dir, tmp_path):
        assert main(["infer", "--model", str(tmp_path / "none.ckpt"), "--in", str(data_dir / "shape_0000.lpc"),
                     "--out", str(tmp_path / "p.json")]) == 2

    def test_static_targets(self, data_dir, tmp_path, config_file):
        ckpt = tmp_path / "static.ckpt"
        assert main(["train", "--config", config_file, "--data", str(data_dir), "--out", str(ckpt),
                     "--steps", "2", "--static-targets"]) == 0
        manifest = json.loads(ckpt.with_suffix(".manifest.json").read_text())
        assert manifest["static_targets"] is True
        assert manifest["config"]["static_targets"] is False


class TestRobustness:
    def test_ransac_sweeps(self, data_dir, tmp_path, config_file):
        out = tmp_path / "sweep"
        assert main(["robustness", "--config", config_file, "--baseline", "ransac", "--data", str(data_dir),
                     "--out", str(out), "--ratios", "0.25", "0.75", "--sigmas", "0.01"]) == 0
        names = ["robustness_ratio_0.25.json", "robustness_ratio_0.75.json", "robustness_sigma_0.010.json"]
        assert sorted(p.name for p in out.glob("*.json")) == names
        for name in names:
            summary = json.loads((out / name).read_text())
            assert summary["shapes"] == 2
            assert all(math.isfinite(v) for v in numeric_leaves(summary))
            assert len((out / name).with_suffix(".shapes.jsonl").read_text().splitlines()) == 2

    def test_needs_a_source(self, data_dir, tmp_path):
        assert main(["robustness", "--data", str(data_dir), "--out", str(tmp_path / "sweep")]) == 2
