from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from waterline import Mask, WaterlineParams, load_manifest, save_annotations
from waterline.cli import main
from waterline.stats import AnnotationRecord
from waterline.geometry import StudyGroup


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args):
    return runner.invoke(main, [str(a) for a in args])


@pytest.fixture
def synth_dir(runner, tmp_path) -> Path:
    out = tmp_path / "data"
    result = run(runner, "synth", "--count", 5, "--out", out, "--seed", 4,
                 "--width", 320, "--height", 240)
    assert result.exit_code == 0, result.output
    return out


class TestSynth:
    def test_outputs_exist(self, synth_dir):
        assert (synth_dir / "detection_index.jsonl").exists()
        assert (synth_dir / "truths.jsonl").exists()
        assert len(list((synth_dir / "masks").glob("*.png"))) == 5

    def test_deterministic(self, runner, tmp_path):
        outs = []
        for name in ("d1", "d2"):
            out = tmp_path / name
            assert run(runner, "synth", "--count", 3, "--out", out, "--seed", 9,
                       "--width", 256, "--height", 200).exit_code == 0
            outs.append(out)
        assert (outs[0] / "detection_index.jsonl").read_bytes() == \
               (outs[1] / "detection_index.jsonl").read_bytes()
        assert (outs[0] / "truths.jsonl").read_bytes() == (outs[1] / "truths.jsonl").read_bytes()
        for png in sorted((outs[0] / "masks").glob("*.png")):
            assert png.read_bytes() == (outs[1] / "masks" / png.name).read_bytes()

    def test_truths_embed_config_hash(self, synth_dir):
        rec = json.loads((synth_dir / "truths.jsonl").read_text().splitlines()[0])
        assert len(rec["config_hash"]) == 64


class TestDetect:
    def test_detect_matches_truths(self, runner, synth_dir, tmp_path):
        preds = tmp_path / "preds.jsonl"
        result = run(runner, "detect", synth_dir / "detection_index.jsonl", preds)
        assert result.exit_code == 0, result.output
        truths = {json.loads(l)["image_id"]: json.loads(l)
                  for l in (synth_dir / "truths.jsonl").read_text().splitlines()}
        lines = preds.read_text().splitlines()
        assert len(lines) == 5
        for line in lines:
            rec = json.loads(line)
            truth = truths[rec["image_id"]]
            assert rec["h"] == pytest.approx(truth["h"], abs=0.5)
            assert rec["alpha"] == pytest.approx(truth["alpha"], abs=0.1)
            assert rec["center_x"] == truth["center_x"]
            assert len(rec["config_hash"]) == 64

    def test_rerun_byte_identical(self, runner, synth_dir, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run(runner, "detect", synth_dir / "detection_index.jsonl", a).exit_code == 0
        assert run(runner, "detect", synth_dir / "detection_index.jsonl", b).exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_partial_failure_exit_one(self, runner, synth_dir, tmp_path):
        empty = synth_dir / "masks" / "empty.png"
        Mask(np.zeros((240, 320), dtype=np.uint8)).save(empty)
        index = synth_dir / "detection_index.jsonl"
        lines = index.read_text().splitlines()[:2]
        lines.append(json.dumps({
            "image_id": "broken",
            "image_file": "masks/empty.png",
            "detections": [{"class": "canoe", "confidence": 0.9,
                            "mask_file": "masks/empty.png"}],
        }))
        mixed = tmp_path / "mixed.jsonl"
        mixed_dir = tmp_path
        (mixed_dir / "masks").mkdir(exist_ok=True)
        for png in (synth_dir / "masks").glob("*.png"):
            (mixed_dir / "masks" / png.name).write_bytes(png.read_bytes())
        mixed.write_text("\n".join(lines) + "\n")
        out = tmp_path / "out.jsonl"
        result = run(runner, "detect", mixed, out)
        assert result.exit_code == 1
        recs = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(recs) == 3
        errors = [r for r in recs if "error" in r]
        assert len(errors) == 1
        assert errors[0]["image_id"] == "broken"
        assert errors[0]["error"] == "NoForeground"

    def test_empty_index_ok(self, runner, tmp_path):
        index = tmp_path / "empty.jsonl"
        index.write_text("")
        out = tmp_path / "out.jsonl"
        result = run(runner, "detect", index, out)
        assert result.exit_code == 0
        assert out.read_text() == ""

    def test_missing_index_exit_two(self, runner, tmp_path):
        result = run(runner, "detect", tmp_path / "nope.jsonl", tmp_path / "out.jsonl")
        assert result.exit_code == 2

    def test_malformed_index_exit_two(self, runner, tmp_path):
        index = tmp_path / "bad.jsonl"
        index.write_text("this is not json\n")
        result = run(runner, "detect", index, tmp_path / "out.jsonl")
        assert result.exit_code == 2

    def test_center_x_flag(self, runner, synth_dir, tmp_path):
        out = tmp_path / "cx.jsonl"
        assert run(runner, "detect", synth_dir / "detection_index.jsonl", out,
                   "--center-x", 10).exit_code == 0
        assert all(json.loads(l)["center_x"] == 10 for l in out.read_text().splitlines())


def write_annotations(path: Path, values: dict[str, float], experts=("a", "b"),
                      spreads: dict[str, float] | None = None) -> None:
    """Two annotations per image, symmetric about h so the consensus equals h.

    The sign alternates per image so neither expert is systematically high,
    keeping the rank test quiet.
    """
    records = []
    for i, (image_id, h) in enumerate(values.items()):
        spread = 1.0 if spreads is None else spreads[image_id]
        for k, expert in enumerate(experts):
            off = spread * (-1.0) ** (i + k)
            records.append(AnnotationRecord(
                image_id=image_id,
                expert_id=expert,
                params=WaterlineParams(h=h + off, alpha=0.0, center_x=512),
                group=StudyGroup.A,
                modified=True,
                timestamp=1700000000.0,
            ))
    save_annotations(records, path)


def write_predictions(path: Path, values: dict[str, float]) -> None:
    lines = [json.dumps({"image_id": i, "h": h, "alpha": 0.0, "center_x": 512,
                         "config_hash": "x" * 64}) for i, h in values.items()]
    path.write_text("\n".join(lines) + "\n")


class TestEvaluate:
    def test_perfect_predictions(self, runner, tmp_path):
        values = {f"i{n}": 200.0 + n for n in range(4)}
        ann, preds = tmp_path / "ann.jsonl", tmp_path / "preds.jsonl"
        write_annotations(ann, values)
        write_predictions(preds, values)
        report = tmp_path / "report.json"
        result = run(runner, "evaluate", ann, preds, "--report", report)
        assert result.exit_code == 0, result.output
        body = json.loads(report.read_text())
        assert body["h_rate"] == 1.0
        assert body["joint_rate"] == 1.0
        assert body["n_images"] == 4
        assert body["kruskal_wallis"]["h"]["p"] > 0.05
        assert "acceptance rates: height 1.0000" in result.output

    def test_rerun_byte_identical_report(self, runner, tmp_path):
        values = {f"i{n}": 200.0 + n for n in range(4)}
        ann, preds = tmp_path / "ann.jsonl", tmp_path / "preds.jsonl"
        write_annotations(ann, values)
        write_predictions(preds, values)
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        assert run(runner, "evaluate", ann, preds, "--report", r1).exit_code == 0
        assert run(runner, "evaluate", ann, preds, "--report", r2).exit_code == 0
        assert r1.read_bytes() == r2.read_bytes()

    def test_single_expert_zero_interval(self, runner, tmp_path):
        # one expert: consensus equals the annotation, every deviation is zero
        values = {f"i{n}": 200.0 for n in range(3)}
        ann, preds = tmp_path / "ann.jsonl", tmp_path / "preds.jsonl"
        write_annotations(ann, values, experts=("solo",), spreads={k: 0.0 for k in values})
        write_predictions(preds, values)
        result = run(runner, "evaluate", ann, preds)
        assert result.exit_code == 0, result.output
        assert "u = 0" in result.output
        assert "needs at least 2 experts" in result.output

    def test_missing_prediction_exit_two(self, runner, tmp_path):
        ann, preds = tmp_path / "ann.jsonl", tmp_path / "preds.jsonl"
        write_annotations(ann, {"i1": 200.0, "i2": 210.0})
        write_predictions(preds, {"i1": 200.0})
        assert run(runner, "evaluate", ann, preds).exit_code == 2

    def test_malformed_annotations_exit_two(self, runner, tmp_path):
        ann, preds = tmp_path / "ann.jsonl", tmp_path / "preds.jsonl"
        ann.write_text("nope\n")
        write_predictions(preds, {"i1": 200.0})
        assert run(runner, "evaluate", ann, preds).exit_code == 2

    def test_coverage_flag_changes_interval(self, runner, tmp_path):
        values = {f"i{n}": 200.0 for n in range(10)}
        spreads = {f"i{n}": 0.5 * (n + 1) for n in range(10)}  # 0.5 .. 5.0
        ann, preds = tmp_path / "ann.jsonl", tmp_path / "preds.jsonl"
        write_annotations(ann, values, spreads=spreads)
        write_predictions(preds, values)
        r_tight = tmp_path / "tight.json"
        r_loose = tmp_path / "loose.json"
        assert run(runner, "evaluate", ann, preds, "--coverage", 0.5,
                   "--report", r_loose).exit_code == 0
        assert run(runner, "evaluate", ann, preds, "--coverage", 0.99,
                   "--report", r_tight).exit_code == 0
        loose = json.loads(r_loose.read_text())["acceptance_range"]["u"]
        tight = json.loads(r_tight.read_text())["acceptance_range"]["u"]
        assert tight > loose > 0


class TestBuildStudy:
    def test_manifest_written(self, runner, synth_dir, tmp_path):
        preds = tmp_path / "preds.jsonl"
        assert run(runner, "detect", synth_dir / "detection_index.jsonl",
                   preds).exit_code == 0
        manifest = tmp_path / "manifest.jsonl"
        result = run(runner, "build-study", synth_dir / "detection_index.jsonl", preds,
                     manifest, "--sizes", "3,2,1,1", "--seed", 8)
        assert result.exit_code == 0, result.output
        tasks = load_manifest(manifest)
        assert len(tasks) == 7
        assert {str(t.group) for t in tasks} == {"A", "B", "C", "D"}
        assert all(t.image.width == 320 for t in tasks)

    def test_same_seed_byte_identical(self, runner, synth_dir, tmp_path):
        preds = tmp_path / "preds.jsonl"
        assert run(runner, "detect", synth_dir / "detection_index.jsonl",
                   preds).exit_code == 0
        m1, m2 = tmp_path / "m1.jsonl", tmp_path / "m2.jsonl"
        for m in (m1, m2):
            assert run(runner, "build-study", synth_dir / "detection_index.jsonl",
                       preds, m, "--sizes", "3,2,1,1", "--seed", 8).exit_code == 0
        assert m1.read_bytes() == m2.read_bytes()

    def test_infeasible_sizes_exit_two(self, runner, synth_dir, tmp_path):
        preds = tmp_path / "preds.jsonl"
        assert run(runner, "detect", synth_dir / "detection_index.jsonl",
                   preds).exit_code == 0
        result = run(runner, "build-study", synth_dir / "detection_index.jsonl", preds,
                     tmp_path / "m.jsonl", "--sizes", "9,2,1,1")
        assert result.exit_code == 2


class TestMetrics:
    def test_perfect_agreement(self, runner, synth_dir, tmp_path):
        gt = tmp_path / "gt.jsonl"
        lines = []
        for line in (synth_dir / "detection_index.jsonl").read_text().splitlines():
            rec = json.loads(line)
            lines.append(json.dumps({
                "image_id": rec["image_id"],
                "class": rec["detections"][0]["class"],
                "mask_file": str(synth_dir / rec["detections"][0]["mask_file"]),
            }))
        gt.write_text("\n".join(lines) + "\n")
        report = tmp_path / "metrics.json"
        result = run(runner, "metrics", synth_dir / "detection_index.jsonl", gt,
                     "--report", report)
        assert result.exit_code == 0, result.output
        body = json.loads(report.read_text())
        assert body["iou"]["mean"] == 1.0
        assert body["iou"]["min"] == 1.0
        assert body["f1"] == {"canoe": 1.0, "kayak": 1.0}

    def test_mismatched_sets_exit_two(self, runner, synth_dir, tmp_path):
        gt = tmp_path / "gt.jsonl"
        gt.write_text(json.dumps({
            "image_id": "other",
            "class": "canoe",
            "mask_file": str(synth_dir / "masks" / "synth-0000.png"),
        }) + "\n")
        result = run(runner, "metrics", synth_dir / "detection_index.jsonl", gt)
        assert result.exit_code == 2


class TestHelp:
    def test_subcommands_listed(self, runner):
        result = run(runner, "--help")
        assert result.exit_code == 0
        for name in ("detect", "evaluate", "build-study", "metrics", "serve", "synth"):
            assert name in result.output
