"""Command-line interface: outputs, exit codes, file handling."""

import json
import subprocess
import sys

import pytest

from detagnostic import TrainingPlan, __version__
from detagnostic.cli import entrypoint

from generators import make_doc


@pytest.fixture
def ann_file(tmp_path):
    """Twelve annotated images, two classes, written as COCO JSON."""
    images = [(i, 640, 480) for i in range(1, 13)]
    categories = [(1, "cat"), (2, "dog")]
    annotations = []
    ann_id = 1
    for img_id, _, _ in images:
        for j in range(2):
            x, y = 10 + 30 * j + img_id, 20 + 40 * j
            w, h = 50 + 5 * (img_id % 3), 80 + 4 * (j + img_id % 2)
            annotations.append((ann_id, img_id, 1 + (ann_id % 2), (x, y, w, h)))
            ann_id += 1
    path = tmp_path / "train.json"
    path.write_text(json.dumps(make_doc(images, categories, annotations)),
                    encoding="utf-8")
    return path


@pytest.fixture
def perfect_dets_file(tmp_path, ann_file):
    """Detections that copy every ground-truth box at full confidence."""
    doc = json.loads(ann_file.read_text(encoding="utf-8"))
    dets = [
        {"image_id": a["image_id"], "category_id": a["category_id"],
         "bbox": a["bbox"], "score": 1.0}
        for a in doc["annotations"]
    ]
    path = tmp_path / "dets.json"
    path.write_text(json.dumps(dets), encoding="utf-8")
    return path


@pytest.fixture
def corpus_file(tmp_path):
    label = {"small_dataset": True, "small_object": False, "large_dataset": False}
    data = {
        "regimes": {"d1": label, "d2": dict(label, small_dataset=False)},
        "models": [
            {"name": "m-accurate", "size_group": "accurate",
             "ap_percent": {"d1": 60.0, "d2": 70.0}},
            {"name": "m-fast", "size_group": "fast",
             "ap_percent": {"d1": 40.0, "d2": 50.0}},
        ],
    }
    path = tmp_path / "corpus.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestStats:
    def test_text_output(self, ann_file, capsys):
        assert entrypoint(["stats", "--annotations", str(ann_file)]) == 0
        out = capsys.readouterr().out
        assert "dataset: train" in out
        assert "classes: 2" in out
        assert "train images: 12" in out
        assert "boxes per image: 2.00" in out
        assert "regime group:" in out

    def test_json_output(self, ann_file, capsys):
        assert entrypoint(
            ["stats", "--annotations", str(ann_file), "--json", "--name", "pets"]
        ) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["name"] == "pets"
        assert data["stats"]["num_classes"] == 2
        assert data["stats"]["num_train_images"] == 12
        # 12 train images is well under the small-dataset cutoff
        assert data["regime"]["small_dataset"] is True
        assert data["regime_group"] == "small_dataset"

    def test_separate_val_annotations(self, ann_file, tmp_path, capsys):
        val = tmp_path / "val.json"
        val.write_text(json.dumps(make_doc(
            [(1, 640, 480)], [(1, "cat"), (2, "dog")],
            [(1, 1, 1, (5, 5, 20, 20))],
        )), encoding="utf-8")
        assert entrypoint([
            "stats", "--annotations", str(ann_file),
            "--val-annotations", str(val), "--json",
        ]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["stats"]["num_val_images"] == 1

    def test_missing_file_exits_3(self, tmp_path, capsys):
        code = entrypoint(["stats", "--annotations", str(tmp_path / "none.json")])
        assert code == 3
        assert "detagnostic:" in capsys.readouterr().err

    def test_malformed_file_exits_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{", encoding="utf-8")
        assert entrypoint(["stats", "--annotations", str(bad)]) == 3


class TestEval:
    def test_perfect_detections_text(self, ann_file, perfect_dets_file, capsys):
        assert entrypoint([
            "eval", "--gt", str(ann_file), "--dets", str(perfect_dets_file),
            "--split", "train",
        ]) == 0
        out = capsys.readouterr().out
        assert "AP@[0.50:0.95]: 1.0000" in out
        assert "AP@0.50: 1.0000" in out

    def test_json_and_per_class(self, ann_file, perfect_dets_file, capsys):
        assert entrypoint([
            "eval", "--gt", str(ann_file), "--dets", str(perfect_dets_file),
            "--split", "train", "--json", "--per-class",
        ]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["ap_50_95"] == 1.0
        assert set(data["per_class"]) == {"1", "2"} or set(data["per_class"]) == {1, 2}

    def test_per_class_text_uses_names(self, ann_file, perfect_dets_file, capsys):
        entrypoint([
            "eval", "--gt", str(ann_file), "--dets", str(perfect_dets_file),
            "--split", "train", "--per-class",
        ])
        out = capsys.readouterr().out
        assert "class cat:" in out
        assert "class dog:" in out

    def test_empty_ground_truth_exits_3(self, tmp_path, perfect_dets_file, capsys):
        empty = tmp_path / "empty.json"
        empty.write_text(json.dumps(make_doc(
            [(i, 640, 480) for i in range(1, 13)], [(1, "cat"), (2, "dog")], [],
        )), encoding="utf-8")
        code = entrypoint([
            "eval", "--gt", str(empty), "--dets", str(perfect_dets_file),
            "--split", "train",
        ])
        assert code == 3
        assert "no ground-truth" in capsys.readouterr().err

    def test_dets_referencing_unknown_image_exit_3(self, ann_file, tmp_path):
        rogue = tmp_path / "rogue.json"
        rogue.write_text(json.dumps([
            {"image_id": 999, "category_id": 1, "bbox": [1, 1, 5, 5], "score": 0.9},
        ]), encoding="utf-8")
        assert entrypoint([
            "eval", "--gt", str(ann_file), "--dets", str(rogue),
            "--split", "train",
        ]) == 3


class TestCorpus:
    def test_leaderboard_text(self, corpus_file, capsys):
        assert entrypoint(["corpus", "--records", str(corpus_file)]) == 0
        out = capsys.readouterr().out
        # fast group ranks above accurate regardless of score
        assert out.index("m-fast") < out.index("m-accurate")
        assert "45.0" in out  # m-fast average of 40 and 50
        assert "40.0" in out  # m-fast small-dataset column (d1 only)

    def test_leaderboard_json(self, corpus_file, capsys):
        assert entrypoint(["corpus", "--records", str(corpus_file), "--json"]) == 0
        rows = json.loads(capsys.readouterr().out)
        assert [r["model"] for r in rows] == ["m-fast", "m-accurate"]

    def test_malformed_records_exit_3(self, tmp_path):
        bad = tmp_path / "c.json"
        bad.write_text('{"models": []}', encoding="utf-8")
        assert entrypoint(["corpus", "--records", str(bad)]) == 3


class TestAnchors:
    def test_text_output(self, ann_file, capsys):
        assert entrypoint([
            "anchors", "--annotations", str(ann_file), "--k", "4",
        ]) == 0
        out = capsys.readouterr().out
        assert "k=4 anchors at 864x864" in out
        assert "mean best IoU:" in out

    def test_json_with_heads(self, ann_file, capsys):
        assert entrypoint([
            "anchors", "--annotations", str(ann_file), "--k", "6",
            "--heads", "2", "--resolution", "800x600", "--json",
        ]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["k"] == 6
        assert [len(g) for g in data["head_groups"]] == [3, 3]
        assert data["iterations"] >= 1

    def test_bad_resolution_exits_2(self, ann_file):
        with pytest.raises(SystemExit) as exc:
            entrypoint([
                "anchors", "--annotations", str(ann_file), "--k", "4",
                "--resolution", "864",
            ])
        assert exc.value.code == 2

    def test_k_larger_than_data_exits_3(self, tmp_path):
        tiny = tmp_path / "tiny.json"
        tiny.write_text(json.dumps(make_doc(
            [(1, 64, 64)], [(1, "c")], [(1, 1, 1, (1, 1, 10, 10))],
        )), encoding="utf-8")
        assert entrypoint([
            "anchors", "--annotations", str(tiny), "--k", "8",
        ]) == 3


class TestTemplate:
    def test_list(self, capsys):
        assert entrypoint(["template", "--list"]) == 0
        out = capsys.readouterr().out
        assert "ssd-mobilenetv2" in out
        assert "atss-mobilenetv2" in out
        assert "vfnet-resnet50" in out
        assert "gflops=347.78" in out

    def test_instantiate_to_file(self, ann_file, tmp_path, capsys):
        out_path = tmp_path / "plan.json"
        assert entrypoint([
            "template", "--name", "ssd-mobilenetv2",
            "--annotations", str(ann_file), "-o", str(out_path),
        ]) == 0
        plan = TrainingPlan.from_json(out_path.read_text(encoding="utf-8"))
        assert plan.template_name == "ssd-mobilenetv2"
        assert plan.anchors is not None

    def test_instantiate_to_stdout(self, ann_file, capsys):
        assert entrypoint([
            "template", "--name", "atss-mobilenetv2",
            "--annotations", str(ann_file),
        ]) == 0
        plan = TrainingPlan.from_json(capsys.readouterr().out)
        assert plan.multiscale is not None

    def test_missing_args_exit_2(self, capsys):
        assert entrypoint(["template"]) == 2
        assert "required" in capsys.readouterr().err

    def test_unknown_name_rejected_by_parser(self, ann_file):
        with pytest.raises(SystemExit) as exc:
            entrypoint(["template", "--name", "nope", "--annotations", str(ann_file)])
        assert exc.value.code == 2


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            entrypoint(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_no_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            entrypoint([])
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            entrypoint(["train"])
        assert exc.value.code == 2

    def test_console_module_smoke(self):
        proc = subprocess.run(
            [sys.executable, "-m", "detagnostic", "--version"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0
        assert __version__ in proc.stdout

    def test_console_module_exit_codes(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "detagnostic", "stats",
             "--annotations", str(tmp_path / "missing.json")],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 3
        proc = subprocess.run(
            [sys.executable, "-m", "detagnostic", "stats"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 2
