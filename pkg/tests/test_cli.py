"""End-to-end tests of the tumor-cascade command line"""
import json

import numpy as np
import pandas as pd
import pytest
import yaml

from app import main
from utils.errors import EXIT_DATA, EXIT_OK, EXIT_USAGE
from utils.manifest import load_manifest
from volcore.vvl import read_volume

SMALL = [
    "--set", "proposals_per_window=40",
    "--set", "window_size=16,16",
    "--set", "scales=0.5,1.0",
    "--set", "anchor_sizes=4,8",
    "--set", "detector_channels=2",
    "--set", "channels=2,3,4,5",
    "--set", "convs_per_stage=1",
    "--set", "patch_dims=8,8,8",
    "--set", "iterations=2",
    "--set", "batch_size=2",
]


@pytest.fixture
def synthetic_dir(tmp_path):
    out = tmp_path / "data"
    code = main(["--out", str(out), "make-synthetic", "--count", "2", "--dims", "32", "32", "32",
                 "--radius-min", "5", "--radius-max", "7"])
    assert code == EXIT_OK
    return out


def test_make_synthetic_writes_manifest(synthetic_dir):
    entries = load_manifest(synthetic_dir / "manifest.txt")
    assert [e.scan_id for e in entries] == ["synth_000", "synth_001"]
    assert all(e.complete and e.label is not None for e in entries)
    assert read_volume(entries[0].label).dims == (32, 32, 32)
    assert (synthetic_dir / "synth_000_flair.meta").read_text().splitlines() == ["scan_id=synth_000", "modality=FLAIR"]


def test_windows_are_byte_identical_across_runs(synthetic_dir, tmp_path):
    manifest = str(synthetic_dir / "manifest.txt")
    first, second = tmp_path / "w1", tmp_path / "w2"
    assert main(SMALL + ["--out", str(first), "windows", manifest]) == EXIT_OK
    assert main(SMALL + ["--jobs", "2", "--out", str(second), "windows", manifest]) == EXIT_OK
    for name in ("synth_000.windows.txt", "synth_001.windows.txt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()

    lines = (first / "synth_000.windows.txt").read_text().splitlines()
    assert any(line.split()[1] == "positive" for line in lines)
    assert all(len(line.split()) == 8 for line in lines)


def test_windows_without_proposals(synthetic_dir, tmp_path):
    out = tmp_path / "w"
    assert main(SMALL + ["--out", str(out), "windows", "--no-proposals", str(synthetic_dir / "manifest.txt")]) == 0
    kinds = {line.split()[1] for line in (out / "synth_000.windows.txt").read_text().splitlines()}
    assert kinds <= {"positive", "negative"}


def test_evaluate_prediction_against_itself(synthetic_dir, tmp_path):
    manifest = str(synthetic_dir / "manifest.txt")
    out = tmp_path / "eval"
    assert main(["--out", str(out), "evaluate", manifest, manifest]) == EXIT_OK
    report = json.loads((out / "synth_000.json").read_text())
    for region in ("WT", "TC", "ET"):
        assert report["regions"][region]["dice"] == 1.0
        assert report["regions"][region]["hausdorff"] == 0.0
    frame = pd.read_csv(out / "aggregate.csv", index_col="scan_id")
    assert list(frame.index) == ["synth_000", "synth_001", "mean", "std"]
    assert np.allclose(frame.loc["mean", ["WT_dice", "TC_dice", "ET_dice"]], 1.0)


def test_train_infer_evaluate(synthetic_dir, tmp_path):
    manifest = str(synthetic_dir / "manifest.txt")
    models, predictions, scores = tmp_path / "models", tmp_path / "pred", tmp_path / "scores"
    db = str(tmp_path / "runs.db")
    assert main(SMALL + ["--out", str(models), "--db", db, "train", "seg", manifest]) == EXIT_OK
    assert main(SMALL + ["--out", str(models), "--db", db, "train", "detector", manifest]) == EXIT_OK
    report = json.loads((models / "seg_report.json").read_text())
    assert len(report["losses"]) == 2
    assert "wall_clock" not in report

    assert main(SMALL + ["--out", str(predictions), "infer", manifest,
                         "--detector", str(models / "detector.ckpt"),
                         "--segnet", str(models / "seg.ckpt")]) == EXIT_OK
    predicted = load_manifest(predictions / "predictions.txt")
    assert [e.scan_id for e in predicted] == ["synth_000", "synth_001"]
    labels = read_volume(predicted[0].label)
    assert labels.dims == (32, 32, 32)
    assert set(np.unique(labels.data)) <= {0, 1, 2, 4}

    assert main(["--out", str(scores), "--db", db, "evaluate",
                 str(predictions / "predictions.txt"), manifest]) == EXIT_OK
    assert (scores / "aggregate.csv").exists()


def test_seeded_training_reports_are_identical(synthetic_dir, tmp_path):
    manifest = str(synthetic_dir / "manifest.txt")
    for name in ("a", "b"):
        assert main(SMALL + ["--seed", "3", "--out", str(tmp_path / name), "train", "seg", manifest]) == EXIT_OK
    assert (tmp_path / "a" / "seg_report.json").read_bytes() == (tmp_path / "b" / "seg_report.json").read_bytes()


def test_evaluate_rejects_mismatched_manifests(synthetic_dir, tmp_path):
    manifest = synthetic_dir / "manifest.txt"
    partial = synthetic_dir / "partial.txt"
    partial.write_text(manifest.read_text().splitlines()[0] + "\n")
    assert main(["--out", str(tmp_path / "e"), "evaluate", str(partial), str(manifest)]) == EXIT_DATA


def test_usage_and_config_errors_exit_1(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["--set", "bogus_key=1", "evaluate", "a", "b"]) == EXIT_USAGE
    assert main(["--config", str(tmp_path / "missing.yaml"), "evaluate", "a", "b"]) == EXIT_USAGE
    bad = tmp_path / "bad.txt"
    bad.write_text("lr=-1\n")
    assert main(["--config", str(bad), "evaluate", "a", "b"]) == EXIT_USAGE


def test_convert_size_mismatch_exits_2(tmp_path):
    (tmp_path / "blob.raw").write_bytes(np.zeros(10, dtype="<f4").tobytes())
    spec = tmp_path / "raw.yaml"
    spec.write_text(yaml.safe_dump({"raw": "blob.raw", "out": "blob.vvl", "dims": [2, 2, 2]}))
    assert main(["--out", str(tmp_path), "convert", str(spec)]) == EXIT_DATA


def test_missing_manifest_exits_2(tmp_path):
    assert main(["--out", str(tmp_path), "windows", str(tmp_path / "nope.txt")]) == EXIT_DATA


def test_output_path_that_is_a_file_exits_2(synthetic_dir, tmp_path):
    blocker = tmp_path / "taken"
    blocker.write_text("not a directory")
    code = main(SMALL + ["--out", str(blocker), "windows", str(synthetic_dir / "manifest.txt")])
    assert code == EXIT_DATA
