"""Tests for area metrics, surface distances and evaluation reports"""
import json

import numpy as np
import pandas as pd
import pytest

from segmetrics.area import (
    ConfusionCounts,
    confusion_counts,
    dice,
    f1,
    jaccard,
    precision,
    sensitivity,
    specificity,
)
from segmetrics.errors import EmptySurface
from segmetrics.report import aggregate_frame, evaluate_scan, write_aggregate_csv, write_scan_json
from segmetrics.surface import EXHAUSTIVE, KDTREE, SurfaceSet, assd, directed_distances, hausdorff, surface_voxels
from volcore.errors import DimsMismatch
from volcore.volume import Volume


def _cube(dims, lo, hi):
    mask = np.zeros(dims, dtype=np.uint8)
    mask[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1] = 1
    return mask


def test_confusion_counts_and_dice_example():
    pred = np.array([1, 1, 0, 0], dtype=np.uint8).reshape(4, 1, 1)
    truth = np.array([1, 0, 1, 0], dtype=np.uint8).reshape(4, 1, 1)
    counts = confusion_counts(pred, truth)
    assert counts == ConfusionCounts(tp=1, fp=1, tn=1, fn=1)
    assert dice(counts) == 0.5
    assert sensitivity(counts) == 0.5
    assert specificity(counts) == 0.5
    assert precision(counts) == 0.5
    assert jaccard(counts) == pytest.approx(1 / 3)


def test_counts_partition_every_voxel(rng):
    pred = rng.random((6, 7, 8)) > 0.6
    truth = rng.random((6, 7, 8)) > 0.4
    counts = confusion_counts(pred, truth)
    assert counts.total == pred.size
    assert counts.tp == int((pred & truth).sum())


def test_identical_and_empty_masks():
    mask = _cube((5, 5, 5), (1, 1, 1), (3, 3, 3))
    assert dice(confusion_counts(mask, mask)) == 1.0
    empty = np.zeros((5, 5, 5), dtype=np.uint8)
    counts = confusion_counts(empty, empty)
    assert dice(counts) == 1.0
    assert sensitivity(counts) is None and precision(counts) is None
    assert specificity(counts) == 1.0


def test_dice_equals_f1(rng):
    for _ in range(20):
        counts = confusion_counts(rng.random((5, 5, 5)) > 0.5, rng.random((5, 5, 5)) > 0.5)
        assert dice(counts) == pytest.approx(f1(counts))


def test_confusion_dims_mismatch():
    with pytest.raises(DimsMismatch):
        confusion_counts(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))


def test_surface_of_cube_and_single_voxel():
    assert len(surface_voxels(_cube((5, 5, 5), (1, 1, 1), (3, 3, 3)))) == 26
    assert len(surface_voxels(_cube((3, 3, 3), (1, 1, 1), (1, 1, 1)))) == 1
    assert len(surface_voxels(np.zeros((3, 3, 3), dtype=np.uint8))) == 0


def test_mask_touching_the_border_keeps_border_voxels():
    full = np.ones((3, 3, 3), dtype=np.uint8)
    surface = surface_voxels(full)
    assert len(surface) == 26
    assert not any((c == 1).all() for c in surface.coords)


def test_hausdorff_and_assd_of_shifted_voxel():
    a = surface_voxels(_cube((8, 8, 8), (1, 1, 1), (1, 1, 1)))
    b = surface_voxels(_cube((8, 8, 8), (4, 1, 1), (4, 1, 1)))
    assert hausdorff(a, b) == 3.0
    assert assd(a, b) == 3.0
    assert hausdorff(a, a) == 0.0


def test_spacing_scales_distances():
    mask_a = _cube((8, 8, 8), (1, 1, 1), (1, 1, 1))
    mask_b = _cube((8, 8, 8), (4, 1, 1), (4, 1, 1))
    a = surface_voxels(Volume(mask_a, (2.0, 1.0, 1.0)))
    b = surface_voxels(Volume(mask_b, (2.0, 1.0, 1.0)))
    assert hausdorff(a, b) == 6.0


def test_kdtree_matches_exhaustive_search():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        a = surface_voxels(rng.random((7, 6, 5)) > 0.7, (1.0, 1.5, 2.0))
        b = surface_voxels(rng.random((7, 6, 5)) > 0.7, (1.0, 1.5, 2.0))
        fast = directed_distances(a, b, KDTREE)
        slow = directed_distances(a, b, EXHAUSTIVE)
        assert np.allclose(fast, slow, atol=1e-9)
        assert hausdorff(a, b, method=KDTREE) == pytest.approx(hausdorff(a, b, method=EXHAUSTIVE), abs=1e-9)


def test_distance_properties(rng):
    for _ in range(20):
        a = surface_voxels(rng.random((6, 6, 6)) > 0.6)
        b = surface_voxels(rng.random((6, 6, 6)) > 0.6)
        assert hausdorff(a, b) == hausdorff(b, a)
        assert assd(a, b) == pytest.approx(assd(b, a))
        assert assd(a, b) <= hausdorff(a, b) + 1e-12
        assert hausdorff(a, b, percentile=95) <= hausdorff(a, b)


def test_percentile_hausdorff_takes_larger_directed_percentile():
    line = SurfaceSet(np.array([[x, 0, 0] for x in range(10)]))
    point = SurfaceSet(np.array([[0, 0, 0]]))
    # directed medians are 4.5 and 0; pooling both lists would give 4.0
    assert hausdorff(line, point, percentile=50) == pytest.approx(4.5)
    assert hausdorff(point, line, percentile=50) == pytest.approx(4.5)
    assert hausdorff(line, point) == 9.0


def test_empty_surface_raises():
    full = surface_voxels(_cube((4, 4, 4), (1, 1, 1), (2, 2, 2)))
    empty = surface_voxels(np.zeros((4, 4, 4), dtype=np.uint8))
    with pytest.raises(EmptySurface):
        hausdorff(full, empty)


def _label_volume(dims=(12, 12, 12)):
    labels = np.zeros(dims, dtype=np.uint8)
    labels[2:10, 2:10, 2:10] = 2
    labels[4:8, 4:8, 4:8] = 1
    labels[5:7, 5:7, 5:7] = 4
    return Volume(labels)


def test_evaluate_scan_identity():
    truth = _label_volume()
    report = evaluate_scan(truth, truth, scan_id="same")
    for name in ("WT", "TC", "ET"):
        region = report.regions[name]
        assert region.dice == 1.0 and region.jaccard == 1.0
        assert region.hausdorff == 0.0 and region.assd == 0.0
        assert region.flags == []


def test_evaluate_scan_flags_degenerate_regions():
    truth = _label_volume()
    pred = Volume(np.where(truth.data == 4, 1, truth.data).astype(np.uint8))
    report = evaluate_scan(pred, truth, scan_id="no_et")
    et = report.regions["ET"]
    assert et.dice == 0.0
    assert et.precision is None and "precision_undefined" in et.flags
    assert et.hausdorff is None and "empty_surface" in et.flags

    empty = Volume(np.zeros((4, 4, 4), dtype=np.uint8))
    both = evaluate_scan(empty, empty).regions["WT"]
    assert both.dice == 1.0
    assert "both_empty" in both.flags


def test_evaluate_scan_dims_mismatch():
    with pytest.raises(DimsMismatch):
        evaluate_scan(_label_volume((12, 12, 12)), _label_volume((12, 12, 13)))


def test_scan_json(tmp_path):
    report = evaluate_scan(_label_volume(), _label_volume(), scan_id="s1", percentile=95.0)
    data = json.loads(write_scan_json(report, tmp_path / "s1.json").read_text())
    assert data["scan_id"] == "s1"
    assert data["hausdorff_percentile"] == 95.0
    assert set(data["regions"]) == {"WT", "TC", "ET"}
    assert data["regions"]["WT"]["dice"] == 1.0


def test_aggregate_is_order_independent(tmp_path):
    truth = _label_volume()
    shifted = Volume(np.roll(truth.data, 1, axis=0))
    reports = [evaluate_scan(truth, truth, scan_id="b"), evaluate_scan(shifted, truth, scan_id="a"),
               evaluate_scan(truth, shifted, scan_id="c")]
    first = write_aggregate_csv(reports, tmp_path / "one.csv")
    second = write_aggregate_csv(list(reversed(reports)), tmp_path / "two.csv")
    assert first.read_bytes() == second.read_bytes()

    frame = pd.read_csv(first, index_col="scan_id")
    assert list(frame.index) == ["a", "b", "c", "mean", "std"]
    dices = frame.loc[["a", "b", "c"], "WT_dice"]
    assert frame.loc["mean", "WT_dice"] == pytest.approx(dices.mean(), abs=2e-6)
    assert frame.loc["std", "WT_dice"] == pytest.approx(dices.std(ddof=0), abs=2e-6)


def test_aggregate_skips_undefined_cells():
    truth = _label_volume()
    no_et = Volume(np.where(truth.data == 4, 1, truth.data).astype(np.uint8))
    frame = aggregate_frame([evaluate_scan(truth, truth, scan_id="x"), evaluate_scan(no_et, truth, scan_id="y")])
    assert np.isnan(frame.loc["y", "ET_hausdorff"])
    assert frame.loc["mean", "ET_hausdorff"] == 0.0
