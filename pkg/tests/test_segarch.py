"""Tests for the segmentation network, the slice detector, training and cascaded inference"""
import json

import numpy as np
import pytest
import torch
import torch.nn.functional as F
from torch import nn
from torch.func import functional_call

from autonet.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from autonet.errors import CheckpointMismatch
from autonet.gradcheck import grad_check
from autonet.runtime import seed_everything
from segarch.cascade import infer_cascade, run_cascade, whole_z
from segarch.config import DetectorConfig, SegNetConfig
from segarch.detector import (
    AnchorTarget,
    DetectionSample,
    anchor_rect,
    anchor_targets,
    build_detector,
    detect_box,
    detect_slice,
    detector_from_checkpoint,
    longest_slice_run,
)
from segarch.segnet import (
    build_segnet,
    declared_parameter_count,
    feature_shape,
    nested_labels,
    region_probs,
    segnet_from_checkpoint,
)
from segarch.errors import NoDetection
from segarch.training import (
    TrainReport,
    detector_loss,
    detector_samples,
    seg_samples,
    train_detector,
    train_seg,
)
from ctxwin.geometry import Rect, decode_deltas
from ctxwin.pipeline import scan_windows
from ctxwin.proposals import OracleProposalSource, aggregate_detections
from ctxwin.windows import POSITIVE
from utils.config import RunConfig
from utils.errors import EXIT_DATA, ConfigInvalid, EmptyDataset
from volcore.regions import decompose_regions
from segmetrics.report import evaluate_scan
from volcore.synthetic import SyntheticSpec, make_synthetic_dataset
from volcore.volume import Box3, MultiModalScan

TINY = SegNetConfig(channels=(2, 3, 4, 5), convs_per_stage=1, patch_dims=(8, 8, 8))


def _small_seg_cfg(config: RunConfig) -> SegNetConfig:
    return SegNetConfig.from_run_config(config)


def test_default_plan_concatenates_480_channels():
    cfg = SegNetConfig()
    assert cfg.feature_channels == 480
    assert feature_shape(cfg, (4, 4, 64, 64, 64)) == (4, 480, 64, 64, 64)
    assert feature_shape(cfg, (1, 4, 16, 24, 8)) == (1, 480, 16, 24, 8)


def test_default_plan_forward_on_small_input():
    seed_everything(0)
    net = build_segnet(SegNetConfig())
    with torch.no_grad():
        features = net.features(torch.randn(1, 4, 8, 8, 8))
    assert features.shape == (1, 480, 8, 8, 8)


def test_small_forward_keeps_resolution(small_config):
    seed_everything(0)
    net = build_segnet(_small_seg_cfg(small_config))
    with torch.no_grad():
        logits = net(torch.randn(1, 4, 16, 16, 16))
    assert logits.shape == (1, 4, 16, 16, 16)


@pytest.mark.parametrize("group_norm", [False, True])
def test_declared_parameter_count(group_norm):
    for cfg in [SegNetConfig(group_norm=group_norm),
                SegNetConfig(channels=(4, 6, 8, 10), convs_per_stage=3, group_norm=group_norm)]:
        net = build_segnet(cfg)
        assert declared_parameter_count(cfg) == sum(p.numel() for p in net.parameters())


def test_dilations_reach_the_quarter_resolution_paths():
    net = build_segnet(SegNetConfig(channels=(2, 3, 4, 5)))
    dilations = [spec.dilation for spec in net.conv_specs()]
    assert (2, 2, 2) in dilations and (3, 3, 3) in dilations
    assert net.conv_specs()[-1].kernel == (1, 1, 1)


def test_segnet_config_validation():
    with pytest.raises(ConfigInvalid):
        SegNetConfig(channels=(32, 64, 128))
    with pytest.raises(ConfigInvalid):
        SegNetConfig(channels=(32, 32, 128, 256))
    with pytest.raises(ConfigInvalid):
        SegNetConfig(patch_dims=(64, 64, 30))
    with pytest.raises(ConfigInvalid):
        SegNetConfig(atrous_kernel=2)


def test_segnet_end_to_end_grad_check():
    seed_everything(1)
    net = build_segnet(TINY).double()
    x = torch.randn(1, 4, 8, 8, 8, dtype=torch.float64)
    assert grad_check(lambda x: net(x), [x]) < 1e-3


def test_region_probs_examples(rng):
    label_four = torch.tensor([0.0, 0.0, 0.0, 1.0]).reshape(4, 1, 1, 1)
    assert [float(r) for r in region_probs(label_four)] == [1.0, 1.0, 1.0]
    background = torch.tensor([1.0, 0.0, 0.0, 0.0]).reshape(4, 1, 1, 1)
    assert [float(r) for r in region_probs(background)] == [0.0, 0.0, 0.0]

    probs = torch.softmax(torch.from_numpy(rng.normal(size=(2, 4, 3, 3, 3))), dim=1)
    wt, tc, et = region_probs(probs)
    assert torch.allclose(wt, probs[:, 1] + probs[:, 2] + probs[:, 3])
    assert torch.allclose(tc, probs[:, 1] + probs[:, 3])
    assert torch.equal(et, probs[:, 3])
    assert bool((et <= tc).all()) and bool((tc <= wt + 1e-12).all())


def test_nested_labels_override_order():
    probs = torch.tensor([
        [0.9, 0.05, 0.03, 0.02],  # background
        [0.1, 0.1, 0.7, 0.1],     # edema only
        [0.1, 0.6, 0.2, 0.1],     # core
        [0.1, 0.3, 0.0, 0.6],     # enhancing
        [0.3, 0.3, 0.1, 0.3],     # wt and tc fire, et does not
    ], dtype=torch.float64).T.reshape(1, 4, 5, 1, 1)
    labels = nested_labels(probs)
    assert labels.dtype == np.uint8
    assert labels[0, :, 0, 0].tolist() == [0, 2, 1, 4, 1]


def test_segnet_checkpoint_round_trip(tmp_path):
    seed_everything(2)
    net = build_segnet(TINY)
    path = save_checkpoint(Checkpoint.from_module(net, TINY.to_meta()), tmp_path / "seg.ckpt")
    restored = segnet_from_checkpoint(load_checkpoint(path))
    assert restored.cfg == TINY
    x = torch.randn(1, 4, 8, 8, 8)
    with torch.no_grad():
        assert torch.equal(net(x), restored(x))
    with pytest.raises(CheckpointMismatch):
        detector_from_checkpoint(load_checkpoint(path))


def test_detector_output_shape_and_zero_init():
    cfg = DetectorConfig(anchor_sizes=(8,), channels=4)
    net = build_detector(cfg, zero_init=True)
    out = net(torch.randn(1, 1, 32, 32))
    assert out.shape == (1, 6, 32, 32)
    logits, deltas = net.split(out)
    assert logits.shape == (1, 1, 2, 32, 32) and deltas.shape == (1, 1, 4, 32, 32)
    assert torch.allclose(F.softmax(logits, dim=2)[:, :, 1], torch.full((1, 1, 32, 32), 0.5))


def test_detector_meta_round_trip():
    cfg = DetectorConfig(modalities=("FLAIR", "T2"), anchor_sizes=(6, 12), channels=5, score_floor=0.25)
    assert DetectorConfig.from_meta(cfg.to_meta()) == cfg
    with pytest.raises(CheckpointMismatch):
        SegNetConfig.from_meta(cfg.to_meta())


def _sample(image, targets):
    return DetectionSample(np.asarray(image), tuple(targets))


class _LossModule(nn.Module):
    def __init__(self, net, sample):
        super().__init__()
        self.net = net
        self.sample = sample

    def forward(self):
        return detector_loss(self.net, self.sample)[0]


def test_detector_loss_grad_check(rng):
    seed_everything(4)
    net = build_detector(DetectorConfig(anchor_sizes=(4, 8), channels=3)).double()
    sample = _sample(rng.normal(size=(1, 12, 12)), [
        AnchorTarget(0, 5, 5, 1, (0.1, -0.2, 0.05, 0.0)),
        AnchorTarget(1, 2, 9, 1, (-0.3, 0.4, -0.1, 0.2)),
        AnchorTarget(1, 10, 3, 0),
    ])
    wrapper = _LossModule(net, sample)

    def loss_of(head, trunk):
        return functional_call(wrapper, {"net.head.weight": head, "net.trunk.0.weight": trunk}, ())

    error = grad_check(loss_of, [net.head.weight.detach(), net.trunk[0].weight.detach()])
    assert error < 1e-4


def test_detector_loss_without_positives_is_classification_only(rng):
    net = build_detector(DetectorConfig(anchor_sizes=(4,), channels=3))
    sample = _sample(rng.normal(size=(1, 8, 8)).astype(np.float32),
                     [AnchorTarget(0, 1, 1, 0), AnchorTarget(0, 6, 2, 0)])
    loss, _ = detector_loss(net, sample)
    logits, _ = net.split(net(torch.from_numpy(sample.image).unsqueeze(0)))
    picked = torch.stack([logits[0, 0, :, 1, 1], logits[0, 0, :, 6, 2]])
    expected = F.cross_entropy(picked, torch.tensor([0, 0]))
    assert float(loss) == pytest.approx(float(expected), rel=1e-5)


def test_anchor_targets_decode_back_to_ground_truth(small_scan, small_config):
    det_cfg = DetectorConfig.from_run_config(small_config)
    items = scan_windows(small_scan, small_config, OracleProposalSource(60), slices=[16])
    for item in items:
        targets = anchor_targets(item, det_cfg)
        assert len(targets) == len(item.labeled)
        for target, labeled in zip(targets, item.labeled):
            if labeled.label != POSITIVE:
                assert target.deltas is None
                continue
            gt = decode_deltas(labeled.proposal.rect, labeled.regression_target)
            anchor = anchor_rect(target.x, target.y, det_cfg.anchor_sizes[target.anchor])
            assert decode_deltas(anchor, target.deltas) == gt


def test_detect_slice_orders_by_score():
    net = build_detector(DetectorConfig(anchor_sizes=(4, 8), channels=3))
    boxes = detect_slice(net, np.random.default_rng(0).normal(size=(1, 16, 16)), limit=10)
    assert len(boxes) == 10
    scores = [score for _, score in boxes]
    assert scores == sorted(scores, reverse=True)
    for rect, _ in boxes:
        assert 0 <= rect.x0 <= rect.x1 < 16 and 0 <= rect.y0 <= rect.y1 < 16


def test_train_seg_with_zero_lr_is_flat(small_scan, small_config):
    config = small_config.with_overrides(lr=0.0, iterations=5)
    samples = seg_samples([small_scan], config)
    checkpoint, report = train_seg(samples, config)
    assert len(report.losses) == 5
    assert len(set(report.losses)) == 1

    seed_everything(config.seed, config.deterministic, config.jobs)
    fresh = Checkpoint.from_module(build_segnet(_small_seg_cfg(config)))
    for name, value in fresh.params.items():
        assert np.array_equal(checkpoint.params[name], value)


def test_train_seg_is_repeatable(small_spec, small_config):
    scans = make_synthetic_dataset(3, seed=5, spec=small_spec)
    config = small_config.with_overrides(iterations=6)
    samples = seg_samples(scans, config)
    _, first = train_seg(samples, config, seed=9)
    _, second = train_seg(samples, config, seed=9)
    assert first.losses == second.losses
    assert first.seed == 9
    assert set(first.train_metrics) == {"WT", "TC", "ET"}


def test_train_seg_needs_samples(small_config):
    with pytest.raises(EmptyDataset):
        train_seg([], small_config)


def test_train_detector_separates_a_trivial_pair(small_config):
    det_cfg = DetectorConfig(anchor_sizes=(4,), channels=8)
    positive = _sample(np.ones((1, 8, 8), np.float32), [AnchorTarget(0, 4, 4, 1, (0.0, 0.0, 0.0, 0.0))])
    negative = _sample(-np.ones((1, 8, 8), np.float32), [AnchorTarget(0, 4, 4, 0)])
    config = small_config.with_overrides(iterations=200, lr=0.05, batch_size=2)
    checkpoint, report = train_detector([positive, negative], config, det_cfg=det_cfg)
    assert report.train_metrics["accuracy"] == 1.0
    assert report.losses[-1] < report.losses[0]
    assert detector_from_checkpoint(checkpoint).cfg == det_cfg


def test_train_detector_is_repeatable(small_config):
    det_cfg = DetectorConfig(anchor_sizes=(4,), channels=4)
    rng = np.random.default_rng(3)
    samples = [
        _sample(rng.normal(size=(1, 8, 8)).astype(np.float32),
                [AnchorTarget(0, 3, 3, 1, (0.1, 0.0, -0.1, 0.2)), AnchorTarget(0, 6, 1, 0)])
        for _ in range(4)
    ]
    config = small_config.with_overrides(iterations=5)
    _, first = train_detector(samples, config, det_cfg=det_cfg)
    _, second = train_detector(samples, config, det_cfg=det_cfg)
    assert first.losses == second.losses


def test_train_detector_needs_labeled_proposals(small_config):
    with pytest.raises(EmptyDataset):
        train_detector([], small_config)


def test_report_without_wall_clock(tmp_path):
    report = TrainReport("seg", 0, 2, 0.01, 0.9, [0.5, 0.4], {"WT": 0.7}, {}, wall_clock=1.25)
    a = report.write(tmp_path / "a.json", include_wall_clock=False)
    report.wall_clock = 9.0
    b = report.write(tmp_path / "b.json", include_wall_clock=False)
    assert a.read_bytes() == b.read_bytes()
    assert "wall_clock" not in json.loads(a.read_text())
    assert json.loads(report.write(tmp_path / "c.json").read_text())["wall_clock"] == 9.0


def _never_detects(config):
    cfg = DetectorConfig.from_run_config(config.with_overrides(score_floor=0.9))
    return build_detector(cfg, zero_init=True)


def test_cascade_falls_back_to_whole_volume(small_scan, small_config, caplog):
    seed_everything(0)
    segnet = build_segnet(_small_seg_cfg(small_config))
    unlabeled = MultiModalScan(small_scan.scan_id, small_scan.modalities)
    result = run_cascade(unlabeled, _never_detects(small_config), segnet, small_config)
    assert result.fell_back
    assert result.grown == Box3.full(small_scan.dims)
    assert result.labels.dims == small_scan.dims
    assert set(np.unique(result.labels.data)) <= {0, 1, 2, 4}
    decompose_regions(result.labels)
    assert "NoDetection" in caplog.text


def test_cascade_output_stays_inside_grown_box(small_scan, small_config, monkeypatch):
    box = Box3((10, 11, 12), (18, 19, 20))
    monkeypatch.setattr("segarch.cascade.detect_box", lambda net, scan, config: box)
    segnet = build_segnet(_small_seg_cfg(small_config))
    with torch.no_grad():
        segnet.head.bias.copy_(torch.tensor([0.0, 0.0, 0.0, 10.0]))
        segnet.head.weight.zero_()
    result = run_cascade(small_scan, _never_detects(small_config), segnet, small_config)
    grown = box.grown(small_config.f_offset, small_scan.dims)
    assert result.detected == box and result.grown == grown
    inside = np.zeros(small_scan.dims, dtype=bool)
    inside[grown.slices()] = True
    assert np.all(result.labels.data[~inside] == 0)
    assert np.all(result.labels.data[inside] == 4)


def test_detect_box_raises_when_nothing_passes(small_scan, small_config):
    with pytest.raises(NoDetection) as caught:
        detect_box(_never_detects(small_config), small_scan, small_config)
    assert caught.value.exit_code == EXIT_DATA


def test_longest_slice_run_drops_isolated_hits():
    rect = Rect(4, 4, 9, 9)
    detections = [(z, rect, 0.9) for z in (10, 11, 12, 13)] + [(2, Rect(0, 0, 1, 1), 0.95), (20, rect, 0.3)]
    kept = longest_slice_run(detections, 0.5)
    assert [z for z, _, _ in kept] == [10, 11, 12, 13]
    assert aggregate_detections(kept, 0.5) == Box3((4, 4, 10), (9, 9, 13))
    assert longest_slice_run(detections, 0.99) == []


def test_longest_slice_run_breaks_ties_by_score():
    rect = Rect(0, 0, 3, 3)
    detections = [(1, rect, 0.6), (2, rect, 0.6), (7, rect, 0.9), (8, rect, 0.8)]
    assert [z for z, _, _ in longest_slice_run(detections, 0.5)] == [7, 8]


def test_whole_z_widens_thin_boxes():
    thin = Box3((3, 4, 10), (9, 12, 11))
    assert whole_z(thin, (32, 32, 40), 4) == Box3((3, 4, 0), (9, 12, 39))
    thick = Box3((3, 4, 10), (9, 12, 13))
    assert whole_z(thick, (32, 32, 40), 4) == thick


def test_cascade_widens_thin_detection_to_full_z(small_scan, small_config, monkeypatch):
    thin = Box3((10, 11, 15), (18, 19, 16))
    monkeypatch.setattr("segarch.cascade.detect_box", lambda net, scan, config: thin)
    segnet = build_segnet(_small_seg_cfg(small_config))
    result = run_cascade(small_scan, _never_detects(small_config), segnet, small_config)
    assert result.detected == thin and not result.fell_back
    nz = small_scan.dims[2]
    assert (result.grown.min[2], result.grown.max[2]) == (0, nz - 1)
    assert result.grown.min[:2] == (10 - small_config.f_offset, 11 - small_config.f_offset)


def test_infer_cascade_accepts_checkpoints(small_scan, small_config):
    seed_everything(0)
    seg_cfg = _small_seg_cfg(small_config)
    segnet = build_segnet(seg_cfg)
    detector = _never_detects(small_config)
    from_nets = infer_cascade(small_scan, detector, segnet, small_config)
    from_checkpoints = infer_cascade(small_scan, Checkpoint.from_module(detector, detector.cfg.to_meta()),
                                     Checkpoint.from_module(segnet, seg_cfg.to_meta()), small_config)
    assert np.array_equal(from_nets.data, from_checkpoints.data)
    assert from_nets.spacing == small_scan.spacing


@pytest.mark.slow
def test_segnet_overfits_synthetic_patches(small_spec):
    config = RunConfig(patch_dims=(16, 16, 16), channels=(8, 12, 16, 20), convs_per_stage=1,
                       iterations=300, lr=0.1, momentum=0.9, batch_size=4, log_every=50)
    samples = seg_samples(make_synthetic_dataset(8, seed=0, spec=small_spec), config)
    _, report = train_seg(samples, config)
    assert report.losses[299] < report.losses[9]
    assert report.train_metrics["WT"] > 0.9


@pytest.mark.slow
def test_cascade_trains_and_generalizes_on_synthetic_scans():
    spec = SyntheticSpec(dims=(32, 32, 32), radius_range=(5.0, 7.0))
    train_scans = make_synthetic_dataset(8, seed=0, spec=spec, prefix="train")
    test_scans = make_synthetic_dataset(4, seed=1, spec=spec, prefix="test")
    config = RunConfig(
        patch_dims=(24, 24, 24), channels=(8, 12, 16, 20), convs_per_stage=1, f_offset=4,
        scales=(0.5, 1.0), window_size=(16, 16), proposals_per_window=60, anchor_sizes=(6, 12),
        detector_channels=8, iterations=300, lr=0.05, momentum=0.9, batch_size=4, log_every=100,
    )
    source = OracleProposalSource(config.proposals_per_window)
    detector, _ = train_detector(detector_samples(train_scans, config, source), config)
    segnet, seg_report = train_seg(seg_samples(train_scans, config), config)
    assert seg_report.train_metrics["WT"] > 0.95

    test_dice = []
    for scan in test_scans:
        predicted = infer_cascade(MultiModalScan(scan.scan_id, scan.modalities), detector, segnet, config)
        assert set(np.unique(predicted.data)) <= {0, 1, 2, 4}
        regions = decompose_regions(predicted)
        assert np.all(regions.et.data <= regions.tc.data)
        assert np.all(regions.tc.data <= regions.wt.data)
        test_dice.append(evaluate_scan(predicted, scan.labels, scan_id=scan.scan_id).regions["WT"].dice)
    assert np.mean(test_dice) > 0.85
