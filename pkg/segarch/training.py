"""Training loops for the segmentation network and the slice detector"""
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from autonet import functions
from autonet.checkpoint import Checkpoint
from autonet.runtime import seed_everything
from ctxwin.pipeline import scan_windows
from ctxwin.proposals import ProposalSource
from segmetrics.area import mask_dice
from utils.config import RunConfig
from utils.errors import EmptyDataset, NumericFailure
from volcore.regions import ET_LABELS, TC_LABELS, WT_LABELS, bbox_of_array
from volcore.resample import crop_resize, crop_resize_labels, zscore
from volcore.volume import Box3, MultiModalScan
from .config import DetectorConfig, SegNetConfig
from .detector import DetectionSample, Detector, build_detector, detection_samples
from .segnet import SegNet, build_segnet, nested_labels, region_probs

logger = logging.getLogger(__name__)

REGION_LABELS = (("WT", WT_LABELS), ("TC", TC_LABELS), ("ET", ET_LABELS))


@dataclass
class TrainReport:
    """Loss curve and final scores of one training run"""

    kind: str
    seed: int
    iterations: int
    lr: float
    momentum: float
    losses: List[float] = field(default_factory=list)
    train_metrics: Dict[str, float] = field(default_factory=dict)
    val_metrics: Dict[str, float] = field(default_factory=dict)
    wall_clock: Optional[float] = None

    def to_dict(self, include_wall_clock: bool = True) -> dict:
        data = {
            "kind": self.kind,
            "seed": self.seed,
            "iterations": self.iterations,
            "lr": self.lr,
            "momentum": self.momentum,
            "losses": self.losses,
            "train_metrics": self.train_metrics,
            "val_metrics": self.val_metrics,
        }
        if include_wall_clock:
            data["wall_clock"] = self.wall_clock
        return data

    def write(self, path: Union[str, Path], include_wall_clock: bool = True) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(self.to_dict(include_wall_clock), indent=2, sort_keys=True)
        path.write_text(text + "\n", encoding="utf-8")
        return path


@dataclass(frozen=True)
class SegSample:
    patch: np.ndarray   # (4, W, H, D) float32, z-scored per channel
    labels: np.ndarray  # (W, H, D) uint8


def tumor_box(scan: MultiModalScan) -> Box3:
    """Ground truth WT bounding box, or the whole volume for tumor-free scans"""
    box = bbox_of_array(np.isin(scan.labels.data, WT_LABELS)) if scan.labels is not None else None
    return box if box is not None else Box3.full(scan.dims)


def normalize_patch(patch: np.ndarray) -> np.ndarray:
    return np.stack([zscore(channel) for channel in patch]).astype(np.float32)


def seg_sample(scan: MultiModalScan, config: RunConfig) -> SegSample:
    box = tumor_box(scan)
    patch = crop_resize(scan, box, config.f_offset, config.patch_dims)
    labels = crop_resize_labels(scan.labels, box, config.f_offset, config.patch_dims)
    return SegSample(normalize_patch(patch), labels.astype(np.uint8))


def seg_samples(scans: Sequence[MultiModalScan], config: RunConfig) -> List[SegSample]:
    return [seg_sample(scan, config) for scan in scans if scan.labels is not None]


def detector_samples(scans: Sequence[MultiModalScan], config: RunConfig, source: ProposalSource,
                     det_cfg: Optional[DetectorConfig] = None) -> List[DetectionSample]:
    det_cfg = det_cfg or DetectorConfig.from_run_config(config)
    samples = []
    for scan in scans:
        samples.extend(detection_samples(scan_windows(scan, config, source), det_cfg))
    return samples


def region_targets(labels: np.ndarray) -> np.ndarray:
    """(3, ...) float32 WT / TC / ET masks"""
    return np.stack([np.isin(labels, values) for _, values in REGION_LABELS]).astype(np.float32)


def seg_loss(logits: torch.Tensor, targets: torch.Tensor, smooth: float) -> torch.Tensor:
    """Mean soft dice loss over the WT, TC and ET probability maps; targets (N, 3, X, Y, Z)"""
    regions = region_probs(torch.softmax(logits, dim=1))
    losses = [functions.soft_dice(region, targets[:, index], smooth) for index, region in enumerate(regions)]
    return sum(losses) / len(losses)


def _batches(count: int, batch_size: int, generator: torch.Generator) -> List[int]:
    picked = torch.randperm(count, generator=generator)[:min(batch_size, count)]
    return sorted(int(i) for i in picked)


def _check_finite(loss: torch.Tensor, iteration: int) -> float:
    value = float(loss.detach())
    if not math.isfinite(value):
        raise NumericFailure(f"loss became non-finite ({value}) at iteration {iteration}")
    return value


def predict_patch(net: SegNet, patch: np.ndarray) -> np.ndarray:
    """Nested label prediction for one (4, W, H, D) patch"""
    with torch.no_grad():
        dtype = next(net.parameters()).dtype
        x = torch.from_numpy(np.ascontiguousarray(patch)).to(dtype).unsqueeze(0)
        probs = torch.softmax(net(x), dim=1)
    return nested_labels(probs)[0]


def seg_scores(net: SegNet, samples: Sequence[SegSample]) -> Dict[str, float]:
    """Mean hard dice per region over samples"""
    if not samples:
        return {}
    totals = {name: 0.0 for name, _ in REGION_LABELS}
    for sample in samples:
        predicted = predict_patch(net, sample.patch)
        for name, values in REGION_LABELS:
            totals[name] += mask_dice(np.isin(predicted, values), np.isin(sample.labels, values))
    return {name: total / len(samples) for name, total in totals.items()}


def train_seg(samples: Sequence[SegSample], config: RunConfig, seed: Optional[int] = None,
              seg_cfg: Optional[SegNetConfig] = None,
              val_samples: Sequence[SegSample] = ()) -> Tuple[Checkpoint, TrainReport]:
    """
    Train the segmentation network with momentum SGD on the mean region soft dice loss

    Args:
        samples: Training patches and labels
        config: lr, momentum, iterations, batch_size, epsilon and log_every
        seed: Overrides ``config.seed``
        seg_cfg: Network shape; derived from ``config`` when omitted
        val_samples: Held-out patches scored after training

    Returns:
        (checkpoint with the network meta, TrainReport)
    """
    if not samples:
        raise EmptyDataset("train_seg needs at least one sample")
    seed = config.seed if seed is None else seed
    seg_cfg = seg_cfg or SegNetConfig.from_run_config(config)
    generator = seed_everything(seed, config.deterministic, config.jobs)
    net = build_segnet(seg_cfg)
    optimizer = torch.optim.SGD(net.parameters(), lr=config.lr, momentum=config.momentum)

    patches = torch.from_numpy(np.stack([s.patch for s in samples]))
    targets = torch.from_numpy(np.stack([region_targets(s.labels) for s in samples]))
    report = TrainReport("seg", seed, config.iterations, config.lr, config.momentum)
    started = time.perf_counter()
    net.train()
    for iteration in range(config.iterations):
        batch = _batches(len(samples), seg_cfg.batch_size, generator)
        optimizer.zero_grad()
        loss = seg_loss(net(patches[batch]), targets[batch], config.epsilon)
        report.losses.append(_check_finite(loss, iteration))
        loss.backward()
        optimizer.step()
        if (iteration + 1) % config.log_every == 0:
            logger.info(f"seg iteration {iteration + 1}/{config.iterations} loss {report.losses[-1]:.5f}")

    net.eval()
    report.train_metrics = seg_scores(net, samples)
    report.val_metrics = seg_scores(net, val_samples)
    report.wall_clock = time.perf_counter() - started
    logger.info(f"Segnet trained: train dice {report.train_metrics}")
    return Checkpoint.from_module(net, seg_cfg.to_meta()), report


def _detector_inputs(sample: DetectionSample, dtype: torch.dtype):
    image = torch.from_numpy(np.ascontiguousarray(sample.image)).to(dtype).unsqueeze(0)
    anchors = torch.tensor([t.anchor for t in sample.targets], dtype=torch.long)
    xs = torch.tensor([t.x for t in sample.targets], dtype=torch.long)
    ys = torch.tensor([t.y for t in sample.targets], dtype=torch.long)
    labels = torch.tensor([t.label for t in sample.targets], dtype=torch.long)
    return image, anchors, xs, ys, labels


def detector_loss(net: Detector, sample: DetectionSample) -> Tuple[torch.Tensor, int]:
    """
    Softmax cross-entropy over the sample's labeled anchors plus a smooth L1
    box loss on positives only

    Returns:
        (loss, number of correctly classified anchors)
    """
    dtype = next(net.parameters()).dtype
    image, anchors, xs, ys, labels = _detector_inputs(sample, dtype)
    logits, deltas = net.split(net(image))
    picked = logits[0, anchors, :, xs, ys]
    loss = functions.cross_entropy(picked, labels)
    positive = labels == 1
    if bool(positive.any()):
        predicted = deltas[0, anchors[positive], :, xs[positive], ys[positive]]
        wanted = torch.tensor([t.deltas for t in sample.targets if t.label == 1], dtype=dtype)
        loss = loss + F.smooth_l1_loss(predicted, wanted, reduction="sum", beta=1.0) / int(positive.sum())
    correct = int((picked.detach().argmax(dim=1) == labels).sum())
    return loss, correct


def detector_accuracy(net: Detector, samples: Sequence[DetectionSample]) -> Dict[str, float]:
    if not samples:
        return {}
    correct = total = 0
    with torch.no_grad():
        for sample in samples:
            _, hits = detector_loss(net, sample)
            correct += hits
            total += len(sample.targets)
    return {"accuracy": correct / total}


def train_detector(samples: Sequence[DetectionSample], config: RunConfig, seed: Optional[int] = None,
                   det_cfg: Optional[DetectorConfig] = None,
                   val_samples: Sequence[DetectionSample] = ()) -> Tuple[Checkpoint, TrainReport]:
    """Train the slice detector on labeled proposals; weights are shared across scales"""
    if not samples or not any(s.targets for s in samples):
        raise EmptyDataset("train_detector needs at least one labeled proposal")
    seed = config.seed if seed is None else seed
    det_cfg = det_cfg or DetectorConfig.from_run_config(config)
    generator = seed_everything(seed, config.deterministic, config.jobs)
    net = build_detector(det_cfg)
    optimizer = torch.optim.SGD(net.parameters(), lr=config.lr, momentum=config.momentum)

    report = TrainReport("detector", seed, config.iterations, config.lr, config.momentum)
    started = time.perf_counter()
    for iteration in range(config.iterations):
        batch = _batches(len(samples), config.batch_size, generator)
        optimizer.zero_grad()
        loss = sum(detector_loss(net, samples[i])[0] for i in batch) / len(batch)
        report.losses.append(_check_finite(loss, iteration))
        loss.backward()
        optimizer.step()
        if (iteration + 1) % config.log_every == 0:
            logger.info(f"detector iteration {iteration + 1}/{config.iterations} loss {report.losses[-1]:.5f}")

    report.train_metrics = detector_accuracy(net, samples)
    report.val_metrics = detector_accuracy(net, val_samples)
    report.wall_clock = time.perf_counter() - started
    logger.info(f"Detector trained: {report.train_metrics}")
    return Checkpoint.from_module(net, det_cfg.to_meta()), report
