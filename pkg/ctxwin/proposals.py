"""Proposals - oracle proposal source, label assignment and 3D aggregation"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np

from volcore.volume import Box3
from .geometry import Rect, encode_deltas, iou
from .windows import POSITIVE, NEGATIVE, Window, coverage_matrix

logger = logging.getLogger(__name__)

JITTER = 0.25


@dataclass(frozen=True)
class Proposal:
    """Scored candidate box on a scaled slice"""

    rect: Rect
    score: float
    slice_z: int = 0
    scale_id: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"proposal score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class LabeledProposal:
    """A proposal with its training label; positives carry (dx, dy, dw, dh)"""

    proposal: Proposal
    label: str
    regression_target: Optional[Tuple[float, float, float, float]] = None

    def __post_init__(self):
        if (self.label == POSITIVE) != (self.regression_target is not None):
            raise ValueError("regression_target is required for positives and forbidden for negatives")


class ProposalSource(Protocol):
    """Anything that proposes boxes on one scaled slice"""

    def __call__(self, image: np.ndarray, gt_boxes: Sequence[Rect], scale_id: int,
                 slice_z: int, seed: int) -> List[Proposal]:
        ...


def _uniform_rect(rng: np.random.Generator, dims: Tuple[int, int]) -> Rect:
    w, h = dims
    bw = int(rng.integers(1, max(2, w // 2) + 1))
    bh = int(rng.integers(1, max(2, h // 2) + 1))
    bw, bh = min(bw, w), min(bh, h)
    x0 = int(rng.integers(0, w - bw + 1))
    y0 = int(rng.integers(0, h - bh + 1))
    return Rect(x0, y0, x0 + bw - 1, y0 + bh - 1)


def _jittered_rect(rng: np.random.Generator, gt: Rect, dims: Tuple[int, int]) -> Rect:
    cx, cy = gt.center
    cx += rng.uniform(-JITTER, JITTER) * gt.width
    cy += rng.uniform(-JITTER, JITTER) * gt.height
    bw = max(1.0, gt.width * (1.0 + rng.uniform(-JITTER, JITTER)))
    bh = max(1.0, gt.height * (1.0 + rng.uniform(-JITTER, JITTER)))
    x0 = int(round(cx - (bw - 1) / 2.0))
    y0 = int(round(cy - (bh - 1) / 2.0))
    x1 = max(x0, int(round(cx + (bw - 1) / 2.0)))
    y1 = max(y0, int(round(cy + (bh - 1) / 2.0)))
    w, h = dims
    x0, y0 = min(max(x0, 0), w - 1), min(max(y0, 0), h - 1)
    x1, y1 = min(max(x1, x0), w - 1), min(max(y1, y0), h - 1)
    return Rect(x0, y0, x1, y1)


def oracle_proposals(gt_boxes: Sequence[Rect], rng_seed: int, count: int = 300,
                     dims: Tuple[int, int] = (64, 64), slice_z: int = 0, scale_id: int = 0) -> List[Proposal]:
    """
    Stand-in for a lightly trained RPN: a seeded mix of gt-jittered and uniform boxes

    Args:
        gt_boxes: Ground truth on this scaled slice; empty means all-uniform
        rng_seed: Only source of randomness
        count: Number of proposals
        dims: (w, h) of the scaled slice
        slice_z: Source slice index stamped on every proposal
        scale_id: Scale stamped on every proposal

    Returns:
        Exactly ``count`` proposals
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(rng_seed)
    proposals = []
    for _ in range(count):
        if gt_boxes and rng.random() < 0.5:
            gt = gt_boxes[int(rng.integers(len(gt_boxes)))]
            rect = _jittered_rect(rng, gt, dims)
        else:
            rect = _uniform_rect(rng, dims)
        proposals.append(Proposal(rect, float(rng.random()), slice_z, scale_id))
    return proposals


class OracleProposalSource:
    """ProposalSource backed by oracle_proposals"""

    def __init__(self, count: int = 300):
        self.count = count

    def __call__(self, image, gt_boxes, scale_id, slice_z, seed):
        return oracle_proposals(gt_boxes, seed, self.count, image.shape[:2], slice_z, scale_id)


def assign_proposal_labels(proposals: Sequence[Proposal], gt_boxes: Sequence[Rect], threshold: float = 0.5,
                           windows: Optional[Sequence[Window]] = None) -> List[LabeledProposal]:
    """
    Label proposals by IoU with ground truth

    Args:
        proposals: Candidates on one scale
        gt_boxes: Ground truth on the same scale
        threshold: Positive iff the best IoU is strictly greater
        windows: Positive and negative windows; proposals centered in none of
            them are dropped. ``None`` keeps every proposal.

    Returns:
        Labeled proposals in input order; positives carry regression targets
            toward their best-overlapping gt box
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    kept = list(proposals)
    if windows is not None:
        if not windows or not kept:
            return []
        centers = np.array([p.rect.center for p in kept], dtype=np.float64).reshape(-1, 2)
        inside = coverage_matrix([w.rect for w in windows], centers).any(axis=0)
        kept = [p for p, ok in zip(kept, inside) if ok]

    labeled = []
    for proposal in kept:
        overlaps = [iou(proposal.rect, gt) for gt in gt_boxes]
        best = int(np.argmax(overlaps)) if overlaps else -1
        if best >= 0 and overlaps[best] > threshold:
            target = encode_deltas(proposal.rect, gt_boxes[best])
            labeled.append(LabeledProposal(proposal, POSITIVE, target))
        else:
            labeled.append(LabeledProposal(proposal, NEGATIVE))
    return labeled


def aggregate_detections(slice_boxes: Sequence[Tuple[int, Rect, float]], score_floor: float = 0.5) -> Optional[Box3]:
    """Lift per-slice detections (slice_z, rect, score) to one 3D box; None when nothing passes"""
    kept = [(z, r) for z, r, s in slice_boxes if s >= score_floor]
    if not kept:
        return None
    return Box3(
        (min(r.x0 for _, r in kept), min(r.y0 for _, r in kept), min(z for z, _ in kept)),
        (max(r.x1 for _, r in kept), max(r.y1 for _, r in kept), max(z for z, _ in kept)),
    )
