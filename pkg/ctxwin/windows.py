"""Contextual windows - grid enumeration, positive windows and greedy negative mining"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import WindowLargerThanImage
from .geometry import Rect

logger = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"
WINDOW_KINDS = (POSITIVE, NEGATIVE)


@dataclass(frozen=True)
class Window:
    """A contextual rectangle on one scale"""

    rect: Rect
    scale_id: int
    kind: str


def _offsets(extent: int, window: int, stride: int) -> List[int]:
    starts = list(range(0, extent - window + 1, stride))
    if starts[-1] + window < extent:
        starts.append(extent - window)
    return starts


def enumerate_windows(scaled_dims: Tuple[int, int], window_dims: Tuple[int, int], stride: int = 4) -> List[Rect]:
    """
    Tile a scaled slice with k1 x k2 windows every ``stride`` pixels

    The last row and column are shifted inward so that every pixel is covered.

    Args:
        scaled_dims: (w, h) of the scaled slice
        window_dims: (k1, k2)
        stride: K, the interval between window origins

    Returns:
        Rects in raster order (y outer, x inner)
    """
    w, h = scaled_dims
    k1, k2 = window_dims
    if k1 > w or k2 > h:
        raise WindowLargerThanImage(f"window {k1}x{k2} does not fit a {w}x{h} slice")
    if stride < 1:
        raise WindowLargerThanImage(f"window stride must be >= 1, got {stride}")
    return [
        Rect(x0, y0, x0 + k1 - 1, y0 + k2 - 1)
        for y0 in _offsets(h, k2, stride)
        for x0 in _offsets(w, k1, stride)
    ]


def positive_windows(gt_boxes: Sequence[Rect], scaled_dims: Tuple[int, int], scale_id: int = 0) -> List[Window]:
    """One window per ground-truth box: same center, twice the size, clipped to the slice"""
    windows = []
    for gt in gt_boxes:
        grow_x, grow_y = gt.width, gt.height
        rect = Rect(
            gt.x0 - grow_x // 2,
            gt.y0 - grow_y // 2,
            gt.x1 + (grow_x - grow_x // 2),
            gt.y1 + (grow_y - grow_y // 2),
        ).clipped(scaled_dims)
        windows.append(Window(rect, scale_id, POSITIVE))
    return windows


def _centers(proposals) -> np.ndarray:
    return np.array([p.rect.center for p in proposals], dtype=np.float64).reshape(-1, 2)


def _rect_array(rects: Sequence[Rect]) -> np.ndarray:
    return np.array([r.as_tuple() for r in rects], dtype=np.float64).reshape(-1, 4)


def coverage_matrix(rects: Sequence[Rect], centers: np.ndarray) -> np.ndarray:
    """Boolean (len(rects), len(centers)) matrix of center-in-rect"""
    boxes = _rect_array(rects)
    cx, cy = centers[:, 0], centers[:, 1]
    return ((boxes[:, 0:1] <= cx) & (cx <= boxes[:, 2:3])
            & (boxes[:, 1:2] <= cy) & (cy <= boxes[:, 3:4]))


def outside_positive(proposals, positives: Sequence[Window]):
    """Proposals whose center lies in no positive window"""
    if not proposals or not positives:
        return list(proposals)
    covered = coverage_matrix([w.rect for w in positives], _centers(proposals)).any(axis=0)
    return [p for p, c in zip(proposals, covered) if not c]


def negative_windows(proposals, positives: Sequence[Window], grid: Sequence[Union[Rect, Window]],
                     min_proposals: int = 2, scale_id: int = 0) -> List[Window]:
    """
    Greedily pick grid windows covering leftover proposals

    Proposals centered in a positive window are dropped first. Then the grid
    window covering the most still-uncovered proposal centers is picked (first
    in raster order on ties) for as long as that count is at least ``min_proposals``.

    Args:
        proposals: Proposals on this scale
        positives: Positive windows on this scale
        grid: Candidate rects (or windows) in raster order
        min_proposals: P
        scale_id: Scale stamped on the returned windows

    Returns:
        Negative windows in selection order
    """
    remaining = outside_positive(proposals, positives)
    if not remaining or not grid:
        return []
    rects = [g.rect if isinstance(g, Window) else g for g in grid]
    cover = coverage_matrix(rects, _centers(remaining))
    uncovered = np.ones(len(remaining), dtype=bool)

    picked: List[Window] = []
    while True:
        counts = (cover & uncovered).sum(axis=1)
        best = int(np.argmax(counts))
        if counts[best] < min_proposals:
            break
        picked.append(Window(rects[best], scale_id, NEGATIVE))
        uncovered &= ~cover[best]
    logger.debug(f"Scale {scale_id}: {len(picked)} negative windows from {len(remaining)} leftover proposals")
    return picked
