"""Surface-based metrics - Hausdorff distance and average symmetric surface distance"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import binary_erosion, generate_binary_structure
from scipy.spatial import cKDTree

from volcore.errors import DimsMismatch
from volcore.volume import DEFAULT_SPACING
from .area import MaskLike, as_mask
from .errors import EmptySurface

logger = logging.getLogger(__name__)

KDTREE = "kdtree"
EXHAUSTIVE = "exhaustive"
METHODS = (KDTREE, EXHAUSTIVE)


@dataclass(frozen=True, eq=False)
class SurfaceSet:
    """Boundary voxel indices (M, 3) of a mask and the grid spacing they live on"""

    coords: np.ndarray
    spacing: Sequence[float] = DEFAULT_SPACING

    def __len__(self) -> int:
        return int(self.coords.shape[0])

    @property
    def points(self) -> np.ndarray:
        """Physical voxel-center positions"""
        return self.coords.astype(np.float64) * np.asarray(self.spacing, dtype=np.float64)


def surface_voxels(mask: MaskLike, spacing: Optional[Sequence[float]] = None) -> SurfaceSet:
    """
    Foreground voxels with at least one 6-connected background or out-of-volume neighbour

    Args:
        mask: Binary mask (Volume or array)
        spacing: Grid spacing; taken from the Volume when omitted
    """
    if spacing is None:
        spacing = getattr(mask, "spacing", DEFAULT_SPACING)
    data = as_mask(mask)
    footprint = generate_binary_structure(data.ndim, 1)
    border = data ^ binary_erosion(data, structure=footprint, iterations=1, border_value=0)
    coords = np.argwhere(border)
    return SurfaceSet(coords, tuple(float(s) for s in spacing))


def _check_pair(a: SurfaceSet, b: SurfaceSet) -> None:
    if len(a) == 0 or len(b) == 0:
        raise EmptySurface(f"surface distance needs two nonempty surfaces, got {len(a)} and {len(b)} voxels")
    if tuple(a.spacing) != tuple(b.spacing):
        raise DimsMismatch(f"surfaces live on different spacings {a.spacing} and {b.spacing}")


def directed_distances(source: SurfaceSet, target: SurfaceSet, method: str = KDTREE) -> np.ndarray:
    """Distance from every source point to its nearest target point"""
    _check_pair(source, target)
    if method == KDTREE:
        distances, _ = cKDTree(target.points).query(source.points, k=1)
        return np.asarray(distances, dtype=np.float64)
    if method == EXHAUSTIVE:
        src, dst = source.points, target.points
        out = np.empty(len(source), dtype=np.float64)
        for index, point in enumerate(src):
            out[index] = np.sqrt(((dst - point) ** 2).sum(axis=1)).min()
        return out
    raise ValueError(f"unknown distance method {method!r}, expected one of {METHODS}")


def hausdorff(pred: SurfaceSet, truth: SurfaceSet, percentile: Optional[float] = None,
              method: str = KDTREE) -> float:
    """
    Symmetric Hausdorff distance in physical units

    With ``percentile`` (e.g. 95) each directed distance is that percentile of
    its distance list instead of the maximum.
    """
    forward = directed_distances(pred, truth, method)
    backward = directed_distances(truth, pred, method)
    if percentile is None:
        return float(max(forward.max(), backward.max()))
    if not 0.0 <= percentile <= 100.0:
        raise ValueError(f"percentile must be in [0, 100], got {percentile}")
    return float(max(np.percentile(forward, percentile), np.percentile(backward, percentile)))


def assd(pred: SurfaceSet, truth: SurfaceSet, method: str = KDTREE) -> float:
    """Average symmetric surface distance: mean over both directed distance lists"""
    forward = directed_distances(pred, truth, method)
    backward = directed_distances(truth, pred, method)
    return float((forward.sum() + backward.sum()) / (forward.size + backward.size))
