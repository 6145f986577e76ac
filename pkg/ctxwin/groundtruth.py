"""Per-slice ground truth boxes from label volumes"""
from typing import List

import numpy as np

from volcore.regions import WT_LABELS, bbox_of_array
from volcore.volume import Volume

from .geometry import Rect


def slice_gt_rects(labels: Volume, slice_z: int) -> List[Rect]:
    """The union of WT, TC and ET on axial slice ``slice_z`` as at most one rect"""
    union = np.isin(labels.data[:, :, slice_z], WT_LABELS)
    nonzero = np.nonzero(union)
    if nonzero[0].size == 0:
        return []
    return [Rect(nonzero[0].min(), nonzero[1].min(), nonzero[0].max(), nonzero[1].max())]


def tumor_slices(labels: Volume) -> List[int]:
    """Axial slice indices that contain any tumor voxel"""
    box = bbox_of_array(np.isin(labels.data, WT_LABELS))
    if box is None:
        return []
    return list(range(box.min[2], box.max[2] + 1))
