"""Label to region decomposition and mask bounding boxes"""
from typing import Optional

import numpy as np

from .errors import IllegalLabel, UnsupportedDtype
from .volume import LEGAL_LABELS, Box3, RegionMasks, Volume

# BRATS coding: 1 necrotic/non-enhancing core, 2 edema, 4 enhancing tumor
WT_LABELS = (1, 2, 4)
TC_LABELS = (1, 4)
ET_LABELS = (4,)


def check_labels(labels: np.ndarray) -> None:
    """Raise IllegalLabel for the first voxel (x-fastest order) outside {0, 1, 2, 4}"""
    illegal = ~np.isin(labels, LEGAL_LABELS)
    if illegal.any():
        flat = np.flatnonzero(illegal.ravel(order="F"))[0]
        index = np.unravel_index(flat, labels.shape, order="F")
        raise IllegalLabel(labels[index], index)


def decompose_regions(labels: Volume) -> RegionMasks:
    """
    Split a label map into nested WT / TC / ET masks

    Args:
        labels: uint8 label volume with values in {0, 1, 2, 4}

    Returns:
        RegionMasks; et within tc within wt holds by construction
    """
    if labels.dtype != np.uint8:
        raise UnsupportedDtype(f"label volumes must be uint8, got {labels.dtype}")
    data = labels.data
    check_labels(data)

    def mask(values):
        return Volume(np.isin(data, values).astype(np.uint8), labels.spacing)

    return RegionMasks(wt=mask(WT_LABELS), tc=mask(TC_LABELS), et=mask(ET_LABELS))


def bbox_of_array(mask: np.ndarray) -> Optional[Box3]:
    nonzero = np.nonzero(mask)
    if nonzero[0].size == 0:
        return None
    return Box3(tuple(int(a.min()) for a in nonzero), tuple(int(a.max()) for a in nonzero))


def bbox_of_mask(mask: Volume) -> Optional[Box3]:
    """Tightest box around the nonzero voxels, or None for an empty mask"""
    return bbox_of_array(mask.data)
