"""Area-based overlap metrics from voxel confusion counts"""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from volcore.errors import DimsMismatch
from volcore.volume import Volume

MaskLike = Union[Volume, np.ndarray]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def predicted(self) -> int:
        return self.tp + self.fp

    @property
    def actual(self) -> int:
        return self.tp + self.fn


def as_mask(mask: MaskLike) -> np.ndarray:
    data = mask.data if isinstance(mask, Volume) else np.asarray(mask)
    return data.astype(bool)


def confusion_counts(pred: MaskLike, truth: MaskLike) -> ConfusionCounts:
    """Tally tp/fp/tn/fn over every voxel of two same-grid binary masks"""
    p, t = as_mask(pred), as_mask(truth)
    if p.shape != t.shape:
        raise DimsMismatch(f"prediction dims {p.shape} differ from truth dims {t.shape}")
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return ConfusionCounts(tp, fp, int(p.size) - tp - fp - fn, fn)


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return None if denominator == 0 else numerator / denominator


def dice(counts: ConfusionCounts) -> float:
    """2tp / (2tp + fp + fn); 1.0 when prediction and truth are both empty"""
    denominator = 2 * counts.tp + counts.fp + counts.fn
    if denominator == 0:
        return 1.0
    return 2 * counts.tp / denominator


def sensitivity(counts: ConfusionCounts) -> Optional[float]:
    """tp / (tp + fn); None when the truth is empty"""
    return _ratio(counts.tp, counts.tp + counts.fn)


def specificity(counts: ConfusionCounts) -> Optional[float]:
    """tn / (tn + fp); None when the truth covers every voxel"""
    return _ratio(counts.tn, counts.tn + counts.fp)


def precision(counts: ConfusionCounts) -> Optional[float]:
    """tp / (tp + fp); None when the prediction is empty"""
    return _ratio(counts.tp, counts.tp + counts.fp)


def jaccard(counts: ConfusionCounts) -> float:
    d = dice(counts)
    return d / (2.0 - d)


def f1(counts: ConfusionCounts) -> Optional[float]:
    p, s = precision(counts), sensitivity(counts)
    if p is None or s is None or p + s == 0:
        return None
    return 2 * p * s / (p + s)


def mask_dice(pred: MaskLike, truth: MaskLike) -> float:
    return dice(confusion_counts(pred, truth))
