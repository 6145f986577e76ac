"""Synthetic sphere-tumor scans for desk-scale training and tests"""
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .volume import MODALITIES, MultiModalScan, Volume

logger = logging.getLogger(__name__)

# intensity offsets added inside each label, per modality (FLAIR, T1, T1c, T2)
LABEL_CONTRAST = {
    2: (1.0, -0.2, 0.0, 0.6),   # edema: bright on FLAIR
    1: (1.0, -0.6, -0.3, 1.2),  # necrotic core: bright on T2, dark on T1
    4: (1.0, -0.2, 1.4, 0.8),   # enhancing rim: bright on T1c
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape and appearance parameters of a synthetic scan"""

    dims: Sequence[int] = (64, 64, 64)
    radius_range: Sequence[float] = (7.0, 12.0)
    contrast: float = 1.0
    noise: float = 0.1
    core_fraction: float = 0.4
    rim_fraction: float = 0.65


def make_synthetic_scan(scan_id: str, rng: np.random.Generator, spec: SyntheticSpec = SyntheticSpec()) -> MultiModalScan:
    """
    Build one scan with a spherical tumor inside an ellipsoidal brain

    The tumor is an edema ball (label 2) around an enhancing shell (label 4)
    around a necrotic core (label 1), so the WT/TC/ET regions are nested.

    Args:
        scan_id: Identifier stored on the scan
        rng: Source of all randomness
        spec: Geometry and contrast settings

    Returns:
        MultiModalScan with labels
    """
    dims = tuple(int(n) for n in spec.dims)
    radius = float(rng.uniform(*spec.radius_range))
    margin = np.array([radius + 2.0] * 3)
    upper = np.array(dims) - 1 - margin
    center = rng.uniform(np.minimum(margin, upper), np.maximum(margin, upper))

    x, y, z = np.meshgrid(*[np.arange(n, dtype=np.float64) for n in dims], indexing="ij")
    dist = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)

    labels = np.zeros(dims, dtype=np.uint8)
    labels[dist <= radius] = 2
    labels[dist <= spec.rim_fraction * radius] = 4
    labels[dist <= spec.core_fraction * radius] = 1

    mid = (np.array(dims) - 1) / 2.0
    half = np.array(dims) / 2.0
    brain = (((x - mid[0]) / half[0]) ** 2 + ((y - mid[1]) / half[1]) ** 2
             + ((z - mid[2]) / half[2]) ** 2) <= 1.0

    modalities = {}
    for channel, name in enumerate(MODALITIES):
        image = np.where(brain, 1.0, 0.0)
        for label, offsets in LABEL_CONTRAST.items():
            image = image + (labels == label) * offsets[channel] * spec.contrast
        image = image + rng.normal(0.0, spec.noise, size=dims)
        modalities[name] = Volume(image.astype(np.float32))

    logger.debug(f"Synthetic scan {scan_id}: radius={radius:.1f} center={np.round(center, 1).tolist()}")
    return MultiModalScan(scan_id=scan_id, modalities=modalities, labels=Volume(labels))


def make_synthetic_dataset(count: int, seed: int, spec: SyntheticSpec = SyntheticSpec(),
                           prefix: str = "synth") -> List[MultiModalScan]:
    """``count`` scans named ``{prefix}_000``... from one seeded generator"""
    rng = np.random.default_rng(seed)
    return [make_synthetic_scan(f"{prefix}_{i:03d}", rng, spec) for i in range(count)]
