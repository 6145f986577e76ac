"""Volume data model - voxel grids, multi-modal scans, region masks and boxes"""
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import DimsMismatch, InvalidVolume, UnsupportedDtype

MODALITIES = ("FLAIR", "T1", "T1c", "T2")
LEGAL_LABELS = (0, 1, 2, 4)
SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.uint8))
DEFAULT_SPACING = (1.0, 1.0, 1.0)

Dims = Tuple[int, int, int]
Spacing = Tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class Volume:
    """
    A 3D scalar voxel grid indexed ``data[x, y, z]``.

    The array is made read-only on construction. Spacing is stored at float32
    precision so that it survives a trip through the VVL1 header unchanged.
    """

    data: np.ndarray
    spacing: Spacing = DEFAULT_SPACING

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype not in SUPPORTED_DTYPES:
            raise UnsupportedDtype(f"volume dtype must be float32 or uint8, got {data.dtype}")
        if data.ndim != 3 or min(data.shape) < 1:
            raise InvalidVolume(f"volume needs three extents >= 1, got shape {data.shape}")
        spacing = tuple(float(np.float32(s)) for s in self.spacing)
        if len(spacing) != 3 or min(spacing) <= 0:
            raise InvalidVolume(f"spacing must be three positive values, got {self.spacing}")
        if data.flags.writeable:
            data = data.copy()
            data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> Dims:
        return tuple(int(n) for n in self.data.shape)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def same_grid(self, other: "Volume") -> bool:
        return self.dims == other.dims and self.spacing == other.spacing

    def equals(self, other: "Volume") -> bool:
        """Bit-exact equality of grid, dtype and values"""
        return (
            self.same_grid(other)
            and self.dtype == other.dtype
            and self.data.tobytes() == other.data.tobytes()
        )


@dataclass(frozen=True)
class MultiModalScan:
    """Four aligned MRI modalities plus an optional label map"""

    scan_id: str
    modalities: Dict[str, Volume]
    labels: Optional[Volume] = None

    def __post_init__(self):
        if set(self.modalities) != set(MODALITIES):
            raise InvalidVolume(
                f"scan {self.scan_id} needs modalities {MODALITIES}, got {sorted(self.modalities)}"
            )
        reference = self.modalities[MODALITIES[0]]
        members = [self.modalities[m] for m in MODALITIES[1:]]
        if self.labels is not None:
            members.append(self.labels)
        for member in members:
            if not reference.same_grid(member):
                raise DimsMismatch(
                    f"scan {self.scan_id}: member grid {member.dims}/{member.spacing} "
                    f"differs from {reference.dims}/{reference.spacing}"
                )

    @property
    def dims(self) -> Dims:
        return self.modalities[MODALITIES[0]].dims

    @property
    def spacing(self) -> Spacing:
        return self.modalities[MODALITIES[0]].spacing

    def stacked(self) -> np.ndarray:
        """Modalities as a float32 (4, nx, ny, nz) array in FLAIR, T1, T1c, T2 order"""
        return np.stack([self.modalities[m].data.astype(np.float32) for m in MODALITIES])


@dataclass(frozen=True)
class RegionMasks:
    """Binary whole tumor / tumor core / enhancing tumor masks (et within tc within wt)"""

    wt: Volume
    tc: Volume
    et: Volume

    def items(self):
        return (("WT", self.wt), ("TC", self.tc), ("ET", self.et))


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box of inclusive voxel indices"""

    min: Dims
    max: Dims

    def __post_init__(self):
        lo = tuple(int(v) for v in self.min)
        hi = tuple(int(v) for v in self.max)
        if len(lo) != 3 or len(hi) != 3 or any(a > b for a, b in zip(lo, hi)):
            raise InvalidVolume(f"box min {lo} must be <= max {hi} on every axis")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extent(self) -> Dims:
        return tuple(b - a + 1 for a, b in zip(self.min, self.max))

    @classmethod
    def full(cls, dims: Dims) -> "Box3":
        return cls((0, 0, 0), tuple(n - 1 for n in dims))

    def within(self, dims: Dims) -> bool:
        return all(a >= 0 for a in self.min) and all(b < n for b, n in zip(self.max, dims))

    def contains(self, other: "Box3") -> bool:
        return all(a <= c for a, c in zip(self.min, other.min)) and all(
            b >= d for b, d in zip(self.max, other.max)
        )

    def grown(self, offset: int, dims: Dims) -> "Box3":
        """Grow by ``offset`` voxels on both sides of every axis, clipped to ``dims``"""
        lo = tuple(max(0, a - offset) for a in self.min)
        hi = tuple(min(n - 1, b + offset) for b, n in zip(self.max, dims))
        return Box3(lo, hi)

    def slices(self) -> Tuple[slice, slice, slice]:
        return tuple(slice(a, b + 1) for a, b in zip(self.min, self.max))
