"""Network configurations derived from the run config"""
from dataclasses import asdict, dataclass
from typing import Dict, Mapping, Tuple

from autonet.errors import CheckpointMismatch
from utils.config import RunConfig
from utils.errors import ConfigInvalid
from volcore.volume import MODALITIES

CLASS_LABELS = (0, 1, 2, 4)
OUTPUTS_PER_ANCHOR = 6  # objectness logit pair + 4 box deltas


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v)


@dataclass(frozen=True)
class SegNetConfig:
    """Segmentation network shape: stage channels, quarter-resolution dilations and patch extents"""

    in_channels: int = 4
    channels: Tuple[int, ...] = (32, 64, 128, 256)
    dilations: Tuple[int, ...] = (2, 3)
    atrous_kernel: int = 3
    convs_per_stage: int = 2
    group_norm: bool = False
    patch_dims: Tuple[int, int, int] = (64, 64, 64)
    classes: int = 4
    batch_size: int = 4

    def __post_init__(self):
        if len(self.channels) != 2 + len(self.dilations):
            raise ConfigInvalid(f"channels {self.channels} need exactly {2 + len(self.dilations)} entries "
                                f"for dilations {self.dilations}")
        if any(b <= a for a, b in zip(self.channels, self.channels[1:])):
            raise ConfigInvalid(f"channel plan must be strictly increasing, got {self.channels}")
        if min(self.dilations) < 1 or self.atrous_kernel < 1 or self.atrous_kernel % 2 == 0:
            raise ConfigInvalid("dilations must be >= 1 and atrous_kernel odd")
        if len(self.patch_dims) != 3 or any(d < 4 or d % 4 for d in self.patch_dims):
            raise ConfigInvalid(f"patch_dims must be three multiples of 4, got {self.patch_dims}")
        if self.classes != len(CLASS_LABELS) or self.in_channels < 1 or self.convs_per_stage < 1:
            raise ConfigInvalid("segnet needs 4 classes, >= 1 input channel and >= 1 conv per stage")

    @property
    def feature_channels(self) -> int:
        return sum(self.channels)

    @classmethod
    def from_run_config(cls, config: RunConfig) -> "SegNetConfig":
        return cls(
            channels=tuple(config.channels),
            dilations=tuple(config.dilations),
            atrous_kernel=config.atrous_kernel,
            convs_per_stage=config.convs_per_stage,
            group_norm=config.group_norm,
            patch_dims=tuple(config.patch_dims),
            batch_size=config.batch_size,
        )

    def to_meta(self) -> Dict[str, str]:
        meta = {}
        for key, value in asdict(self).items():
            meta[key] = ",".join(str(v) for v in value) if isinstance(value, tuple) else str(value)
        meta["network"] = "segnet"
        return meta

    @classmethod
    def from_meta(cls, meta: Mapping[str, str]) -> "SegNetConfig":
        if meta.get("network") != "segnet":
            raise CheckpointMismatch(f"checkpoint holds a {meta.get('network')!r} network, not segnet")
        return cls(
            in_channels=int(meta["in_channels"]),
            channels=_ints(meta["channels"]),
            dilations=_ints(meta["dilations"]),
            atrous_kernel=int(meta["atrous_kernel"]),
            convs_per_stage=int(meta["convs_per_stage"]),
            group_norm=meta["group_norm"] == "True",
            patch_dims=_ints(meta["patch_dims"]),
            classes=int(meta["classes"]),
            batch_size=int(meta["batch_size"]),
        )


@dataclass(frozen=True)
class DetectorConfig:
    """2D slice detector: input modalities, trunk width and square anchor sizes"""

    modalities: Tuple[str, ...] = ("FLAIR",)
    anchor_sizes: Tuple[int, ...] = (16, 32)
    channels: int = 16
    score_floor: float = 0.5
    detections_per_slice: int = 1

    def __post_init__(self):
        unknown = [m for m in self.modalities if m not in MODALITIES]
        if not self.modalities or unknown:
            raise ConfigInvalid(f"detector modalities must be drawn from {MODALITIES}, got {self.modalities}")
        if not self.anchor_sizes or min(self.anchor_sizes) < 1:
            raise ConfigInvalid(f"anchor sizes must be >= 1, got {self.anchor_sizes}")
        if self.channels < 1 or self.detections_per_slice < 1:
            raise ConfigInvalid("detector channels and detections_per_slice must be >= 1")
        if not 0.0 <= self.score_floor <= 1.0:
            raise ConfigInvalid(f"score_floor must be in [0, 1], got {self.score_floor}")

    @property
    def anchors(self) -> int:
        return len(self.anchor_sizes)

    @property
    def outputs_per_anchor(self) -> int:
        return OUTPUTS_PER_ANCHOR

    @classmethod
    def from_run_config(cls, config: RunConfig) -> "DetectorConfig":
        return cls(
            modalities=tuple(config.detector_modalities),
            anchor_sizes=tuple(config.anchor_sizes),
            channels=config.detector_channels,
            score_floor=config.score_floor,
            detections_per_slice=config.detections_per_slice,
        )

    def to_meta(self) -> Dict[str, str]:
        return {
            "network": "detector",
            "modalities": ",".join(self.modalities),
            "anchor_sizes": ",".join(str(s) for s in self.anchor_sizes),
            "channels": str(self.channels),
            "score_floor": repr(self.score_floor),
            "detections_per_slice": str(self.detections_per_slice),
        }

    @classmethod
    def from_meta(cls, meta: Mapping[str, str]) -> "DetectorConfig":
        if meta.get("network") != "detector":
            raise CheckpointMismatch(f"checkpoint holds a {meta.get('network')!r} network, not detector")
        return cls(
            modalities=tuple(m for m in meta["modalities"].split(",") if m),
            anchor_sizes=_ints(meta["anchor_sizes"]),
            channels=int(meta["channels"]),
            score_floor=float(meta["score_floor"]),
            detections_per_slice=int(meta["detections_per_slice"]),
        )
