"""Run configuration - validated key=value / YAML settings with documented defaults"""
import logging
from dataclasses import dataclass, fields, replace, asdict
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

import yaml

from .errors import ConfigInvalid

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config.yaml"


@dataclass(frozen=True)
class RunConfig:
    """Every documented pipeline setting, with the defaults used when a key is absent"""

    # optimisation
    lr: float = 1e-2
    momentum: float = 0.9
    iterations: int = 300
    seed: int = 0
    batch_size: int = 4
    epsilon: float = 1e-5
    log_every: int = 10
    val_fraction: float = 0.0

    # segmentation network
    patch_dims: Tuple[int, ...] = (64, 64, 64)
    channels: Tuple[int, ...] = (32, 64, 128, 256)
    dilations: Tuple[int, ...] = (2, 3)
    atrous_kernel: int = 3
    convs_per_stage: int = 2
    group_norm: bool = False
    f_offset: int = 6

    # contextual detection
    scales: Tuple[float, ...] = (0.5, 1.0, 2.0)
    window_size: Tuple[int, ...] = (32, 32)
    K: int = 4
    min_proposals: int = 2
    proposals_per_window: int = 300
    iou_threshold: float = 0.5
    score_floor: float = 0.5
    anchor_sizes: Tuple[int, ...] = (16, 32)
    detector_channels: int = 16
    detector_modalities: Tuple[str, ...] = ("FLAIR",)
    detections_per_slice: int = 1
    min_box_slices: int = 4

    # evaluation
    hausdorff_percentile: Optional[float] = None

    # runtime
    deterministic: bool = True
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Raise ConfigInvalid on the first setting out of range"""
        checks = [
            (self.lr >= 0, "lr must be >= 0"),
            (0 <= self.momentum < 1, "momentum must be in [0, 1)"),
            (self.iterations >= 0, "iterations must be >= 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.epsilon >= 0, "epsilon must be >= 0"),
            (self.log_every >= 1, "log_every must be >= 1"),
            (0 <= self.val_fraction < 1, "val_fraction must be in [0, 1)"),
            (len(self.patch_dims) == 3 and min(self.patch_dims) >= 1,
             "patch_dims needs three positive extents"),
            (len(self.channels) == 4 and all(a < b for a, b in zip(self.channels, self.channels[1:]))
             and self.channels[0] >= 1, "channels must be 4 strictly increasing widths"),
            (len(self.dilations) == 2 and min(self.dilations) >= 1, "dilations needs two rates >= 1"),
            (self.atrous_kernel >= 1, "atrous_kernel must be >= 1"),
            (self.convs_per_stage >= 1, "convs_per_stage must be >= 1"),
            (self.f_offset >= 0, "f_offset must be >= 0"),
            (len(self.scales) >= 1 and min(self.scales) > 0, "scales must be positive"),
            (len(self.window_size) == 2 and min(self.window_size) >= 1, "window_size needs two extents"),
            (self.K >= 1, "K must be >= 1"),
            (self.min_proposals >= 1, "min_proposals must be >= 1"),
            (self.proposals_per_window >= 1, "proposals_per_window must be >= 1"),
            (0 < self.iou_threshold < 1, "iou_threshold must be in (0, 1)"),
            (0 <= self.score_floor <= 1, "score_floor must be in [0, 1]"),
            (len(self.anchor_sizes) >= 1 and min(self.anchor_sizes) >= 1, "anchor_sizes must be positive"),
            (self.detector_channels >= 1, "detector_channels must be >= 1"),
            (len(self.detector_modalities) >= 1
             and set(self.detector_modalities) <= {"FLAIR", "T1", "T1c", "T2"},
             "detector_modalities must name FLAIR, T1, T1c or T2"),
            (self.detections_per_slice >= 1, "detections_per_slice must be >= 1"),
            (self.min_box_slices >= 1, "min_box_slices must be >= 1"),
            (self.hausdorff_percentile is None or 0 < self.hausdorff_percentile <= 100,
             "hausdorff_percentile must be in (0, 100]"),
            (self.jobs >= 1, "jobs must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigInvalid(message)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a copy with ``overrides`` applied (``None`` values are skipped)"""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(changes) - KNOWN_KEYS
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


KNOWN_KEYS = frozenset(f.name for f in fields(RunConfig))
_DEFAULTS = {f.name: f.default for f in fields(RunConfig)}
METADATA_SECTIONS = frozenset({"app"})


def _coerce(key: str, raw: Any) -> Any:
    """Convert a raw YAML or text value to the type of the key's default"""
    default = _DEFAULTS[key]
    try:
        if key == "hausdorff_percentile":
            if raw is None or str(raw).strip().lower() in ("", "none", "null", "max"):
                return None
            return float(raw)
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("true", "yes", "1", "on"):
                return True
            if text in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            items: Iterable[Any]
            if isinstance(raw, (list, tuple)):
                items = raw
            else:
                items = [p for p in str(raw).replace("x", ",").split(",") if p.strip()]
            item_type = type(default[0])
            if item_type is str:
                return tuple(str(p).strip() for p in items)
            return tuple(item_type(float(p)) if item_type is int else item_type(p) for p in items)
        if isinstance(default, int):
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        if isinstance(default, float):
            return float(raw)
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(f"bad value for {key}: {raw!r}") from e
    return raw


def parse_key_values(text: str) -> Dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment"""
    values: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _flatten_yaml(data: Mapping[str, Any]) -> Dict[str, Any]:
    """config.yaml groups keys in sections; the run config is flat"""
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        if key in METADATA_SECTIONS:
            continue
        if isinstance(value, Mapping):
            flat.update(_flatten_yaml(value))
        else:
            flat[key] = value
    return flat


def config_from_mapping(values: Mapping[str, Any], base: Optional[RunConfig] = None) -> RunConfig:
    """Validate raw values against the known keys and build a RunConfig"""
    unknown = set(values) - KNOWN_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    coerced = {key: _coerce(key, raw) for key, raw in values.items()}
    return replace(base or RunConfig(), **coerced)


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """
    Load a run config

    Args:
        path: YAML (``.yaml``/``.yml``) or key=value text file. ``None`` reads the
            repository ``config.yaml`` when present, else built-in defaults.

    Returns:
        Validated RunConfig
    """
    config_file = Path(path) if path else DEFAULT_CONFIG_PATH
    if not config_file.exists():
        if path:
            raise ConfigInvalid(f"config file not found: {config_file}")
        logger.debug("No config.yaml found, using built-in defaults")
        return RunConfig()

    text = config_file.read_text(encoding="utf-8")
    if config_file.suffix in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigInvalid(f"cannot parse {config_file}: {e}") from e
        values = _flatten_yaml(data)
    else:
        values = parse_key_values(text)

    config = config_from_mapping(values)
    logger.info(f"Loaded run config from {config_file}")
    return config


def dump_key_values(config: RunConfig) -> str:
    """Render a config in the key=value format, one key per line in field order"""
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        lines.append(f"{f.name}={text}")
    return "\n".join(lines) + "\n"
