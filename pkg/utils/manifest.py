"""Scan manifests - one scan per line, ``scan_id key=PATH ...``"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from volcore.volume import MODALITIES, MultiModalScan
from volcore.vvl import read_volume
from .errors import ManifestError

logger = logging.getLogger(__name__)

MODALITY_KEYS = {"flair": "FLAIR", "t1": "T1", "t1c": "T1c", "t2": "T2"}
LABEL_KEY = "label"


@dataclass(frozen=True)
class ManifestEntry:
    scan_id: str
    modalities: Dict[str, Path] = field(default_factory=dict)  # keyed by modality name
    label: Optional[Path] = None

    @property
    def complete(self) -> bool:
        return set(self.modalities) == set(MODALITIES)

    def format(self, root: Optional[Path] = None) -> str:
        def show(path: Path) -> str:
            if root is not None:
                try:
                    return path.resolve().relative_to(root).as_posix()
                except ValueError:
                    pass
            return path.as_posix()

        parts = [self.scan_id]
        for key, name in MODALITY_KEYS.items():
            if name in self.modalities:
                parts.append(f"{key}={show(self.modalities[name])}")
        if self.label is not None:
            parts.append(f"{LABEL_KEY}={show(self.label)}")
        return " ".join(parts)


def parse_manifest(text: str, root: Path, check_files: bool = True, source: str = "<manifest>") -> List[ManifestEntry]:
    entries, seen = [], set()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        scan_id, *fields = line.split()
        if scan_id in seen:
            raise ManifestError(f"{source}:{number}: duplicate scan_id {scan_id}")
        seen.add(scan_id)
        modalities, label = {}, None
        for item in fields:
            key, sep, value = item.partition("=")
            if not sep or not value:
                raise ManifestError(f"{source}:{number}: expected key=PATH, got {item!r}")
            path = Path(value)
            path = path if path.is_absolute() else root / path
            if check_files and not path.is_file():
                raise ManifestError(f"{source}:{number}: missing file {path}")
            key = key.lower()
            if key == LABEL_KEY:
                label = path
            elif key in MODALITY_KEYS:
                modalities[MODALITY_KEYS[key]] = path
            else:
                raise ManifestError(f"{source}:{number}: unknown key {key!r}")
        if modalities and set(modalities) != set(MODALITIES):
            raise ManifestError(f"{source}:{number}: scan {scan_id} lists only {sorted(modalities)}")
        if not modalities and label is None:
            raise ManifestError(f"{source}:{number}: scan {scan_id} lists no files")
        entries.append(ManifestEntry(scan_id, modalities, label))
    return entries


def load_manifest(path: Union[str, Path], check_files: bool = True) -> List[ManifestEntry]:
    """
    Read a manifest; relative paths resolve against its directory

    Args:
        path: Manifest file
        check_files: Require every referenced file to exist

    Returns:
        Entries in file order
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from e
    entries = parse_manifest(text, path.parent, check_files, str(path))
    logger.debug(f"Loaded {len(entries)} scans from {path}")
    return entries


def write_manifest(entries: Sequence[ManifestEntry], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = path.parent.resolve()
    lines = [e.format(root) for e in sorted(entries, key=lambda e: e.scan_id)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_scan(entry: ManifestEntry, with_labels: bool = True) -> MultiModalScan:
    if not entry.complete:
        raise ManifestError(f"scan {entry.scan_id} has no modality volumes")
    modalities = {name: read_volume(p) for name, p in entry.modalities.items()}
    labels = read_volume(entry.label) if with_labels and entry.label is not None else None
    return MultiModalScan(entry.scan_id, modalities, labels)


def split_manifest(entries: Sequence[ManifestEntry], val_fraction: float,
                   seed: int = 0) -> Tuple[List[ManifestEntry], List[ManifestEntry]]:
    """Seeded (train, validation) split; at least one scan stays in training"""
    ordered = sorted(entries, key=lambda e: e.scan_id)
    count = int(round(len(ordered) * val_fraction))
    count = min(count, len(ordered) - 1) if ordered else 0
    if count <= 0:
        return ordered, []
    order = np.random.default_rng(seed).permutation(len(ordered))
    held = set(int(i) for i in order[:count])
    train = [e for i, e in enumerate(ordered) if i not in held]
    val = [e for i, e in enumerate(ordered) if i in held]
    return train, val
