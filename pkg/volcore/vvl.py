"""VVL1 volume file format - read, write, metadata sidecar and raw conversion

Layout (little-endian)::

    0..3    magic b"VVL1"
    4       dtype code (0 = float32, 1 = uint8)
    5..16   nx, ny, nz as uint32
    17..28  sx, sy, sz as float32 (millimeters per voxel)
    29..32  reserved, zero
    33..    nx*ny*nz values, x fastest, then y, then z
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import yaml

from .errors import BadMagic, IoFailure, InvalidVolume, SpecMismatch, TruncatedData, UnsupportedDtype
from .volume import Volume

logger = logging.getLogger(__name__)

MAGIC = b"VVL1"
HEADER = struct.Struct("<4sB3I3f4x")
HEADER_SIZE = HEADER.size  # 33

DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
CODE_FOR_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.uint8): 1}
DTYPE_NAMES = {"float32": np.dtype("<f4"), "uint8": np.dtype("u1")}

PathLike = Union[str, Path]


def encode_volume(volume: Volume) -> bytes:
    """Serialize a volume to VVL1 bytes"""
    code = CODE_FOR_DTYPE[volume.dtype]
    header = HEADER.pack(MAGIC, code, *volume.dims, *volume.spacing)
    payload = np.asarray(volume.data, dtype=DTYPE_CODES[code]).ravel(order="F").tobytes()
    return header + payload


def decode_volume(buffer: bytes) -> Volume:
    """Parse VVL1 bytes into a Volume"""
    if len(buffer) < HEADER_SIZE:
        raise TruncatedData(f"{len(buffer)} bytes is shorter than the {HEADER_SIZE}-byte header")
    magic, code, nx, ny, nz, sx, sy, sz = HEADER.unpack_from(buffer)
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {magic!r}")
    if code not in DTYPE_CODES:
        raise UnsupportedDtype(f"unknown dtype code {code}")
    if min(nx, ny, nz) < 1:
        raise InvalidVolume(f"header dims ({nx}, {ny}, {nz}) must all be >= 1")

    dtype = DTYPE_CODES[code]
    expected = nx * ny * nz * dtype.itemsize
    actual = len(buffer) - HEADER_SIZE
    if actual != expected:
        raise TruncatedData(f"payload has {actual} bytes, header promises {expected}")

    values = np.frombuffer(buffer, dtype=dtype, offset=HEADER_SIZE)
    data = values.reshape((nx, ny, nz), order="F").astype(dtype.newbyteorder("="))
    return Volume(data, (sx, sy, sz))


def read_volume(path: PathLike) -> Volume:
    """
    Read a VVL1 file

    Args:
        path: File to read

    Returns:
        Volume described by the header
    """
    try:
        buffer = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    volume = decode_volume(buffer)
    logger.debug(f"Read {path}: dims={volume.dims} dtype={volume.dtype}")
    return volume


def write_volume(volume: Volume, path: PathLike) -> None:
    """Write ``volume`` to ``path`` in VVL1 format"""
    try:
        Path(path).write_bytes(encode_volume(volume))
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    logger.debug(f"Wrote {path}: dims={volume.dims} dtype={volume.dtype}")


def meta_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".meta")


def write_meta(path: PathLike, scan_id: Optional[str] = None, modality: Optional[str] = None) -> None:
    """Write the plain-text ``<name>.meta`` sidecar next to a volume file"""
    lines = []
    if scan_id is not None:
        lines.append(f"scan_id={scan_id}")
    if modality is not None:
        lines.append(f"modality={modality}")
    try:
        meta_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write sidecar for {path}: {e}") from e


def read_meta(path: PathLike) -> Dict[str, str]:
    """Read the sidecar of a volume file; missing sidecar gives an empty dict"""
    sidecar = meta_path(path)
    if not sidecar.exists():
        return {}
    meta = {}
    for line in sidecar.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


@dataclass(frozen=True)
class RawSpec:
    """Declared layout of a headerless little-endian voxel blob"""

    raw: Path
    out: Path
    dims: Sequence[int]
    dtype: str = "float32"
    spacing: Sequence[float] = (1.0, 1.0, 1.0)
    scan_id: Optional[str] = None
    modality: Optional[str] = None


def load_raw_specs(path: PathLike) -> List[RawSpec]:
    """
    Load a YAML raw-conversion spec (one mapping or a list of mappings)

    Relative ``raw`` and ``out`` paths resolve against the spec file's directory.
    """
    spec_file = Path(path)
    try:
        entries = yaml.safe_load(spec_file.read_text(encoding="utf-8"))
    except OSError as e:
        raise IoFailure(f"cannot read {spec_file}: {e}") from e
    except yaml.YAMLError as e:
        raise SpecMismatch(f"cannot parse {spec_file}: {e}") from e
    if isinstance(entries, dict):
        entries = [entries]
    if not isinstance(entries, list) or not entries:
        raise SpecMismatch(f"{spec_file} declares no volumes")

    specs = []
    for entry in entries:
        try:
            specs.append(RawSpec(
                raw=spec_file.parent / entry["raw"],
                out=spec_file.parent / entry["out"],
                dims=tuple(int(n) for n in entry["dims"]),
                dtype=str(entry.get("dtype", "float32")),
                spacing=tuple(float(s) for s in entry.get("spacing", (1.0, 1.0, 1.0))),
                scan_id=entry.get("scan_id"),
                modality=entry.get("modality"),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise SpecMismatch(f"bad entry in {spec_file}: {entry!r}") from e
    return specs


def convert_raw(spec: RawSpec) -> Volume:
    """Convert one raw blob to a VVL1 file (plus sidecar when ids are declared)"""
    if spec.dtype not in DTYPE_NAMES:
        raise UnsupportedDtype(f"raw dtype must be one of {sorted(DTYPE_NAMES)}, got {spec.dtype}")
    if len(spec.dims) != 3:
        raise SpecMismatch(f"dims must have three extents, got {spec.dims}")
    dtype = DTYPE_NAMES[spec.dtype]
    try:
        blob = spec.raw.read_bytes()
    except OSError as e:
        raise IoFailure(f"cannot read {spec.raw}: {e}") from e

    nx, ny, nz = spec.dims
    expected = nx * ny * nz * dtype.itemsize
    if len(blob) != expected:
        raise SpecMismatch(f"{spec.raw} has {len(blob)} bytes, declared layout needs {expected}")

    data = np.frombuffer(blob, dtype=dtype).reshape((nx, ny, nz), order="F")
    volume = Volume(data.astype(dtype.newbyteorder("=")), tuple(spec.spacing))
    write_volume(volume, spec.out)
    if spec.scan_id is not None or spec.modality is not None:
        write_meta(spec.out, spec.scan_id, spec.modality)
    logger.info(f"Converted {spec.raw} -> {spec.out} ({spec.dtype}, dims={volume.dims})")
    return volume
