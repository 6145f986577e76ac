"""CKP1 checkpoints - text manifest plus a little-endian f32 payload blob

Manifest layout (``<path>``)::

    CKP1
    meta <key>=<value>
    param <name> <d0>x<d1>x... <offset>

Offsets count float32 elements after the 4-byte ``CKP1`` magic at the head of
``<path>.bin``. Parameters are written in name order.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

import numpy as np
import torch
from torch import nn

from .errors import CheckpointMismatch

logger = logging.getLogger(__name__)

MAGIC = "CKP1"
PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    """Named float32 parameter arrays plus string metadata"""

    params: Dict[str, np.ndarray]
    meta: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_module(cls, module: nn.Module, meta: Mapping[str, str] = None) -> "Checkpoint":
        params = {
            name: tensor.detach().cpu().to(torch.float32).numpy().copy()
            for name, tensor in module.state_dict().items()
        }
        return cls(params, dict(meta or {}))

    def parameter_count(self) -> int:
        return int(sum(a.size for a in self.params.values()))


def blob_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".bin")


def save_checkpoint(checkpoint: Checkpoint, path: PathLike) -> Path:
    """Write the manifest and its payload blob; returns the manifest path"""
    path = Path(path)
    lines = [MAGIC]
    for key in sorted(checkpoint.meta):
        value = str(checkpoint.meta[key])
        if any(c.isspace() for c in key) or "\n" in value:
            raise CheckpointMismatch(f"meta entry {key!r} cannot be stored")
        lines.append(f"meta {key}={value}")

    chunks = []
    offset = 0
    for name in sorted(checkpoint.params):
        array = np.asarray(checkpoint.params[name], dtype="<f4")
        shape = "x".join(str(n) for n in array.shape) if array.ndim else "scalar"
        lines.append(f"param {name} {shape} {offset}")
        chunks.append(array.tobytes(order="C"))
        offset += array.size

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    blob_path(path).write_bytes(MAGIC.encode("ascii") + b"".join(chunks))
    logger.info(f"Saved checkpoint {path} ({offset} values)")
    return path


def _parse_shape(text: str) -> Tuple[int, ...]:
    if text == "scalar":
        return ()
    return tuple(int(n) for n in text.split("x"))


def load_checkpoint(path: PathLike) -> Checkpoint:
    """Read a CKP1 manifest and blob; raises CheckpointMismatch on any inconsistency"""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
        blob = blob_path(path).read_bytes()
    except OSError as e:
        raise CheckpointMismatch(f"cannot read checkpoint {path}: {e}") from e
    if not lines or lines[0].strip() != MAGIC or blob[:4] != MAGIC.encode("ascii"):
        raise CheckpointMismatch(f"{path} is not a CKP1 checkpoint")
    if (len(blob) - 4) % 4:
        raise CheckpointMismatch(f"{blob_path(path)} payload is not a whole number of float32 values")

    payload = np.frombuffer(blob, dtype="<f4", offset=4)
    params, meta = {}, {}
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        kind, _, rest = line.partition(" ")
        try:
            if kind == "meta":
                key, value = rest.split("=", 1)
                meta[key] = value
            elif kind == "param":
                name, shape_text, offset_text = rest.split()
                shape = _parse_shape(shape_text)
                offset = int(offset_text)
                size = int(np.prod(shape)) if shape else 1
                if offset < 0 or offset + size > payload.size:
                    raise CheckpointMismatch(f"{path}:{number}: parameter {name} runs past the payload")
                params[name] = payload[offset:offset + size].reshape(shape).astype(np.float32)
            else:
                raise CheckpointMismatch(f"{path}:{number}: unknown record {kind!r}")
        except ValueError as e:
            raise CheckpointMismatch(f"{path}:{number}: malformed line {line!r}") from e
    return Checkpoint(params, meta)


def load_state_into(module: nn.Module, checkpoint: Checkpoint) -> nn.Module:
    """Copy checkpoint parameters into ``module``; names and shapes must match exactly"""
    state = module.state_dict()
    missing = sorted(set(state) - set(checkpoint.params))
    extra = sorted(set(checkpoint.params) - set(state))
    if missing or extra:
        raise CheckpointMismatch(f"checkpoint does not fit network (missing {missing[:3]}, unexpected {extra[:3]})")
    loaded = {}
    for name, tensor in state.items():
        array = checkpoint.params[name]
        if tuple(array.shape) != tuple(tensor.shape):
            raise CheckpointMismatch(f"{name}: checkpoint shape {array.shape} != network shape {tuple(tensor.shape)}")
        loaded[name] = torch.from_numpy(np.array(array)).to(tensor.dtype)
    module.load_state_dict(loaded)
    return module
