"""Line-oriented text format for windows and proposals

One record per line, eight whitespace-separated fields::

    scale_id kind x0 y0 x1 y1 score slice_z

``kind`` is ``positive``, ``negative`` or ``proposal``. Windows have no score
and write ``-`` in its place.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Union

from .errors import WindowFormatError
from .geometry import Rect
from .pipeline import SliceWindows
from .proposals import Proposal
from .windows import WINDOW_KINDS, Window

PROPOSAL = "proposal"
KINDS = WINDOW_KINDS + (PROPOSAL,)


@dataclass(frozen=True)
class Record:
    scale_id: int
    kind: str
    rect: Rect
    score: Optional[float]
    slice_z: int


def window_record(window: Window, slice_z: int) -> Record:
    return Record(window.scale_id, window.kind, window.rect, None, slice_z)


def proposal_record(proposal: Proposal) -> Record:
    return Record(proposal.scale_id, PROPOSAL, proposal.rect, proposal.score, proposal.slice_z)


def format_record(record: Record) -> str:
    score = "-" if record.score is None else f"{record.score:.6f}"
    x0, y0, x1, y1 = record.rect.as_tuple()
    return f"{record.scale_id} {record.kind} {x0} {y0} {x1} {y1} {score} {record.slice_z}"


def parse_record(line: str) -> Record:
    parts = line.split()
    if len(parts) != 8 or parts[1] not in KINDS:
        raise WindowFormatError(f"malformed record: {line!r}")
    try:
        scale_id = int(parts[0])
        x0, y0, x1, y1 = (int(p) for p in parts[2:6])
        score = None if parts[6] == "-" else float(parts[6])
        slice_z = int(parts[7])
    except ValueError as e:
        raise WindowFormatError(f"malformed record: {line!r}") from e
    return Record(scale_id, parts[1], Rect(x0, y0, x1, y1), score, slice_z)


def records_for(items: Iterable[SliceWindows], include_proposals: bool = True) -> List[Record]:
    """Flatten slice results: windows first, then proposals, per slice and scale"""
    records = []
    for item in items:
        records.extend(window_record(w, item.slice_z) for w in item.positives)
        records.extend(window_record(w, item.slice_z) for w in item.negatives)
        if include_proposals:
            records.extend(proposal_record(p) for p in item.proposals)
    return records


def write_records(records: Iterable[Record], path: Union[str, Path]) -> None:
    text = "".join(format_record(r) + "\n" for r in records)
    Path(path).write_text(text, encoding="utf-8")


def read_records(path: Union[str, Path]) -> List[Record]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [parse_record(line) for line in lines if line.strip()]
