"""Rect geometry - overlap and box-delta encoding on scaled 2D slices"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import InvalidRect

# a box may grow at most 1000/16 times its anchor per axis
MAX_LOG_SCALE = math.log(1000.0 / 16)


@dataclass(frozen=True, order=True)
class Rect:
    """Inclusive integer pixel rectangle; x indexes the slice's first axis"""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise InvalidRect(f"invalid rect {self.as_tuple()}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)

    def contains_point(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def contains(self, other: "Rect") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and self.x1 >= other.x1 and self.y1 >= other.y1)

    def clipped(self, dims: Tuple[int, int]) -> "Rect":
        w, h = dims
        return Rect(max(0, self.x0), max(0, self.y0), min(w - 1, self.x1), min(h - 1, self.y1))

    def translated(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)


def iou(a: Rect, b: Rect) -> float:
    """Intersection over union counting integer pixels, both bounds inclusive"""
    ix = min(a.x1, b.x1) - max(a.x0, b.x0) + 1
    iy = min(a.y1, b.y1) - max(a.y0, b.y0) + 1
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / float(a.area + b.area - inter)


def encode_deltas(proposal: Rect, target: Rect) -> Tuple[float, float, float, float]:
    """Center/log-size regression target that moves ``proposal`` onto ``target``"""
    pcx, pcy = proposal.center
    gcx, gcy = target.center
    pw, ph = proposal.width, proposal.height
    return (
        (gcx - pcx) / pw,
        (gcy - pcy) / ph,
        math.log(target.width / pw),
        math.log(target.height / ph),
    )


def decode_box(proposal: Rect, deltas) -> Tuple[float, float, float, float]:
    """Apply regression deltas; returns float (x0, y0, x1, y1). Log-size deltas are capped at MAX_LOG_SCALE"""
    dx, dy, dw, dh = (float(d) for d in deltas)
    dw, dh = min(dw, MAX_LOG_SCALE), min(dh, MAX_LOG_SCALE)
    pcx, pcy = proposal.center
    cx = pcx + dx * proposal.width
    cy = pcy + dy * proposal.height
    w = proposal.width * math.exp(dw)
    h = proposal.height * math.exp(dh)
    return (cx - (w - 1) / 2.0, cy - (h - 1) / 2.0, cx + (w - 1) / 2.0, cy + (h - 1) / 2.0)


def decode_deltas(proposal: Rect, deltas, dims: Optional[Tuple[int, int]] = None) -> Rect:
    """Inverse of encode_deltas, rounded to pixels and optionally clipped to ``dims``"""
    x0, y0, x1, y1 = decode_box(proposal, deltas)
    x0, y0 = int(round(x0)), int(round(y0))
    x1, y1 = max(x0, int(round(x1))), max(y0, int(round(y1)))
    rect = Rect(x0, y0, x1, y1)
    if dims is not None:
        w, h = dims
        rect = Rect(min(max(rect.x0, 0), w - 1), min(max(rect.y0, 0), h - 1),
                    min(max(rect.x1, 0), w - 1), min(max(rect.y1, 0), h - 1))
    return rect
