"""
Composition-box geometry.

All coordinates are normalized to the initial view: (0, 0) is its
top-left corner and (1, 1) its bottom-right corner. Boxes may extend
beyond that range, so centers are unconstrained; only the size must be
positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from unickit.exceptions.local_exceptions import InvalidBoxError

# Floor for IoU / GIoU denominators; positive areas keep unions above it.
AREA_FLOOR = 1e-12


@dataclass(frozen=True)
class CompBox:
    """A view box in center format (cx, cy, w, h)."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        values = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in values):
            msg = f"non-finite parameters {values}"
            raise InvalidBoxError(msg)
        if self.w <= 0 or self.h <= 0:
            msg = f"width {self.w} and height {self.h} must be positive"
            raise InvalidBoxError(msg)

    @property
    def area(self) -> float:
        return box_area(self)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)

    def translated(self, dx: float, dy: float) -> CompBox:
        return CompBox(self.cx + dx, self.cy + dy, self.w, self.h)


@dataclass(frozen=True)
class CornerBox:
    """A view box as min/max corners (x0, y0, x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        values = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in values):
            msg = f"non-finite corners {values}"
            raise InvalidBoxError(msg)
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            msg = f"corners {values} must satisfy x0 < x1 and y0 < y1"
            raise InvalidBoxError(msg)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)


def to_corners(b: CompBox) -> CornerBox:
    half_w = b.w / 2
    half_h = b.h / 2
    return CornerBox(
        b.cx - half_w,
        b.cy - half_h,
        b.cx + half_w,
        b.cy + half_h,
    )


def from_corners(c: CornerBox) -> CompBox:
    return CompBox(
        (c.x0 + c.x1) / 2,
        (c.y0 + c.y1) / 2,
        c.x1 - c.x0,
        c.y1 - c.y0,
    )


def box_area(b: CompBox) -> float:
    """Area measured from the corners, so self-intersection matches it."""
    return to_corners(b).area


def _overlap(a: CornerBox, b: CornerBox) -> tuple[float, float]:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    return max(iw, 0.0), max(ih, 0.0)


def intersection_area(a: CompBox, b: CompBox) -> float:
    iw, ih = _overlap(to_corners(a), to_corners(b))
    return iw * ih


def union_area(a: CompBox, b: CompBox) -> float:
    return box_area(a) + box_area(b) - intersection_area(a, b)


def iou(a: CompBox, b: CompBox) -> float:
    inter = intersection_area(a, b)
    union = box_area(a) + box_area(b) - inter
    return inter / max(union, AREA_FLOOR)


def enclosing_corners(a: CompBox, b: CompBox) -> CornerBox:
    ca = to_corners(a)
    cb = to_corners(b)
    return CornerBox(
        min(ca.x0, cb.x0),
        min(ca.y0, cb.y0),
        max(ca.x1, cb.x1),
        max(ca.y1, cb.y1),
    )


def enclosing_box(a: CompBox, b: CompBox) -> CompBox:
    """Smallest axis-aligned box containing both inputs."""
    return from_corners(enclosing_corners(a, b))


def contains(outer: CompBox, inner: CompBox) -> bool:
    o = to_corners(outer)
    i = to_corners(inner)
    return o.x0 <= i.x0 and o.y0 <= i.y0 and o.x1 >= i.x1 and o.y1 >= i.y1
