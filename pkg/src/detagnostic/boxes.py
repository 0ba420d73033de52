"""Axis-aligned bounding boxes in COCO xywh convention and IoU primitives."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class BoundingBox:
    """Box given by its top-left corner and size, in pixels.

    Width and height must be strictly positive; the origin must be
    non-negative. Corner form is derived, never stored.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValidationError(
                f"box dimensions must be positive, got w={self.w}, h={self.h}"
            )
        if self.x < 0 or self.y < 0:
            raise ValidationError(
                f"box origin must be non-negative, got x={self.x}, y={self.y}"
            )

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) corner form."""
        return (self.x, self.y, self.x + self.w, self.y + self.h)

    def scaled(self, sx: float, sy: float) -> "BoundingBox":
        return BoundingBox(self.x * sx, self.y * sy, self.w * sx, self.h * sy)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes. Symmetric, in [0, 1]."""
    ax1, ay1, ax2, ay2 = a.corners
    bx1, by1, bx2, by2 = b.corners
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def aligned_iou(wa: float, ha: float, wb: float, hb: float) -> float:
    """IoU of two boxes whose centers coincide.

    Only the dimensions matter, which makes this the natural overlap measure
    between an anchor prior and an object size sample.
    """
    inter = min(wa, wb) * min(ha, hb)
    union = wa * ha + wb * hb - inter
    return inter / union
