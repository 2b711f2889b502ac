"""Axis-aligned boxes, IoU and greedy non-maximal suppression."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class DetectionBox:
    x: float
    y: float
    w: float
    h: float
    confidence: float = 1.0

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError("box width and height must be positive")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")

    @property
    def area(self):
        return self.w * self.h

    def clamp(self, width, height) -> "DetectionBox":
        x0, y0 = max(0, self.x), max(0, self.y)
        x1, y1 = min(width, self.x + self.w), min(height, self.y + self.h)
        return DetectionBox(x0, y0, x1 - x0, y1 - y0, self.confidence)


@dataclass(frozen=True)
class GroundTruthBox:
    x: int
    y: int
    w: int
    h: int
    name: str = "cross"

    @property
    def area(self):
        return self.w * self.h


def iou(a, b) -> float:
    """Intersection over union of two boxes with ``x, y, w, h`` fields."""
    if (a.x, a.y, a.w, a.h) == (b.x, b.y, b.w, b.h):
        return 1.0 if a.w > 0 and a.h > 0 else 0.0
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    if inter <= 0.0:
        return 0.0
    union = a.w * a.h + b.w * b.h - inter
    return min(1.0, inter / union)


def nms(boxes, iou_threshold):
    """Greedy NMS; result sorted by descending confidence, input order on ties."""
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    order = sorted(range(len(boxes)), key=lambda i: -boxes[i].confidence)
    kept = []
    for i in order:
        box = boxes[i]
        if all(iou(box, k) <= iou_threshold for k in kept):
            kept.append(box)
    return kept
