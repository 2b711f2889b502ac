"""Baseline "cross" (close-button) detector.

Keeps the shape of a single-class grid detector: the image is split into
an S x S grid, each cell proposes up to B windows whose centre falls
inside it, every window carries a confidence, and overlapping proposals
are resolved by non-maximal suppression. Confidence is the normalized
cross-correlation against a template bank, clipped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from ..errors import ConfigurationError, InputError
from .boxes import DetectionBox, nms

_FLAT_EPS = 1e-6


@dataclass(frozen=True)
class GridParams:
    S: int = 13
    B: int = 2
    C: int = 1
    iou_nms: float = 0.45
    conf_min: float = 0.6

    def __post_init__(self):
        if self.S < 1 or self.B < 1:
            raise ConfigurationError("S and B must be at least 1")
        if self.C != 1:
            raise ConfigurationError("only single-class detection (C=1) is supported")
        for name in ("iou_nms", "conf_min"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1)")


def to_gray(raster) -> np.ndarray:
    """float32 luminance of a HxW, HxWx3 or HxWx4 uint8/float raster."""
    arr = np.asarray(raster)
    if arr.ndim == 3:
        if arr.shape[2] == 4:
            rgb = arr[..., :3].astype(np.float32)
            alpha = arr[..., 3:4].astype(np.float32) / 255.0
            arr = rgb * alpha
        else:
            arr = arr[..., :3].astype(np.float32)
        arr = arr @ np.array([0.299, 0.587, 0.114], dtype=np.float32)
    return np.ascontiguousarray(arr, dtype=np.float32)


class _Normalizer:
    """Window statistics of one image, cached per template shape."""

    def __init__(self, gray):
        self.gray = gray - np.float32(gray.mean())
        g = self.gray.astype(np.float64)
        self._s1 = cv2.integral(g)
        self._s2 = cv2.integral(g * g)
        self._inv = {}

    def _box(self, s, th, tw):
        return s[th:, tw:] - s[:-th, tw:] - s[th:, :-tw] + s[:-th, :-tw]

    def inverse_norm(self, th, tw):
        """1 / sqrt(n * var) per window; 0 for flat windows."""
        key = (th, tw)
        if key not in self._inv:
            n = float(th * tw)
            mean = self._box(self._s1, th, tw) / n
            var = np.maximum(self._box(self._s2, th, tw) / n - mean * mean, 0.0)
            inv = np.zeros_like(var)
            live = var >= _FLAT_EPS
            inv[live] = 1.0 / np.sqrt(var[live] * n)
            self._inv[key] = inv.astype(np.float32)
        return self._inv[key]


def _raw_correlation(norm, template):
    th, tw = template.shape
    zero_mean = template - np.float32(template.mean())
    tnorm = float(np.sqrt(np.sum(zero_mean.astype(np.float64) ** 2)))
    if tnorm < _FLAT_EPS:
        return np.zeros((norm.gray.shape[0] - th + 1, norm.gray.shape[1] - tw + 1), np.float32)
    resp = cv2.matchTemplate(norm.gray, zero_mean, cv2.TM_CCORR)
    resp *= norm.inverse_norm(th, tw)
    resp *= np.float32(1.0 / tnorm)
    return resp


def correlation_map(gray, template) -> np.ndarray:
    """NCC of ``template`` at every position, flat windows scored 0.

    Correlating against the zero-mean template gives the NCC numerator
    directly; the per-window norm comes from integral images.
    """
    return np.clip(_raw_correlation(_Normalizer(to_gray(gray)), to_gray(template)), 0.0, 1.0)


def _cell_proposals(resp, th, tw, shape, S, conf_min):
    """Best window per grid cell for one template: {cell: (conf, x, y)}."""
    ys, xs = np.nonzero(resp >= conf_min)
    if ys.size == 0:
        return {}
    H, W = shape
    conf = resp[ys, xs]
    col = np.minimum(((xs + tw / 2.0) * S / W).astype(int), S - 1)
    row = np.minimum(((ys + th / 2.0) * S / H).astype(int), S - 1)
    cell = row * S + col
    order = np.lexsort((-conf, cell))
    out = {}
    for k in order:
        c = int(cell[k])
        if c not in out:
            out[c] = (min(1.0, float(conf[k])), int(xs[k]), int(ys[k]))
    return out


def detect_cross(image, templates, params: GridParams = GridParams()):
    """Boxes around close-button symbols in ``image``."""
    if templates is None or len(templates) == 0:
        raise ConfigurationError("template bank is empty")
    gray = to_gray(image)
    if gray.size == 0:
        raise InputError("empty image")
    H, W = gray.shape
    norm = _Normalizer(gray)
    per_cell = {}
    for template in templates:
        tg = to_gray(template)
        th, tw = tg.shape
        if th > H or tw > W or float(tg.std()) < _FLAT_EPS:
            continue
        resp = _raw_correlation(norm, tg)
        if float(resp.max()) < params.conf_min:
            continue
        for cell, (conf, x, y) in _cell_proposals(resp, th, tw, (H, W), params.S, params.conf_min).items():
            per_cell.setdefault(cell, []).append((conf, x, y, tw, th))
    proposals = []
    for cell in sorted(per_cell):
        ranked = sorted(per_cell[cell], key=lambda c: -c[0])[: params.B]
        for conf, x, y, tw, th in ranked:
            proposals.append(DetectionBox(x, y, tw, th, min(1.0, conf)))
    return nms(proposals, params.iou_nms)


class TemplateCrossDetector:
    """Detector plugin backed by :func:`detect_cross`."""

    name = "template-ncc"

    def __init__(self, templates, params: GridParams = GridParams()):
        if not templates:
            raise ConfigurationError("template bank is empty")
        self.templates = [to_gray(t) for t in templates]
        self.params = params

    def detect(self, image):
        return detect_cross(image, self.templates, self.params)
