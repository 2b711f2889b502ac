"""Synthetic click-deceptive images: close symbols pasted into ad images.

Also writes and reads PASCAL-VOC style annotations for the pasted boxes.
"""

from __future__ import annotations

import math
import os
import xml.etree.ElementTree as ET

import cv2
import numpy as np
from PIL import Image, ImageDraw

from ..errors import InputError
from .boxes import GroundTruthBox

DEFAULT_SCALE_RANGE = (0.03, 0.10)

# (background, stroke) colours of the bundled close-button styles
_STYLES = (
    ((40, 40, 40), (255, 255, 255)),
    ((230, 230, 230), (20, 20, 20)),
    ((200, 30, 30), (255, 255, 255)),
    ((0, 0, 0), (200, 200, 200)),
)


def make_cross_symbol(style=0, size=96, stroke=0.14, margin=0.24):
    """Opaque square close button (RGBA) with an X drawn across it."""
    bg, fg = _STYLES[style % len(_STYLES)]
    img = Image.new("RGBA", (size, size), bg + (255,))
    draw = ImageDraw.Draw(img)
    lo, hi = size * margin, size * (1 - margin)
    width = max(1, int(round(size * stroke)))
    draw.line([(lo, lo), (hi, hi)], fill=fg + (255,), width=width)
    draw.line([(lo, hi), (hi, lo)], fill=fg + (255,), width=width)
    return np.asarray(img, dtype=np.uint8).copy()


def cross_symbols(n=len(_STYLES), size=96):
    return [make_cross_symbol(i, size) for i in range(n)]


def resize_symbol(symbol, width, height=None):
    """Deterministic resize used by both the embedder and the template bank."""
    height = width if height is None else height
    interp = cv2.INTER_AREA if width < symbol.shape[1] else cv2.INTER_LINEAR
    return cv2.resize(np.asarray(symbol), (int(width), int(height)), interpolation=interp)


def template_bank(symbols, sides):
    """RGB templates of every symbol at every side length in ``sides``."""
    bank = []
    for symbol in symbols:
        for side in sides:
            t = resize_symbol(symbol, side)
            bank.append(t[..., :3] if t.ndim == 3 else t)
    return bank


def _round_half_up(v):
    return int(math.floor(v + 0.5 + 1e-9))


def side_for_scale(scale, base_shape):
    return _round_half_up(scale * min(base_shape[0], base_shape[1]))


def scale_sides(scale_range, base_shape):
    """Every integer side length embed_cross can produce for ``base_shape``."""
    lo, hi = scale_range
    return list(range(max(1, side_for_scale(lo, base_shape)), side_for_scale(hi, base_shape) + 1))


def alpha_composite(base, patch, x, y):
    out = np.array(base, dtype=np.uint8, copy=True)
    h, w = patch.shape[:2]
    region = out[y:y + h, x:x + w].astype(np.float32)
    if patch.ndim == 3 and patch.shape[2] == 4:
        alpha = patch[..., 3:4].astype(np.float32) / 255.0
        color = patch[..., :3].astype(np.float32)
    else:
        alpha = np.ones((h, w, 1), dtype=np.float32)
        color = patch.astype(np.float32)
        if color.ndim == 2:
            color = color[..., None]
    if region.ndim == 2:
        region = region[..., None]
        color = color.mean(axis=2, keepdims=True)
    elif color.shape[2] == 1:
        color = np.repeat(color, region.shape[2], axis=2)
    mixed = color * alpha + region[..., : color.shape[2]] * (1.0 - alpha)
    mixed = np.clip(np.rint(mixed), 0, 255).astype(np.uint8)
    if out.ndim == 2:
        out[y:y + h, x:x + w] = mixed[..., 0]
    else:
        out[y:y + h, x:x + w, : mixed.shape[2]] = mixed
    return out


def embed_cross(base, symbol, rng_seed, scale_range=DEFAULT_SCALE_RANGE):
    """Paste ``symbol`` at a seeded random position and size.

    The side length is a uniform fraction of the smaller image dimension
    drawn from ``scale_range``, rounded half-up. Returns the new raster and
    the exact box.
    """
    base = np.asarray(base)
    H, W = base.shape[:2]
    lo, hi = scale_range
    if lo <= 0 or hi < lo:
        raise InputError(f"invalid scale range {scale_range}")
    if side_for_scale(lo, base.shape) > min(H, W):
        raise InputError("symbol does not fit into base image at the lowest scale")
    rng = np.random.default_rng(rng_seed)
    scale = lo if hi == lo else float(rng.uniform(lo, hi))
    side = max(1, min(side_for_scale(scale, base.shape), min(H, W)))
    sh, sw = symbol.shape[:2]
    width = side
    height = max(1, min(H, _round_half_up(side * sh / sw)))
    x = int(rng.integers(0, W - width + 1))
    y = int(rng.integers(0, H - height + 1))
    patch = resize_symbol(symbol, width, height)
    return alpha_composite(base, patch, x, y), GroundTruthBox(x, y, width, height)


def make_ad_image(seed, size=(300, 250)):
    """Synthetic clean ad creative: gradient, shapes, text strips and noise."""
    rng = np.random.default_rng(seed)
    w, h = size
    c0, c1 = rng.integers(0, 256, 3), rng.integers(0, 256, 3)
    t = np.linspace(0.0, 1.0, w, dtype=np.float32)[None, :, None]
    grad = (c0[None, None, :] * (1 - t) + c1[None, None, :] * t).repeat(h, axis=0)
    img = Image.fromarray(np.clip(grad, 0, 255).astype(np.uint8), "RGB")
    draw = ImageDraw.Draw(img)
    for _ in range(int(rng.integers(2, 7))):
        x0, y0 = int(rng.integers(0, max(1, w - 10))), int(rng.integers(0, max(1, h - 10)))
        x1, y1 = x0 + int(rng.integers(10, max(11, w // 2))), y0 + int(rng.integers(10, max(11, h // 2)))
        color = tuple(int(v) for v in rng.integers(0, 256, 3))
        if rng.random() < 0.5:
            draw.rectangle([x0, y0, x1, y1], fill=color)
        else:
            draw.ellipse([x0, y0, x1, y1], fill=color)
    words = ["SALE", "Download", "Play now", "50% OFF", "Install", "New", "Win", "Free"]
    for _ in range(int(rng.integers(1, 4))):
        text = " ".join(rng.choice(words, size=int(rng.integers(1, 3))))
        pos = (int(rng.integers(0, max(1, w - 60))), int(rng.integers(0, max(1, h - 15))))
        draw.text(pos, text, fill=tuple(int(v) for v in rng.integers(0, 256, 3)))
    arr = np.asarray(img, dtype=np.int16)
    noise = rng.normal(0.0, 4.0, arr.shape)
    return np.clip(arr + noise, 0, 255).astype(np.uint8)


# -- PASCAL VOC ----------------------------------------------------------------


def voc_annotation(filename, width, height, boxes, depth=3) -> str:
    """VOC XML; ``xmin/ymin`` are inclusive and ``xmax/ymax`` exclusive pixel edges."""
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = filename
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(width)
    ET.SubElement(size, "height").text = str(height)
    ET.SubElement(size, "depth").text = str(depth)
    for box in boxes:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = getattr(box, "name", "cross")
        ET.SubElement(obj, "difficult").text = "0"
        bb = ET.SubElement(obj, "bndbox")
        ET.SubElement(bb, "xmin").text = str(int(box.x))
        ET.SubElement(bb, "ymin").text = str(int(box.y))
        ET.SubElement(bb, "xmax").text = str(int(box.x + box.w))
        ET.SubElement(bb, "ymax").text = str(int(box.y + box.h))
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")


def parse_voc(text):
    """Returns ``(filename, (width, height), [GroundTruthBox])``."""
    root = ET.fromstring(text)
    size = root.find("size")
    width, height = int(size.findtext("width")), int(size.findtext("height"))
    boxes = []
    for obj in root.findall("object"):
        bb = obj.find("bndbox")
        x0, y0 = int(bb.findtext("xmin")), int(bb.findtext("ymin"))
        x1, y1 = int(bb.findtext("xmax")), int(bb.findtext("ymax"))
        boxes.append(GroundTruthBox(x0, y0, x1 - x0, y1 - y0, obj.findtext("name")))
    return root.findtext("filename"), (width, height), boxes


def generate_corpus(out_dir, seeds, symbols=None, size=(300, 250), scale_range=DEFAULT_SCALE_RANGE):
    """Write one PNG plus one VOC XML per seed; returns the image paths."""
    symbols = symbols if symbols is not None else cross_symbols()
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for seed in seeds:
        base = make_ad_image(10_000_000 + seed, size)
        symbol = symbols[seed % len(symbols)]
        image, box = embed_cross(base, symbol, seed, scale_range)
        name = f"cross_{seed:05d}.png"
        Image.fromarray(image).save(os.path.join(out_dir, name))
        with open(os.path.join(out_dir, f"cross_{seed:05d}.xml"), "w", encoding="utf-8") as fh:
            fh.write(voc_annotation(name, image.shape[1], image.shape[0], [box]))
        paths.append(os.path.join(out_dir, name))
    return paths
