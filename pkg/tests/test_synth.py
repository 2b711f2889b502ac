import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from madroid.detectors.synth import (
    alpha_composite,
    cross_symbols,
    embed_cross,
    generate_corpus,
    make_ad_image,
    make_cross_symbol,
    parse_voc,
    scale_sides,
    side_for_scale,
    template_bank,
    voc_annotation,
)
from madroid.detectors.boxes import GroundTruthBox
from madroid.errors import InputError


def _digest(arr):
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def test_seed_42_is_deterministic():
    base = make_ad_image(0)
    symbol = make_cross_symbol(0)
    a, box_a = embed_cross(base, symbol, 42)
    b, box_b = embed_cross(base, symbol, 42)
    assert _digest(a) == _digest(b) and box_a == box_b
    assert a.shape == (250, 300, 3)


def test_fixed_scale_gives_exact_side():
    # 3% of min(300, 250) = 7.5, rounded half up
    for seed in range(20):
        _, box = embed_cross(make_ad_image(seed), make_cross_symbol(1), seed, (0.03, 0.03))
        assert (box.w, box.h) == (8, 8)
    assert side_for_scale(0.03, (250, 300)) == 8
    assert side_for_scale(0.10, (250, 300)) == 25


def test_scale_sides_cover_default_range():
    assert scale_sides((0.03, 0.10), (250, 300)) == list(range(8, 26))


def test_invalid_scale_ranges():
    base = make_ad_image(1)
    with pytest.raises(InputError):
        embed_cross(base, make_cross_symbol(), 1, (0.0, 0.1))
    with pytest.raises(InputError):
        embed_cross(base, make_cross_symbol(), 1, (0.2, 0.1))
    with pytest.raises(InputError):
        embed_cross(base, make_cross_symbol(), 1, (1.5, 2.0))


def test_embedded_pixels_are_the_resized_symbol():
    base = np.full((250, 300, 3), 77, np.uint8)
    symbol = make_cross_symbol(2)
    image, box = embed_cross(base, symbol, 9)
    patch = image[box.y:box.y + box.h, box.x:box.x + box.w]
    bank = template_bank([symbol], [box.w])[0]
    assert np.array_equal(patch, bank)
    outside = image.copy()
    outside[box.y:box.y + box.h, box.x:box.x + box.w] = 77
    assert (outside == 77).all()


def test_alpha_composite_blends():
    base = np.zeros((4, 4, 3), np.uint8)
    patch = np.zeros((2, 2, 4), np.uint8)
    patch[..., :3] = 200
    patch[..., 3] = 128
    out = alpha_composite(base, patch, 1, 1)
    assert out[1, 1, 0] == round(200 * 128 / 255)
    assert out[0, 0, 0] == 0
    gray = alpha_composite(np.zeros((3, 3), np.uint8), np.full((1, 1, 3), 90, np.uint8), 2, 2)
    assert gray[2, 2] == 90


def test_voc_roundtrip():
    boxes = [GroundTruthBox(3, 4, 10, 12), GroundTruthBox(50, 60, 8, 8)]
    text = voc_annotation("a.png", 300, 250, boxes)
    assert "<xmax>13</xmax>" in text and "<name>cross</name>" in text
    assert parse_voc(text) == ("a.png", (300, 250), boxes)


def test_corpus_generation(tmp_path):
    paths = generate_corpus(tmp_path, range(12))
    assert len(paths) == 12
    assert len(list(tmp_path.glob("*.xml"))) == 12
    for seed, path in enumerate(paths):
        name, (w, h), [box] = parse_voc((tmp_path / f"cross_{seed:05d}.xml").read_text())
        assert name == f"cross_{seed:05d}.png"
        image = np.asarray(Image.open(path))
        assert image.shape == (h, w, 3)
        expected, truth = embed_cross(make_ad_image(10_000_000 + seed), cross_symbols()[seed % 4], seed)
        assert box == truth
        assert np.array_equal(image, expected)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_box_inside_image_and_in_scale_range(seed, style):
    base = make_ad_image(seed % 1000)
    image, box = embed_cross(base, make_cross_symbol(style), seed)
    assert 0 <= box.x and box.x + box.w <= 300 and 0 <= box.y and box.y + box.h <= 250
    assert 8 <= box.w <= 25
    assert _digest(embed_cross(base, make_cross_symbol(style), seed)[0]) == _digest(image)


def test_distinct_seeds_give_distinct_outputs():
    base = make_ad_image(0)
    digests = {_digest(embed_cross(base, make_cross_symbol(0), s)[0]) for s in range(200)}
    assert len(digests) == 200
