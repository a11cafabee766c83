import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from organoquant.imaging import (
    OTSU,
    ChannelImage,
    DegenerateHistogram,
    Fixed,
    WrongBitDepth,
    binarize,
    label_components,
    morph_open,
    otsu_threshold,
    to_8bit,
)
from oracles import erode_dilate_open, filtered_components, flood_fill_components, otsu_scan


def img16(values):
    return ChannelImage(np.asarray(values, dtype=np.uint16), 16, "N-cad")


def test_channel_image_is_read_only_copy():
    src = np.zeros((2, 3), dtype=np.uint8)
    im = ChannelImage(src, 8)
    src[0, 0] = 9
    assert im.pixels[0, 0] == 0
    with pytest.raises(ValueError):
        im.pixels[0, 0] = 1
    assert (im.width, im.height) == (3, 2)


def test_channel_image_rejects_out_of_range():
    with pytest.raises(ValueError):
        ChannelImage(np.array([[300]]), 8)
    with pytest.raises(ValueError):
        ChannelImage(np.zeros((2, 2), dtype=np.uint8), 12)


def test_to_8bit_endpoints_and_midpoint():
    out = to_8bit(img16([[0, 65535, 32768]]))
    assert out.pixels.tolist() == [[0, 255, 128]]
    assert out.bit_depth == 8 and out.marker == "N-cad"


def test_to_8bit_matches_rational_rounding():
    from fractions import Fraction

    v = np.arange(0, 65536, 7, dtype=np.uint16)
    got = to_8bit(img16(v[None, :])).pixels[0]
    want = [int(Fraction(int(x) * 255, 65535) + Fraction(1, 2)) for x in v]
    assert got.tolist() == want


def test_to_8bit_minmax():
    assert to_8bit(img16(np.full((3, 3), 777)), "minmax").pixels.tolist() == [[0] * 3] * 3
    out = to_8bit(img16([[100, 200, 300]]), "minmax")
    assert out.pixels.tolist() == [[0, 128, 255]]


def test_to_8bit_wrong_depth():
    with pytest.raises(WrongBitDepth):
        to_8bit(ChannelImage(np.zeros((1, 1), np.uint8), 8))
    with pytest.raises(ValueError):
        to_8bit(img16([[1]]), "gamma")


@given(st.lists(st.integers(0, 65535), min_size=2, max_size=50))
def test_to_8bit_monotone(vals):
    vals = sorted(vals)
    for mode in ("full_scale", "minmax"):
        out = to_8bit(img16([vals]), mode).pixels[0]
        assert np.all(np.diff(out.astype(int)) >= 0)


def test_binarize_fixed():
    zero = ChannelImage(np.zeros((4, 4), np.uint8), 8)
    assert not binarize(zero, Fixed(10)).any()
    px = np.array([[0, 255], [255, 0]], np.uint8)
    assert (binarize(ChannelImage(px, 8), Fixed(128)) == (px == 255)).all()


def test_binarize_otsu_bimodal():
    px = np.full((10, 10), 20, np.uint8)
    px[:, 5:] = 220
    t = otsu_threshold(px)
    assert 20 <= t <= 219
    assert t == otsu_scan(px.ravel().tolist())
    assert (binarize(ChannelImage(px, 8), OTSU) == (px == 220)).all()


def test_otsu_constant_image():
    with pytest.raises(DegenerateHistogram):
        otsu_threshold(np.full((3, 3), 7, np.uint8))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 255), min_size=2, max_size=60).filter(lambda v: len(set(v)) > 1))
def test_otsu_matches_exhaustive_scan(vals):
    assert otsu_threshold(np.array(vals)) == otsu_scan(vals)


def test_binarize_requires_8bit():
    with pytest.raises(WrongBitDepth):
        binarize(img16([[1]]))


def test_otsu_survives_pickling():
    assert pickle.loads(pickle.dumps(OTSU)) is OTSU


def test_morph_open_examples():
    m = np.zeros((7, 7), bool)
    m[3, 3] = True
    assert not morph_open(m).any()
    sq = np.zeros((9, 9), bool)
    sq[2:7, 2:7] = True
    assert (morph_open(sq) == sq).all()
    full = np.ones((6, 6), bool)
    assert (morph_open(full) == full).all()
    with pytest.raises(ValueError):
        morph_open(m, 0)


masks = arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12)))


@settings(max_examples=80, deadline=None)
@given(masks, st.integers(1, 2))
def test_morph_open_matches_oracle(m, r):
    want = np.array(erode_dilate_open(m.tolist(), r), dtype=bool)
    assert (morph_open(m, r) == want).all()


@settings(max_examples=80, deadline=None)
@given(masks)
def test_morph_open_anti_extensive_idempotent(m):
    o = morph_open(m)
    assert not (o & ~m).any()
    assert (morph_open(o) == o).all()


def test_label_examples():
    assert label_components(np.zeros((5, 5), bool)).component_count == 0
    d = np.zeros((3, 3), bool)
    d[0, 0] = d[1, 1] = True
    lm = label_components(d)
    assert lm.component_count == 1 and lm.labels.dtype == np.int32


def test_label_raster_order_and_min_area():
    m = np.zeros((5, 6), bool)
    m[0, 4:6] = True  # first in raster order, area 2
    m[2:5, 0:3] = True  # area 9
    lm = label_components(m)
    assert lm.labels[0, 4] == 1 and lm.labels[2, 0] == 2
    lm = label_components(m, min_area=3)
    assert lm.component_count == 1 and lm.labels[0, 4] == 0 and lm.labels[2, 0] == 1


@settings(max_examples=60, deadline=None)
@given(masks, st.integers(0, 6))
def test_label_matches_flood_fill(m, min_area):
    want, comps = filtered_components(m.tolist(), min_area)
    lm = label_components(m, min_area)
    assert lm.component_count == len(comps)
    assert lm.labels.tolist() == want


def test_label_random_64_masks_against_flood_fill():
    rng = np.random.default_rng(1)
    for _ in range(20):
        m = rng.random((64, 64)) < rng.uniform(0.2, 0.6)
        want, comps = flood_fill_components(m.tolist())
        lm = label_components(m)
        assert lm.component_count == len(comps)
        assert lm.labels.tolist() == want
