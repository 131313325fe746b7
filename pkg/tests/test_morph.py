import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import dilate_pixel, erode_pixel
from pricetag import morph
from pricetag.morph import StructElem, dilate, erode, opening

SE3 = StructElem(3)
binary = arrays(np.bool_, st.tuples(st.integers(1, 24), st.integers(1, 24)))
sides = st.sampled_from([1, 3, 5, 7])


def test_struct_elem_validation():
    for bad in (0, 2, -3):
        with pytest.raises(ValueError):
            StructElem(bad)


def test_erode_examples():
    full = np.ones((6, 7), bool)
    out = erode(full, SE3)
    assert out[1:-1, 1:-1].all() and not out[0].any() and not out[:, 0].any()
    speck = np.zeros((5, 5), bool)
    speck[2, 2] = True
    assert not erode(speck, SE3).any()
    block = np.zeros((10, 10), bool)
    block[3:7, 3:7] = True
    expected = np.zeros((10, 10), bool)
    expected[4:6, 4:6] = True
    assert np.array_equal(erode(block, SE3), expected)


def test_dilate_examples():
    assert not dilate(np.zeros((5, 5), bool), SE3).any()
    img = np.zeros((10, 10), bool)
    img[5, 5] = True
    expected = np.zeros((10, 10), bool)
    expected[4:7, 4:7] = True
    assert np.array_equal(dilate(img, SE3), expected)


def test_open_examples():
    specks = np.zeros((20, 20), bool)
    specks[::4, ::5] = True
    assert not opening(specks, SE3).any()
    block = np.zeros((20, 20), bool)
    block[5:15, 5:15] = True
    assert np.array_equal(opening(block, SE3), block)
    stroke = np.zeros((20, 20), bool)
    stroke[2:18, 9] = True
    assert not opening(stroke, SE3).any()
    assert morph.open is opening


def test_matches_pixel_oracle(rng):
    for _ in range(100):
        img = rng.random((32, 32)) < rng.uniform(0.2, 0.8)
        side = int(rng.choice([1, 3, 5]))
        se = StructElem(side)
        assert np.array_equal(erode(img, se), erode_pixel(img, side))
        assert np.array_equal(dilate(img, se), dilate_pixel(img, side))


@given(binary, sides)
def test_anti_extensive(img, side):
    assert not (opening(img, StructElem(side)) & ~img).any()


@given(binary, sides)
def test_idempotent(img, side):
    once = opening(img, StructElem(side))
    assert np.array_equal(opening(once, StructElem(side)), once)


@given(binary, binary, sides)
def test_monotone(a, b, side):
    h, w = min(a.shape[0], b.shape[0]), min(a.shape[1], b.shape[1])
    small = a[:h, :w] & b[:h, :w]
    big = a[:h, :w]
    se = StructElem(side)
    assert not (opening(small, se) & ~opening(big, se)).any()


@given(binary, sides)
def test_duality(img, side):
    # with the complement taken outside the image too, erosion and dilation are dual
    se = StructElem(side)
    assert np.array_equal(dilate(img, se), ~erode(~img, se, border=True))
    assert np.array_equal(erode(img, se), ~dilate(~img, se, border=True))
