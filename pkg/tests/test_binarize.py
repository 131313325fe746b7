import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import niblack_direct, niblack_pixel
from pricetag.binarize import DigitSizeEstimate, NiblackParams, derive_window, niblack, odd


@pytest.mark.parametrize(
    "h, w, expected",
    [(40, 24, (73, 49)), (10, 6, (19, 13)), (41, 25, (75, 49))],
)
def test_derive_window(h, w, expected):
    assert derive_window(DigitSizeEstimate(h, w)) == expected


def test_odd():
    assert [odd(n) for n in (2, 3, 48, 49)] == [3, 3, 49, 49]


def test_parameter_validation():
    with pytest.raises(ValueError):
        NiblackParams(win_w=4)
    with pytest.raises(ValueError):
        NiblackParams(k=1.5)
    with pytest.raises(ValueError):
        NiblackParams(polarity="inverted")
    with pytest.raises(ValueError):
        DigitSizeEstimate(3, 2)
    with pytest.raises(ValueError):
        DigitSizeEstimate(10, 10)
    assert DigitSizeEstimate.clamped(2.0, 9.0) == DigitSizeEstimate(5, 4)


@pytest.mark.parametrize("k", [-1.0, -0.2, 0.0, 0.5])
def test_flat_image_is_background(k):
    img = np.full((20, 30), 130, np.uint8)
    for pol in ("dark-text", "light-text"):
        assert not niblack(img, NiblackParams(k, 5, 7, pol)).any()


def test_dark_square_on_white():
    img = np.full((9, 9), 255, np.uint8)
    img[3:6, 3:6] = 0
    out = niblack(img, NiblackParams(-0.2, 5, 5))
    assert np.array_equal(out, niblack_pixel(img, 5, 5, -0.2))
    assert out[3:6, 3:6].all()


def test_matches_nested_loop_oracle(rng):
    for _ in range(3):
        img = rng.integers(0, 256, (16, 19), dtype=np.uint8)
        for ww, wh in ((3, 5), (7, 3), (9, 9)):
            for k, pol in ((-0.2, "dark-text"), (0.3, "light-text")):
                got = niblack(img, NiblackParams(k, ww, wh, pol))
                assert np.array_equal(got, niblack_pixel(img, ww, wh, k, pol == "dark-text"))


@given(
    arrays(np.uint8, st.tuples(st.integers(1, 24), st.integers(1, 24))),
    st.sampled_from([3, 5, 9, 15]),
    st.sampled_from([3, 5, 9, 15]),
    st.floats(-1, 1),
)
def test_polarity_duality(img, ww, wh, k):
    dark = niblack(img, NiblackParams(k, ww, wh, "dark-text"))
    light = niblack(255 - img, NiblackParams(-k, ww, wh, "light-text"))
    assert np.array_equal(dark, light)


@given(
    arrays(np.uint8, st.tuples(st.integers(1, 30), st.integers(1, 30))),
    st.sampled_from([3, 5, 9]),
    st.sampled_from([3, 5, 9]),
    st.floats(-1, 1),
)
def test_matches_direct_window_sums(img, ww, wh, k):
    assert np.array_equal(niblack(img, NiblackParams(k, ww, wh)), niblack_direct(img, ww, wh, k))


@given(st.integers(0, 10_000), st.sampled_from([3, 5, 9]), st.sampled_from([3, 5, 9]))
def test_output_is_local(seed, ww, wh):
    r = np.random.default_rng(seed)
    img = r.integers(0, 256, (30, 30), dtype=np.uint8)
    y, x = int(r.integers(0, 30)), int(r.integers(0, 30))
    other = img.copy()
    far = np.ones((30, 30), bool)
    far[max(0, y - wh // 2) : y + wh // 2 + 1, max(0, x - ww // 2) : x + ww // 2 + 1] = False
    other[far] = r.integers(0, 256, int(far.sum()), dtype=np.uint8)
    p = NiblackParams(-0.2, ww, wh)
    assert niblack(img, p)[y, x] == niblack(other, p)[y, x]


def test_large_window_on_small_image(rng):
    img = rng.integers(0, 256, (5, 4), dtype=np.uint8)
    assert np.array_equal(niblack(img, NiblackParams(-0.2, 73, 49)), niblack_pixel(img, 73, 49, -0.2))
