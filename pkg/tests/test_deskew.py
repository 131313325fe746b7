import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import line_sum, line_sum_envelope, projection_variance_angle
from pricetag import font
from pricetag.deskew import (
    compensate,
    dyadic_offsets,
    estimate_skew,
    fht_down,
    fht_down_reference,
    fht_horizontal,
)
from pricetag.imgcore import Quad, Rect, warp_quad_to_rect
from pricetag.synthgen import rotate_image


def _padded(img):
    h, w = img.shape
    n = 1 << max(0, math.ceil(math.log2(w)))
    out = np.zeros((h + n, n), np.int64)
    out[:h, :w] = img
    return out


def text_block(angle=0.0, lines=("129.99", "4075.10"), height=40):
    """Black multi-line digits on white, rotated about the canvas center."""
    canvas = np.full((360, 520, 3), 255, np.uint8)
    y = 110
    for text in lines:
        cov, _ = font.render_text(text, height)
        h, w = cov.shape
        canvas[y : y + h, 120 : 120 + w][cov >= 0.5] = 0
        y += int(1.6 * height)
    return rotate_image(canvas, angle)[..., 0] < 128


def ink_rect(mask):
    ys, xs = np.nonzero(mask)
    return Rect(int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def test_horizontal_row_peaks_at_zero_shear():
    img = np.zeros((20, 64), bool)
    img[7] = True
    acc = fht_horizontal(img)
    assert acc.down.max() == 64 and acc.down[7, 0] == 64
    assert np.unravel_index(np.argmax(acc.down), acc.down.shape) == (7, 0)


def test_rising_line_found_at_its_shear():
    n = 512
    img = np.zeros((40, n), bool)
    xs = np.arange(n)
    img[30 - np.floor(16 * xs / (n - 1) + 0.5).astype(int), xs] = True
    acc = fht_horizontal(img)
    up_best = np.unravel_index(np.argmax(acc.up), acc.up.shape)
    assert abs(up_best[1] - 16) <= 1
    assert acc.up.max() >= 0.9 * n
    assert acc.down.max() < acc.up.max()


def test_numba_kernel_matches_reference(rng):
    for h, w in ((1, 1), (5, 3), (17, 64), (40, 100)):
        img = rng.random((h, w)) < 0.3
        assert np.array_equal(fht_down(img), fht_down_reference(img))


def test_dyadic_offsets_shape():
    assert dyadic_offsets(8, 0).tolist() == [0] * 8
    assert dyadic_offsets(8, 7).tolist() == list(range(8))
    assert dyadic_offsets(4, 2).tolist() == [0, 1, 1, 2]


def test_cells_sum_their_dyadic_pattern(rng):
    img = rng.random((12, 16)) < 0.4
    padded = _padded(img)
    hp, n = padded.shape
    down = fht_down(img)
    for s in range(n):
        rows = dyadic_offsets(n, s)
        for y in range(hp):
            assert down[y, s] == padded[(y + rows) % hp, np.arange(n)].sum()


@pytest.mark.parametrize("w", [16, 64, 100])
def test_cells_within_line_envelope(rng, w):
    img = rng.random((30, w)) < 0.3
    padded = _padded(img)
    hp, n = padded.shape
    down = fht_down(img)
    for s in range(n):
        for y in range(hp):
            lo, hi = line_sum_envelope(padded, y, s)
            assert lo <= down[y, s] <= hi
        assert down[:, s].sum() == img.sum()
    assert all(down[y, 0] == line_sum(padded, y, 0) for y in range(hp))


@given(arrays(np.bool_, st.tuples(st.integers(1, 20), st.integers(1, 40))))
def test_shear_columns_conserve_ink(img):
    acc = fht_horizontal(img)
    assert (acc.down.sum(axis=0) == img.sum()).all()
    assert (acc.up.sum(axis=0) == img.sum()).all()
    assert acc.down.shape == (img.shape[0] + acc.width, acc.width)


def test_horizontal_text_gives_zero():
    mask = text_block(0.0)
    assert estimate_skew(mask, ink_rect(mask)) == 0.0


def test_empty_zone_gives_zero():
    assert estimate_skew(np.zeros((50, 50), bool), Rect(5, 5, 20, 20)) == 0.0
    with pytest.raises(ValueError):
        estimate_skew(np.ones((5, 5), bool), Rect(0, 0, 5, 5), max_deg=25)


@pytest.mark.parametrize("angle", [-10.0, -5.0, -2.0, 2.0, 5.0, 10.0])
def test_rotation_round_trip(angle):
    mask = text_block(angle)
    got = estimate_skew(mask, ink_rect(mask))
    assert abs(got - angle) <= 0.7
    oracle = projection_variance_angle(mask, np.arange(-15, 15.01, 0.1))
    assert abs(got - oracle) <= 0.7


@pytest.mark.parametrize("angle", [-7.0, -3.0, 0.0, 4.0, 8.0])
def test_mirror_flips_sign(angle):
    mask = text_block(angle)
    r = ink_rect(mask)
    flipped = mask[::-1]
    fr = Rect(r.x, mask.shape[0] - r.y1, r.w, r.h)
    a, b = estimate_skew(mask, r), estimate_skew(flipped, fr)
    quantum = math.degrees(math.atan(1 / (fht_horizontal(mask[r.y : r.y1, r.x : r.x1]).width - 1)))
    assert abs(a + b) <= quantum + 1e-9


def test_compensate_identity_at_or_below_threshold():
    r = Rect(10, 20, 200, 60)
    for a in (0.0, 0.5, -1.5, 1.5):
        assert compensate(r, a, 1.5) == Quad.from_rect(r)


def test_compensated_quad_inside_rect_and_rotated():
    r = Rect(100, 100, 300, 90)
    q = compensate(r, 5.0)
    pts = q.as_array()
    assert pts[:, 0].min() >= r.x - 1e-6 and pts[:, 0].max() <= r.x1 + 1e-6
    assert pts[:, 1].min() >= r.y - 1e-6 and pts[:, 1].max() <= r.y1 + 1e-6
    (x0, y0), (x1, y1) = pts[0], pts[1]
    assert math.degrees(math.atan2(-(y1 - y0), x1 - x0)) == pytest.approx(5.0)
    clamped = compensate(Rect(0, 0, 300, 90), 5.0, img_w=250, img_h=80).as_array()
    assert clamped[:, 0].max() <= 250 and clamped[:, 1].max() <= 80


def test_compensated_warp_is_upright():
    angle = 5.0
    mask = text_block(angle, lines=("129.99",), height=60)
    r = ink_rect(mask)
    q = compensate(r, estimate_skew(mask, r))
    out = warp_quad_to_rect(mask.astype(np.uint8) * 255, q, 300, 60) > 127
    assert abs(estimate_skew(out, Rect(0, 0, 300, 60))) <= 1.0
    straight = warp_quad_to_rect(mask.astype(np.uint8) * 255, Quad.from_rect(r), 300, 60) > 127
    assert abs(estimate_skew(straight, Rect(0, 0, 300, 60))) > 2.0
