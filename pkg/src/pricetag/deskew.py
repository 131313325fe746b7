"""Skew estimation with the fast (dyadic) Hough transform and zone compensation.

Angles are in degrees, positive counter-clockwise as seen on screen: a text
line rising to the right has a positive angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .imgcore import Quad, Rect, rotate_points


@dataclass(frozen=True)
class FhtAccumulator:
    """Line sums for near-horizontal lines through a zero-padded image.

    ``down[y, s]`` sums the dyadic pattern that starts at row ``y`` in column 0
    and ends at row ``y + s`` in column ``n - 1``; ``up`` holds the same for the
    vertically mirrored image, i.e. lines rising by ``s``. Rows are cyclic
    over ``height`` = image rows + ``n`` padding rows, so intercepts at or
    beyond the image height stand for lines entering from above.
    """

    down: np.ndarray
    up: np.ndarray
    width: int  # padded, a power of two
    image_height: int

    @property
    def height(self) -> int:
        return self.down.shape[0]

    def slope(self, shear: int) -> float:
        return shear / max(self.width - 1, 1)


def _pad_width(w: int) -> int:
    return 1 << max(0, math.ceil(math.log2(max(w, 1))))


@njit(cache=True)
def _fht_kernel(a: np.ndarray) -> np.ndarray:
    # a is (columns, rows); block b of width w holds shears 0..w-1 at b*w
    n, hp = a.shape
    cur = a.copy()
    nxt = np.empty_like(cur)
    width = 1
    while width < n:
        for b in range(n // (2 * width)):
            lb = 2 * b * width
            rb = lb + width
            for s in range(2 * width):
                half = s // 2
                shift = s - half
                lc = cur[lb + half]
                rc = cur[rb + half]
                out = nxt[lb + s]
                for y in range(hp):
                    yy = y + shift
                    if yy >= hp:
                        yy -= hp
                    out[y] = lc[y] + rc[yy]
        cur, nxt = nxt, cur
        width *= 2
    return cur


def fht_down(img: np.ndarray) -> np.ndarray:
    """Dyadic FHT for descending lines; returns ``(rows + n, n)`` sums."""
    img = np.asarray(img)
    h, w = img.shape
    n = _pad_width(w)
    a = np.zeros((n, h + n), dtype=np.int32)
    a[:w, :h] = img.T
    return np.ascontiguousarray(_fht_kernel(a).T)


def fht_down_reference(img: np.ndarray) -> np.ndarray:
    """Plain numpy version of :func:`fht_down`."""
    img = np.asarray(img)
    h, w = img.shape
    n = _pad_width(w)
    hp = h + n
    a = np.zeros((hp, n), dtype=np.int32)
    a[:h, :w] = img
    acc = a[:, :, None]  # (rows, blocks, shears)
    rows = np.arange(hp)
    width = 1
    while width < n:
        left = acc[:, 0::2, :]
        right = acc[:, 1::2, :]
        shears = np.arange(2 * width)
        half = shears // 2
        shift = shears - half
        ridx = (rows[:, None] + shift[None, :]) % hp
        nb = left.shape[1]
        acc = left[:, :, half] + right[ridx[:, None, :], np.arange(nb)[None, :, None], half[None, None, :]]
        width *= 2
    return acc[:, 0, :]


def fht_horizontal(img: np.ndarray) -> FhtAccumulator:
    img = np.asarray(img, dtype=bool)
    return FhtAccumulator(
        down=fht_down(img), up=fht_down(img[::-1]), width=_pad_width(img.shape[1]), image_height=img.shape[0]
    )


def dyadic_offsets(n: int, shear: int) -> np.ndarray:
    """Row offset of the dyadic pattern in each column, computed top-down."""
    if n == 1:
        return np.zeros(1, dtype=int)
    half = shear // 2
    sub = dyadic_offsets(n // 2, half)
    return np.concatenate([sub, sub + (shear - half)])


def estimate_skew(img: np.ndarray, zone: Rect, max_deg: float = 15.0) -> float:
    """Angle of the text lines inside ``zone`` of a binary image.

    Picks the shear whose accumulator column has the largest variance across
    intercepts: aligned text rows pile ink into few lines. Ties go to the
    smaller angle. An empty zone gives 0.
    """
    if max_deg > 20:
        raise ValueError("search range is limited to 20 degrees")
    crop = np.asarray(img, dtype=bool)[zone.y : zone.y1, zone.x : zone.x1]
    if crop.size == 0 or not crop.any():
        return 0.0
    acc = fht_horizontal(crop)
    n = acc.width
    s_max = min(n - 1, int(math.floor(math.tan(math.radians(max_deg)) * (n - 1) + 1e-9)))
    best = None
    for sign, table in ((-1, acc.down), (1, acc.up)):
        var = table[:, : s_max + 1].astype(np.float64).var(axis=0)
        s = int(np.argmax(var))  # first maximum, i.e. the smallest shear
        key = (var[s], -s, sign)
        if best is None or key > best[0]:
            best = (key, sign * s)
    shear = best[1]
    return math.degrees(math.atan(shear / (n - 1))) if n > 1 else 0.0


def compensate(
    r: Rect,
    angle: float,
    threshold_deg: float = 1.5,
    img_w: int | None = None,
    img_h: int | None = None,
) -> Quad:
    """Turn the axis-aligned zone into a quad following text inclined by ``angle``.

    At or below the threshold the rect corners come back unchanged. Above it
    the quad is the tightest rectangle at ``angle`` whose axis-aligned bounding
    box is ``r``; if that is degenerate, ``r`` itself is rotated about its
    center. Corners are clamped into the image when its size is given.
    """
    if abs(angle) <= threshold_deg:
        return Quad.from_rect(r)
    t = math.radians(abs(angle))
    c, s = math.cos(t), math.sin(t)
    det = c * c - s * s
    length = (r.w * c - r.h * s) / det
    height = (r.h * c - r.w * s) / det
    if length <= 0 or height < 0.25 * r.h:
        length, height = r.w, r.h
    cx, cy = r.x + r.w / 2, r.y + r.h / 2
    base = [
        (cx - length / 2, cy - height / 2),
        (cx + length / 2, cy - height / 2),
        (cx + length / 2, cy + height / 2),
        (cx - length / 2, cy + height / 2),
    ]
    pts = rotate_points(base, (cx, cy), angle)
    if img_w is not None and img_h is not None:
        pts[:, 0] = np.clip(pts[:, 0], 0, img_w)
        pts[:, 1] = np.clip(pts[:, 1], 0, img_h)
    return Quad.from_array(pts)
