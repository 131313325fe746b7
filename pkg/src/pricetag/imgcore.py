"""Raster substrate shared by every pipeline stage.

Images are plain numpy arrays:

* color  -- ``uint8`` array of shape ``(H, W, 3)``, RGB
* gray   -- ``uint8`` array of shape ``(H, W)``
* binary -- ``bool`` array of shape ``(H, W)``, ``True`` = ink

Geometry uses continuous pixel-edge coordinates: pixel ``(x, y)`` covers
``[x, x+1) x [y, y+1)`` and its center sits at ``(x + 0.5, y + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numba
import numpy as np
from scipy import sparse


class InvalidZoneError(ValueError):
    """Raised when a zone (rect or quad) is degenerate or leaves the image."""


class Rect(NamedTuple):
    x: int
    y: int
    w: int
    h: int

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def corners(self) -> "Quad":
        return Quad.from_rect(self)

    def clip(self, width: int, height: int) -> "Rect":
        x0 = min(max(self.x, 0), width - 1)
        y0 = min(max(self.y, 0), height - 1)
        x1 = max(min(self.x1, width), x0 + 1)
        y1 = max(min(self.y1, height), y0 + 1)
        return Rect(x0, y0, x1 - x0, y1 - y0)

    def union(self, other: "Rect") -> "Rect":
        x0 = min(self.x, other.x)
        y0 = min(self.y, other.y)
        return Rect(x0, y0, max(self.x1, other.x1) - x0, max(self.y1, other.y1) - y0)

    def intersection_area(self, other: "Rect") -> int:
        w = min(self.x1, other.x1) - max(self.x, other.x)
        h = min(self.y1, other.y1) - max(self.y, other.y)
        return max(w, 0) * max(h, 0)

    def translate(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)


@dataclass(frozen=True)
class Quad:
    """Four corners ordered top-left, top-right, bottom-right, bottom-left."""

    corners: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.corners) != 4:
            raise ValueError("a quad needs exactly four corners")
        object.__setattr__(
            self, "corners", tuple((float(x), float(y)) for x, y in self.corners)
        )

    @classmethod
    def from_rect(cls, r: Rect) -> "Quad":
        return cls(((r.x, r.y), (r.x1, r.y), (r.x1, r.y1), (r.x, r.y1)))

    @classmethod
    def from_array(cls, pts) -> "Quad":
        pts = np.asarray(pts, dtype=float).reshape(4, 2)
        return cls(tuple(map(tuple, pts)))

    def as_array(self) -> np.ndarray:
        return np.array(self.corners, dtype=float)

    @property
    def area(self) -> float:
        """Signed shoelace area; positive for clockwise order in y-down coordinates."""
        p = self.as_array()
        x, y = p[:, 0], p[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def is_simple(self) -> bool:
        p = self.as_array()
        # a 4-gon self-intersects iff one pair of opposite edges crosses
        for a, b in ((0, 2), (1, 3)):
            if _segments_cross(p[a], p[(a + 1) % 4], p[b], p[(b + 1) % 4]):
                return False
        return True

    def bounding_rect(self) -> Rect:
        p = self.as_array()
        x0, y0 = np.floor(p.min(axis=0)).astype(int)
        x1, y1 = np.ceil(p.max(axis=0)).astype(int)
        return Rect(int(x0), int(y0), max(int(x1 - x0), 1), max(int(y1 - y0), 1))

    def scale(self, f: float) -> "Quad":
        return Quad.from_array(self.as_array() * f)

    def translate(self, dx: float, dy: float) -> "Quad":
        return Quad.from_array(self.as_array() + (dx, dy))

    def edge_lengths(self) -> tuple[float, float]:
        """Mean horizontal (top/bottom) and vertical (left/right) edge lengths."""
        p = self.as_array()
        top = np.hypot(*(p[1] - p[0]))
        bottom = np.hypot(*(p[2] - p[3]))
        left = np.hypot(*(p[3] - p[0]))
        right = np.hypot(*(p[2] - p[1]))
        return 0.5 * (top + bottom), 0.5 * (left + right)


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


# -- validation ---------------------------------------------------------------


def as_color(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected an HxWx3 color image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    return img


def as_gray(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected an HxW gray image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    return img


# -- conversions --------------------------------------------------------------


def to_gray(img: np.ndarray) -> np.ndarray:
    """BT.601 luma, rounded half up; exact integer arithmetic."""
    return _luma(as_color(img))


@numba.njit(cache=True)
def _luma(img: np.ndarray) -> np.ndarray:
    h, w, _ = img.shape
    out = np.empty((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            acc = 299 * np.int32(img[y, x, 0]) + 587 * np.int32(img[y, x, 1]) + 114 * np.int32(img[y, x, 2])
            out[y, x] = (acc + 500) // 1000
    return out


def _area_weights(n_in: int, n_out: int) -> sparse.csr_matrix:
    """Row i averages the input interval covered by output pixel i."""
    step = n_in / n_out
    rows, cols, vals = [], [], []
    for i in range(n_out):
        lo, hi = i * step, (i + 1) * step
        j0, j1 = int(math.floor(lo)), min(int(math.ceil(hi)), n_in)
        for j in range(j0, j1):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 1e-12:
                rows.append(i)
                cols.append(j)
                vals.append(overlap / step)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n_out, n_in))


@numba.njit(cache=True)
def _apply_weights(indptr, indices, data, src):
    """CSR weight matrix times ``src`` (rows x columns), in float64."""
    n_out = indptr.size - 1
    out = np.zeros((n_out, src.shape[1]))
    for i in range(n_out):
        for k in range(indptr[i], indptr[i + 1]):
            wgt = data[k]
            row = src[indices[k]]
            for j in range(src.shape[1]):
                out[i, j] += wgt * row[j]
    return out


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def scaled_size(width: int, height: int, max_w: int, max_h: int) -> tuple[int, int, float]:
    if width <= max_w and height <= max_h:
        return width, height, 1.0
    f = min(max_w / width, max_h / height)
    out_w = min(max(_round_half_up(width * f), 1), max_w)
    out_h = min(max(_round_half_up(height * f), 1), max_h)
    return out_w, out_h, f


def scale_to_limit(img: np.ndarray, max_w: int = 1350, max_h: int = 700) -> np.ndarray:
    """Downscale by one uniform factor (area averaging) to fit ``max_w x max_h``.

    Output sizes round half up. Images already within the limit are returned
    as-is, so the operation is idempotent.
    """
    if max_w < 1 or max_h < 1:
        raise ValueError("size limits must be positive")
    img = np.asarray(img)
    h, w = img.shape[:2]
    out_w, out_h, _ = scaled_size(w, h, max_w, max_h)
    if (out_w, out_h) == (w, h):
        return img
    wy = _area_weights(h, out_h)
    wx = _area_weights(w, out_w)
    chans = img[..., None] if img.ndim == 2 else img
    # rows first, then columns on the transpose
    flat = chans.reshape(h, -1)
    rows = _apply_weights(wy.indptr, wy.indices, wy.data, flat)
    rows = rows.reshape(out_h, w, -1).transpose(1, 0, 2).reshape(w, -1)
    both = _apply_weights(wx.indptr, wx.indices, wx.data, rows)
    both = both.reshape(out_w, out_h, -1).transpose(1, 0, 2)
    out = np.clip(np.floor(both + 0.5), 0, 255).astype(np.uint8)
    return out[..., 0] if img.ndim == 2 else out


# -- integral images ----------------------------------------------------------


@dataclass(frozen=True)
class IntegralImage:
    """Cumulative sums with a zero first row and column (int64, exact)."""

    sums: np.ndarray
    sq_sums: np.ndarray

    @property
    def width(self) -> int:
        return self.sums.shape[1] - 1

    @property
    def height(self) -> int:
        return self.sums.shape[0] - 1

    def box(self, table: np.ndarray, x0, y0, x1, y1):
        return table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]


@numba.njit(cache=True)
def _integral_tables(g):
    h, w = g.shape
    sums = np.zeros((h + 1, w + 1), dtype=np.int64)
    sq = np.zeros((h + 1, w + 1), dtype=np.int64)
    for y in range(h):
        row_s = 0
        row_q = 0
        for x in range(w):
            v = np.int64(g[y, x])
            row_s += v
            row_q += v * v
            sums[y + 1, x + 1] = sums[y, x + 1] + row_s
            sq[y + 1, x + 1] = sq[y, x + 1] + row_q
    return sums, sq


def build_integral(img: np.ndarray) -> IntegralImage:
    sums, sq = _integral_tables(np.ascontiguousarray(as_gray(img)))
    return IntegralImage(sums, sq)


def window_stats(ii: IntegralImage, r: Rect) -> tuple[float, float]:
    """Mean and population standard deviation over ``r``."""
    if r.w < 1 or r.h < 1 or r.x < 0 or r.y < 0 or r.x1 > ii.width or r.y1 > ii.height:
        raise InvalidZoneError(f"{r} is not inside a {ii.width}x{ii.height} image")
    n = r.w * r.h
    s = int(ii.box(ii.sums, r.x, r.y, r.x1, r.y1))
    q = int(ii.box(ii.sq_sums, r.x, r.y, r.x1, r.y1))
    mean = s / n
    var = (n * q - s * s) / (n * n)
    return mean, math.sqrt(max(0.0, var))


# -- cropping and warping -----------------------------------------------------


def crop(img: np.ndarray, r: Rect) -> np.ndarray:
    h, w = img.shape[:2]
    if r.w < 1 or r.h < 1 or r.x < 0 or r.y < 0 or r.x1 > w or r.y1 > h:
        raise InvalidZoneError(f"{r} is not inside a {w}x{h} image")
    return img[r.y : r.y1, r.x : r.x1].copy()


def check_quad(q: Quad, width: int, height: int, tol: float = 1e-6) -> None:
    p = q.as_array()
    if abs(q.area) < 1e-9 or not q.is_simple():
        raise InvalidZoneError("quad is degenerate or self-intersecting")
    if (p < -tol).any() or (p[:, 0] > width + tol).any() or (p[:, 1] > height + tol).any():
        raise InvalidZoneError(f"quad corner outside the {width}x{height} image")


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``img`` at continuous coordinates (pixel centers at +0.5).

    Coordinates outside the image are clamped to the border pixels.
    """
    img = np.asarray(img)
    src = img.reshape(img.shape[0], img.shape[1], -1)
    if src.dtype == np.bool_:
        src = src.view(np.uint8)
    xs, ys = np.broadcast_arrays(np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64))
    out = _bilinear(src, xs.ravel(), ys.ravel())
    shape = xs.shape + img.shape[2:]
    return out.reshape(shape)


@numba.njit(cache=True)
def _bilinear(src, xs, ys):
    h, w, ch = src.shape
    out = np.empty((xs.size, ch), dtype=np.float64)
    for i in range(xs.size):
        fx = min(max(xs[i] - 0.5, 0.0), w - 1.0)
        fy = min(max(ys[i] - 0.5, 0.0), h - 1.0)
        x0 = min(int(np.floor(fx)), w - 1)
        y0 = min(int(np.floor(fy)), h - 1)
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
        ax = fx - x0
        ay = fy - y0
        for c in range(ch):
            top = src[y0, x0, c] * (1 - ax) + src[y0, x1, c] * ax
            bot = src[y1, x0, c] * (1 - ax) + src[y1, x1, c] * ax
            out[i, c] = top * (1 - ay) + bot * ay
    return out


def warp_quad_to_rect(img: np.ndarray, q: Quad, out_w: int, out_h: int) -> np.ndarray:
    """Resample the quad ``q`` of ``img`` onto an upright ``out_w x out_h`` raster.

    Output pixel centers are mapped into the quad by bilinear interpolation of
    its corners and sampled bilinearly. An axis-aligned quad whose size equals
    the output size reproduces the plain crop exactly.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be positive")
    h, w = img.shape[:2]
    check_quad(q, w, h)
    tl, tr, br, bl = q.as_array()
    s = (np.arange(out_w) + 0.5) / out_w
    t = (np.arange(out_h) + 0.5) / out_h
    s, t = np.meshgrid(s, t)
    top = tl + (tr - tl) * s[..., None]
    bottom = bl + (br - bl) * s[..., None]
    pts = top + (bottom - top) * t[..., None]
    vals = bilinear_sample(img, pts[..., 0], pts[..., 1])
    if img.dtype == np.bool_:
        return vals >= 0.5
    return np.clip(np.floor(vals + 0.5), 0, 255).astype(img.dtype)


def rotate_points(pts: Sequence, center: tuple[float, float], degrees: float) -> np.ndarray:
    """Rotate points by ``degrees`` counter-clockwise as seen on screen (y down)."""
    a = math.radians(degrees)
    c, s = math.cos(a), math.sin(a)
    p = np.asarray(pts, dtype=float) - center
    # screen CCW in y-down coordinates
    out = np.stack([c * p[:, 0] + s * p[:, 1], -s * p[:, 0] + c * p[:, 1]], axis=1)
    return out + center
