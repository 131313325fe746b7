"""Niblack local adaptive binarization with digit-shaped windows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numba
import numpy as np

from .imgcore import as_gray, build_integral

Polarity = Literal["dark-text", "light-text"]


def odd(n: int) -> int:
    return n if n % 2 else n + 1


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


@dataclass(frozen=True)
class DigitSizeEstimate:
    digit_h: int
    digit_w: int

    def __post_init__(self):
        if self.digit_h < 4 or self.digit_w < 4:
            raise ValueError("digit size estimate must be at least 4 px")
        if self.digit_w >= self.digit_h:
            raise ValueError("digits are taller than wide")

    @classmethod
    def clamped(cls, digit_h: float, digit_w: float) -> "DigitSizeEstimate":
        h = max(5, _round_half_up(digit_h))
        w = min(max(4, _round_half_up(digit_w)), h - 1)
        return cls(h, w)


@dataclass(frozen=True)
class NiblackParams:
    k: float = -0.2
    win_w: int = 73
    win_h: int = 49
    polarity: Polarity = "dark-text"

    def __post_init__(self):
        if self.win_w < 3 or self.win_h < 3 or self.win_w % 2 == 0 or self.win_h % 2 == 0:
            raise ValueError("window sides must be odd and at least 3")
        if not -1.0 <= self.k <= 1.0:
            raise ValueError("k must lie in [-1, 1]")
        if self.polarity not in ("dark-text", "light-text"):
            raise ValueError(f"unknown polarity {self.polarity!r}")


def derive_window(
    est: DigitSizeEstimate, h_factor: float = 1.2, w_factor: float = 3.0
) -> tuple[int, int]:
    """Window a bit taller than one digit and as wide as a few digits.

    Returns ``(win_w, win_h)``.
    """
    win_h = odd(_round_half_up(h_factor * est.digit_h))
    win_w = odd(_round_half_up(w_factor * est.digit_w))
    return max(win_w, 3), max(win_h, 3)


@numba.njit(cache=True)
def _threshold(g, sums, sq, rx, ry, k, dark):
    h, w = g.shape
    out = np.empty((h, w), dtype=np.bool_)
    for y in range(h):
        y0 = max(y - ry, 0)
        y1 = min(y + ry + 1, h)
        for x in range(w):
            x0 = max(x - rx, 0)
            x1 = min(x + rx + 1, w)
            n = (y1 - y0) * (x1 - x0)
            s = sums[y1, x1] - sums[y0, x1] - sums[y1, x0] + sums[y0, x0]
            q = sq[y1, x1] - sq[y0, x1] - sq[y1, x0] + sq[y0, x0]
            lhs = np.int64(g[y, x]) * n - s
            rhs = k * np.sqrt(np.float64(n * q - s * s))
            out[y, x] = lhs < rhs if dark else lhs > rhs
    return out


def niblack(img: np.ndarray, p: NiblackParams) -> np.ndarray:
    """Binarize with T = mean + k * std over a centered, border-clamped window.

    Statistics come from integral images. The comparison is carried out as
    ``p*n - S < k * sqrt(n*Q - S**2)`` (S, Q window sum and squared sum, n
    pixel count), which is the threshold test multiplied through by n; both
    sides are exact integers up to the final square root, so the result does
    not depend on summation order. Ties fall to background.
    """
    g = np.ascontiguousarray(as_gray(img))
    ii = build_integral(g)
    return _threshold(
        g, ii.sums, ii.sq_sums, p.win_w // 2, p.win_h // 2, float(p.k), p.polarity == "dark-text"
    )
