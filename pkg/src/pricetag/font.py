"""Embedded monoline digit font.

Glyphs are polylines in a unit box (u to the right, v down) stroked with
round caps. Every digit is one connected stroke set, so a clean render is a
single 8-connected component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

FONT_NAME = "pricetag-mono"
SYMBOLS = "0123456789."


def _arc(cx, cy, rx, ry, t0, t1, n=20):
    t = np.radians(np.linspace(t0, t1, n))
    return list(zip(cx + rx * np.cos(t), cy + ry * np.sin(t)))


def _bezier(p0, c, p1, n=14):
    t = np.linspace(0, 1, n)[:, None]
    p0, c, p1 = map(np.asarray, (p0, c, p1))
    pts = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * c + t**2 * p1
    return [tuple(p) for p in pts]


def _flip(strokes):
    return [[(1 - u, 1 - v) for u, v in s] for s in strokes]


_SIX = [
    _arc(0.5, 0.68, 0.5, 0.32, 0, 360, 28),
    _bezier((0.86, 0.02), (0.02, 0.0), (0.0, 0.68)),
]

STROKES: dict[str, list[list[tuple[float, float]]]] = {
    "0": [_arc(0.5, 0.5, 0.5, 0.5, 0, 360, 32)],
    "1": [[(0.12, 0.24), (0.58, 0.0), (0.58, 1.0)], [(0.15, 1.0), (1.0, 1.0)]],
    "2": [_arc(0.5, 0.3, 0.5, 0.3, 190, 380, 18) + [(0.0, 1.0), (1.0, 1.0)]],
    "3": [
        [(0.05, 0.0), (0.95, 0.0), (0.4, 0.4)] + _arc(0.5, 0.69, 0.5, 0.31, 250, 500, 22),
    ],
    "4": [[(0.74, 1.0), (0.74, 0.0), (0.0, 0.7), (1.0, 0.7)]],
    "5": [[(0.95, 0.0), (0.1, 0.0), (0.04, 0.46)] + _arc(0.5, 0.68, 0.5, 0.32, 218, 505, 22)],
    "6": _SIX,
    "7": [[(0.0, 0.0), (1.0, 0.0), (0.32, 1.0)]],
    "8": [_arc(0.5, 0.24, 0.4, 0.24, 0, 360, 26), _arc(0.5, 0.73, 0.5, 0.27, 0, 360, 28)],
    "9": _flip(_SIX),
}


@dataclass(frozen=True)
class FontStyle:
    """Proportions relative to the digit height."""

    aspect: float = 0.6  # digit box width / height
    stroke: float = 0.13  # stroke width / height
    spacing: float = 0.08  # gap / digit box width
    dot_scale: float = 1.35  # dot diameter / stroke width


def _segments(symbol: str, box_w: float, box_h: float, sw: float) -> np.ndarray:
    pad = sw / 2
    segs = []
    for stroke in STROKES[symbol]:
        pts = np.array(stroke, dtype=float)
        pts[:, 0] = pad + pts[:, 0] * (box_w - 2 * pad)
        pts[:, 1] = pad + pts[:, 1] * (box_h - 2 * pad)
        segs.extend(zip(pts[:-1], pts[1:]))
    return np.array(segs)  # (S, 2, 2)


def _stroke_coverage(segs: np.ndarray, radius: float, w: int, h: int, ox: float, oy: float) -> np.ndarray:
    """Anti-aliased coverage of capsules of ``radius`` around the segments."""
    return _capsules(np.ascontiguousarray(segs, dtype=np.float64), float(radius), w, h, float(ox), float(oy))


@njit(cache=True)
def _capsules(segs, radius, w, h, ox, oy):
    out = np.empty((h, w))
    for y in range(h):
        py = y + 0.5 - oy
        for x in range(w):
            px = x + 0.5 - ox
            d2 = np.inf
            for k in range(segs.shape[0]):
                ax, ay = segs[k, 0, 0], segs[k, 0, 1]
                dx, dy = segs[k, 1, 0] - ax, segs[k, 1, 1] - ay
                ll = dx * dx + dy * dy
                t = 0.0
                if ll > 0:
                    t = min(max(((px - ax) * dx + (py - ay) * dy) / ll, 0.0), 1.0)
                ex = px - (ax + t * dx)
                ey = py - (ay + t * dy)
                d2 = min(d2, ex * ex + ey * ey)
            out[y, x] = min(max(radius - np.sqrt(d2) + 0.5, 0.0), 1.0)
    return out


def glyph_advance(symbol: str, height: float, style: FontStyle = FontStyle()) -> float:
    box_w = style.aspect * height
    if symbol == ".":
        return style.dot_scale * style.stroke * height + 2 * style.spacing * box_w
    return box_w * (1 + style.spacing)


def render_text(
    text: str, height: float, style: FontStyle = FontStyle()
) -> tuple[np.ndarray, list[tuple[float, float, float, float]]]:
    """Ink coverage in [0, 1] for ``text`` with digit height ``height`` px.

    Returns the coverage raster (one pixel of margin on every side) and the
    ink box ``(x, y, w, h)`` of each symbol in raster coordinates.
    """
    sw = style.stroke * height
    box_w = style.aspect * height
    margin = 1
    total_w = sum(glyph_advance(ch, height, style) for ch in text) - style.spacing * box_w
    raster_w = int(math.ceil(total_w)) + 2 * margin
    raster_h = int(math.ceil(height)) + 2 * margin
    cov = np.zeros((raster_h, raster_w))
    boxes = []
    x = float(margin)
    for ch in text:
        if ch == ".":
            d = style.dot_scale * sw
            gx = x + style.spacing * box_w
            gy = margin + height - d
            x0, y0 = int(math.floor(gx)), int(math.floor(gy))
            x1, y1 = int(math.ceil(gx + d)) + 1, int(math.ceil(gy + d)) + 1
            sub = _stroke_coverage(
                np.array([[[d / 2, d / 2], [d / 2, d / 2]]]), d / 2, x1 - x0, y1 - y0, gx - x0, gy - y0
            )
            cov[y0:y1, x0:x1] = np.maximum(cov[y0:y1, x0:x1], sub)
            boxes.append((gx, gy, d, d))
        else:
            if ch not in STROKES:
                raise ValueError(f"no glyph for {ch!r}")
            segs = _segments(ch, box_w, height, sw)
            x0, y0 = int(math.floor(x)), margin
            x1 = min(int(math.ceil(x + box_w)) + 1, raster_w)
            y1 = min(y0 + int(math.ceil(height)) + 1, raster_h)
            sub = _stroke_coverage(segs, sw / 2, x1 - x0, y1 - y0, x - x0, 0.0)
            cov[y0:y1, x0:x1] = np.maximum(cov[y0:y1, x0:x1], sub)
            boxes.append((x, float(margin), box_w, height))
        x += glyph_advance(ch, height, style)
    return cov, boxes


def render_glyph_mask(symbol: str, height: int = 96, style: FontStyle = FontStyle()) -> np.ndarray:
    """Binary mask of one symbol cropped to its ink."""
    cov, _ = render_text(symbol, height, style)
    mask = cov >= 0.5
    ys, xs = np.nonzero(mask)
    return mask[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]
