"""8-connected component labeling (two-pass, union-find) with exact stats."""

from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np

from .imgcore import Rect


class Component(NamedTuple):
    id: int
    bbox: Rect
    pixel_count: int
    centroid: tuple[float, float]

    def translate(self, dx: int, dy: int) -> "Component":
        cx, cy = self.centroid
        return self._replace(bbox=self.bbox.translate(dx, dy), centroid=(cx + dx, cy + dy))


@numba.njit(cache=True)
def _find(parent, a):
    root = a
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


@numba.njit(cache=True)
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


@numba.njit(cache=True)
def _two_pass(img):
    h, w = img.shape
    labels = np.zeros((h, w), dtype=np.int32)
    # a new provisional label needs a background west neighbor: <= ceil(w/2) per row
    parent = np.zeros(h * ((w + 1) // 2) + 2, dtype=np.int32)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if not img[y, x]:
                continue
            best = 0
            # already-visited 8-neighbors: W, NW, N, NE
            if x > 0 and labels[y, x - 1]:
                best = labels[y, x - 1]
            if y > 0:
                for dx in (-1, 0, 1):
                    xx = x + dx
                    if 0 <= xx < w:
                        lab = labels[y - 1, xx]
                        if lab:
                            if best == 0:
                                best = lab
                            elif lab != best:
                                _union(parent, best, lab)
            if best == 0:
                parent[nxt] = nxt
                best = nxt
                nxt += 1
            labels[y, x] = best

    # second pass: resolve roots, number components by first pixel in scan order
    final = np.zeros(nxt, dtype=np.int32)
    count = 0
    cap = nxt
    x0 = np.empty(cap, dtype=np.int64)
    y0 = np.empty(cap, dtype=np.int64)
    x1 = np.empty(cap, dtype=np.int64)
    y1 = np.empty(cap, dtype=np.int64)
    npix = np.zeros(cap, dtype=np.int64)
    sx = np.zeros(cap, dtype=np.int64)
    sy = np.zeros(cap, dtype=np.int64)
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if not lab:
                continue
            root = _find(parent, lab)
            f = final[root]
            if f == 0:
                count += 1
                f = count
                final[root] = f
                x0[f - 1] = x
                x1[f - 1] = x
                y0[f - 1] = y
                y1[f - 1] = y
            labels[y, x] = f
            i = f - 1
            if x < x0[i]:
                x0[i] = x
            if x > x1[i]:
                x1[i] = x
            y1[i] = y
            npix[i] += 1
            sx[i] += x
            sy[i] += y
    return labels, x0[:count], y0[:count], x1[:count], y1[:count], npix[:count], sx[:count], sy[:count]


def label_image(img: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Label map (0 = background, 1..n in scan order) plus per-component stat arrays."""
    img = np.ascontiguousarray(img, dtype=np.bool_)
    if img.ndim != 2:
        raise ValueError("expected a 2-D binary image")
    labels, x0, y0, x1, y1, n, sx, sy = _two_pass(img)
    stats = dict(x=x0, y=y0, w=x1 - x0 + 1, h=y1 - y0 + 1, count=n, sum_x=sx, sum_y=sy)
    return labels, stats


def components_from_stats(stats: dict[str, np.ndarray], keep=None) -> list[Component]:
    idx = range(len(stats["x"])) if keep is None else np.flatnonzero(keep)
    x, y, w, h = (stats[k].tolist() for k in ("x", "y", "w", "h"))
    n, sx, sy = (stats[k].tolist() for k in ("count", "sum_x", "sum_y"))
    # centroid of pixel centers
    return [
        Component(i + 1, Rect(x[i], y[i], w[i], h[i]), n[i], (sx[i] / n[i] + 0.5, sy[i] / n[i] + 0.5))
        for i in idx
    ]


def label_components(img: np.ndarray) -> list[Component]:
    """Components ordered by their first pixel in row-major scan."""
    _, stats = label_image(img)
    return components_from_stats(stats)
