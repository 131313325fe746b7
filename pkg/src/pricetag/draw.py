"""Overlay drawing for debug images."""

from __future__ import annotations

import numpy as np

from .imgcore import Quad, Rect

BLUE = (0, 0, 255)
RED = (255, 0, 0)
GREEN = (0, 200, 0)
YELLOW = (255, 200, 0)


def draw_polyline(img: np.ndarray, pts, color, closed: bool = True, thickness: int = 2) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    h, w = img.shape[:2]
    r = thickness // 2
    for a, b in zip(pts[:-1], pts[1:]):
        n = int(np.ceil(np.hypot(*(b - a)))) + 1
        xs = np.linspace(a[0], b[0], n).round().astype(int)
        ys = np.linspace(a[1], b[1], n).round().astype(int)
        for dy in range(-r, thickness - r):
            for dx in range(-r, thickness - r):
                x = np.clip(xs + dx, 0, w - 1)
                y = np.clip(ys + dy, 0, h - 1)
                img[y, x] = color
    return img


def draw_rect(img: np.ndarray, r: Rect, color, thickness: int = 2) -> np.ndarray:
    pts = [(r.x, r.y), (r.x1 - 1, r.y), (r.x1 - 1, r.y1 - 1), (r.x, r.y1 - 1)]
    return draw_polyline(img, pts, color, True, thickness)


def draw_quad(img: np.ndarray, q: Quad, color, thickness: int = 2) -> np.ndarray:
    return draw_polyline(img, q.as_array(), color, True, thickness)


def binary_to_rgb(mask: np.ndarray) -> np.ndarray:
    gray = np.where(mask, 0, 255).astype(np.uint8)
    return np.repeat(gray[..., None], 3, axis=2)
