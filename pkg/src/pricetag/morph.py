"""Binary morphology with a centered square structuring element.

Pixels outside the image count as background for both erosion and dilation,
so foreground touching the border erodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StructElem:
    side: int = 3

    def __post_init__(self):
        if self.side < 1 or self.side % 2 == 0:
            raise ValueError("structuring element side must be odd and >= 1")


def _sweep(img: np.ndarray, side: int, axis: int, combine, border: bool) -> np.ndarray:
    r = side // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(img, pad, constant_values=border)
    n = img.shape[axis]
    out = padded.take(range(0, n), axis=axis)
    for k in range(1, side):
        combine(out, padded.take(range(k, k + n), axis=axis), out=out)
    return out


def erode(img: np.ndarray, se: StructElem = StructElem(), border: bool = False) -> np.ndarray:
    """``border`` sets the value assumed outside the image (background by default)."""
    img = np.asarray(img, dtype=bool)
    if se.side == 1:
        return img.copy()
    out = _sweep(img, se.side, 1, np.logical_and, border)
    return _sweep(out, se.side, 0, np.logical_and, border)


def dilate(img: np.ndarray, se: StructElem = StructElem(), border: bool = False) -> np.ndarray:
    img = np.asarray(img, dtype=bool)
    if se.side == 1:
        return img.copy()
    out = _sweep(img, se.side, 1, np.logical_or, border)
    return _sweep(out, se.side, 0, np.logical_or, border)


def opening(img: np.ndarray, se: StructElem = StructElem()) -> np.ndarray:
    """Erosion followed by dilation: drops specks smaller than the element."""
    return dilate(erode(img, se), se)


# ``open`` reads naturally at call sites (``morph.open``) but shadows the builtin
open = opening  # noqa: A001
