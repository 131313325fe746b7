"""Glyph segmentation, template recognition and price normalization."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from statistics import median
from typing import NamedTuple, Optional, Protocol, Sequence

import numpy as np

from . import font
from .cc import label_components
from .imgcore import Rect
from .pnm import read_image, write_image
from .zonefind import PriceFormat

TEMPLATE_W, TEMPLATE_H = 16, 24


class EmptyZoneError(ValueError):
    """The zone holds no glyph-sized ink."""


class RejectError(ValueError):
    """Post-processing could not turn the symbols into a valid price."""

    def __init__(self, reason: str, message: str = ""):
        super().__init__(message or reason)
        self.reason = reason


@dataclass(frozen=True)
class Price:
    minor_units: int
    frac_digits: int

    def __post_init__(self):
        if self.minor_units < 0:
            raise ValueError("price cannot be negative")
        if self.frac_digits not in (0, 2):
            raise ValueError("fractional digits must be 0 or 2")

    def __str__(self) -> str:
        if self.frac_digits == 0:
            return str(self.minor_units)
        whole, frac = divmod(self.minor_units, 100)
        return f"{whole}.{frac:02d}"


# -- atlas ----------------------------------------------------------------------


def normalize_glyph(glyph: np.ndarray, w: int = TEMPLATE_W, h: int = TEMPLATE_H) -> np.ndarray:
    """Nearest-neighbor resample of a binary glyph to ``w x h``."""
    glyph = np.asarray(glyph, dtype=bool)
    gh, gw = glyph.shape
    ys = np.minimum(((np.arange(h) + 0.5) * gh / h).astype(int), gh - 1)
    xs = np.minimum(((np.arange(w) + 0.5) * gw / w).astype(int), gw - 1)
    return glyph[np.ix_(ys, xs)]


@dataclass(frozen=True)
class GlyphAtlas:
    templates: dict[str, np.ndarray]
    font_name: str = font.FONT_NAME

    def __post_init__(self):
        if set(self.templates) != set(font.SYMBOLS) or len(self.templates) != 11:
            raise ValueError("an atlas holds exactly the symbols 0-9 and '.'")
        for s, t in self.templates.items():
            if t.shape != (TEMPLATE_H, TEMPLATE_W) or not t.any():
                raise ValueError(f"template {s!r} is empty or misshaped")

    @classmethod
    def build(cls, height: int = 96, style: font.FontStyle = font.FontStyle()) -> "GlyphAtlas":
        return cls({s: normalize_glyph(font.render_glyph_mask(s, height, style)) for s in font.SYMBOLS})

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = {}
        for s in font.SYMBOLS:
            name = "dot.pgm" if s == "." else f"{s}.pgm"
            write_image(directory / name, self.templates[s])
            files[s] = name
        manifest = {"font": self.font_name, "width": TEMPLATE_W, "height": TEMPLATE_H, "templates": files}
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "GlyphAtlas":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        templates = {s: read_image(directory / name) > 127 for s, name in manifest["templates"].items()}
        return cls(templates, manifest.get("font", "unknown"))


_DEFAULT_ATLAS: Optional[GlyphAtlas] = None


def default_atlas() -> GlyphAtlas:
    global _DEFAULT_ATLAS
    if _DEFAULT_ATLAS is None:
        _DEFAULT_ATLAS = GlyphAtlas.build()
    return _DEFAULT_ATLAS


# -- recognition ----------------------------------------------------------------


class Recognizer(Protocol):
    def classify(self, glyph: np.ndarray) -> tuple[str, float]: ...


def template_scores(glyph: np.ndarray, atlas: GlyphAtlas) -> dict[str, float]:
    g = normalize_glyph(glyph)
    return {s: float(np.mean(g == atlas.templates[s])) for s in font.SYMBOLS}


def classify_template(glyph: np.ndarray, atlas: GlyphAtlas) -> tuple[str, float]:
    """Best-matching symbol and its matching-pixel fraction.

    Ties resolve to the symbol that comes first in ``0123456789.``.
    """
    glyph = np.asarray(glyph, dtype=bool)
    if glyph.size == 0 or not glyph.any():
        raise ValueError("cannot classify an empty glyph")
    scores = template_scores(glyph, atlas)
    best = max(font.SYMBOLS, key=lambda s: (scores[s], -font.SYMBOLS.index(s)))
    return best, scores[best]


class TemplateRecognizer:
    """Built-in recognizer; stateless apart from the read-only atlas, so thread-safe."""

    def __init__(self, atlas: Optional[GlyphAtlas] = None):
        self.atlas = atlas or default_atlas()

    def classify(self, glyph: np.ndarray) -> tuple[str, float]:
        return classify_template(glyph, self.atlas)


RECOGNIZERS = {"template": TemplateRecognizer}


def make_recognizer(name: str) -> Recognizer:
    try:
        return RECOGNIZERS[name]()
    except KeyError:
        raise ValueError(f"unknown recognizer {name!r}; known: {sorted(RECOGNIZERS)}") from None


# -- segmentation ---------------------------------------------------------------


class GlyphBox(NamedTuple):
    rect: Rect
    is_dot: bool


def _h_overlap(a: Rect, b: Rect) -> float:
    inter = min(a.x1, b.x1) - max(a.x, b.x)
    return max(inter, 0) / min(a.w, b.w)


def segment_glyphs(zone: np.ndarray, digit_h: Optional[float] = None) -> list[GlyphBox]:
    """Split a binarized price crop into glyph boxes, left to right.

    ``digit_h`` is the expected digit height (defaults to 70% of the crop
    height). Pieces that overlap horizontally by half their width are merged
    first, so a digit broken into stacked fragments becomes one box. Digit
    boxes must then be at least half the expected height and, when the crop
    leaves room above and below the digits, must not run from its top edge
    to its bottom one; small, roughly
    square blobs whose bottom sits near the digit baseline become dot
    candidates.
    """
    zone = np.asarray(zone, dtype=bool)
    zh, zw = zone.shape
    if digit_h is None:
        digit_h = 0.7 * zh
    comps = [c for c in label_components(zone) if c.pixel_count >= 2]
    if not comps:
        raise EmptyZoneError("no ink in zone")

    # merge fragments stacked in the same column
    boxes = sorted((c.bbox for c in comps), key=lambda r: (r.x, r.y))
    merged: list[Rect] = []
    for r in boxes:
        tall_enough = r.h >= 0.12 * digit_h or r.w >= 0.12 * digit_h
        if not tall_enough:
            merged.append(r)
            continue
        for i, m in enumerate(merged):
            if (m.h >= 0.12 * digit_h or m.w >= 0.12 * digit_h) and _h_overlap(m, r) >= 0.5:
                merged[i] = m.union(r)
                break
        else:
            merged.append(r)

    # with a vertical margin, pieces spanning the whole crop are tag borders, not digits
    padded = zh > 1.15 * digit_h
    digits = [
        r
        for r in merged
        if 0.5 * digit_h <= r.h <= 1.4 * digit_h
        and 0.1 * digit_h <= r.w <= 1.2 * digit_h
        and not (padded and r.y == 0 and r.y1 == zh)
    ]
    if not digits:
        raise EmptyZoneError("no digit-sized glyph in zone")
    mh = median(r.h for r in digits)
    base = median(r.y1 for r in digits)
    dots = [
        r
        for r in merged
        if r.h <= 0.35 * mh
        and 0.08 * mh <= r.w <= 0.4 * mh
        and 0.08 * mh <= r.h
        and abs(r.y1 - base) <= 0.25 * mh
        and digits[0].x1 <= r.x + r.w / 2 <= digits[-1].x
    ]
    out = [GlyphBox(r, False) for r in digits] + [GlyphBox(r, True) for r in dots]
    out.sort(key=lambda g: (g.rect.x, g.rect.y))
    return out


def recognize_glyphs(
    zone: np.ndarray, boxes: Sequence[GlyphBox], recognizer: Recognizer
) -> list[tuple[str, float]]:
    return [recognizer.classify(zone[b.rect.y : b.rect.y1, b.rect.x : b.rect.x1]) for b in boxes]


# -- post-processing --------------------------------------------------------------

_PATTERN = re.compile(r"^(\d+)(?:\.(\d\d))?$")


def format_matches(text: str, f: PriceFormat) -> bool:
    m = _PATTERN.match(text)
    if not m:
        return False
    int_part, frac = m.group(1), m.group(2)
    if (frac is not None) != f.has_dot:
        return False
    return f.int_min <= len(int_part) <= f.int_max


def postprocess(
    symbols: Sequence[tuple[str, float]], formats: Sequence[PriceFormat], min_conf: float = 0.6
) -> Price:
    """Normalize recognized symbols to a price or raise :class:`RejectError`.

    Every symbol must reach ``min_conf`` and the string must fit an admissible
    format (digits, optionally one dot and exactly two decimals). A dotless
    string is never reinterpreted as a dotted price.
    """
    if not symbols:
        raise RejectError("empty-zone", "no symbols")
    if any(conf < min_conf for _, conf in symbols):
        raise RejectError("low-confidence")
    text = "".join(s for s, _ in symbols)
    fits = [f for f in formats if format_matches(text, f)]
    # overlapping formats are fine as long as they read the string the same way
    if not fits or len({f.frac_digits for f in fits}) != 1:
        raise RejectError("format-reject", f"{text!r} fits no admissible format")
    frac = fits[0].frac_digits
    return Price(int(text.replace(".", "")), frac)
