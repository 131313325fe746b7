"""Seeded synthetic price-tag images with ground truth.

Five tag layouts are drawn on a cluttered shelf background, then degraded in
a fixed order: rotate, contrast, flare, blur, noise. All randomness comes
from numpy's PCG64 generator; the per-image seed is derived from the master
seed and the image index through ``numpy.random.SeedSequence``, so any
subset of a dataset can be regenerated independently.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from numba import njit
from scipy import ndimage

from . import font
from .imgcore import Quad, rotate_points
from .ocr import Price
from .pnm import write_image

MANIFEST_VERSION = 1
TAG_TYPES = (1, 2, 3, 4, 5)
DOTLESS_TYPES = (3,)
DIGIT_H_FRAC = (0.14, 0.21)

# default class fractions, taken from a 708-image reference set of shelf photos
DEFAULT_MIX = {
    "absent": 29 / 708,
    "angle": 80 / 708,
    "blur": 90 / 708,
    "contrast": 150 / 708,
    "washed": 50 / 708,
    "noise": 0.0,
}
CLASSES = ("absent", "angle", "blur", "contrast", "washed", "noise")


@dataclass(frozen=True)
class TagSpec:
    tag_type: int
    price: Optional[Price]
    width: int
    height: int
    digit_h_frac: float = 0.17
    stroke: float = 0.13
    aspect: float = 0.6

    def __post_init__(self):
        if self.tag_type not in TAG_TYPES:
            raise ValueError(f"tag type must be one of {TAG_TYPES}")
        if self.width < 64 or self.height < 32:
            raise ValueError("canvas too small for a tag")


@dataclass(frozen=True)
class DegradationParams:
    blur_sigma: float = 0.0
    noise_sigma: float = 0.0
    contrast: float = 1.0
    flare: float = 0.0
    rotation_deg: float = 0.0
    tag_absent: bool = False

    def __post_init__(self):
        if not -15.0 <= self.rotation_deg <= 15.0:
            raise ValueError("rotation must stay within +/-15 degrees")
        if self.blur_sigma < 0 or self.noise_sigma < 0 or self.flare < 0:
            raise ValueError("degradation magnitudes must be non-negative")
        if not 0 < self.contrast <= 1:
            raise ValueError("contrast factor must lie in (0, 1]")

    @property
    def is_identity(self) -> bool:
        return (
            self.blur_sigma == 0
            and self.noise_sigma == 0
            and self.contrast == 1
            and self.flare == 0
            and self.rotation_deg == 0
        )


@dataclass(frozen=True)
class GroundTruth:
    price: Optional[Price]
    zone: Optional[Quad]
    tag_type: int
    degradation: DegradationParams = field(default_factory=DegradationParams)
    condition: str = "clean"


# -- drawing helpers ------------------------------------------------------------


def _fill(img, x0, y0, x1, y1, color):
    h, w = img.shape[:2]
    x0, x1 = max(int(x0), 0), min(int(x1), w)
    y0, y1 = max(int(y0), 0), min(int(y1), h)
    if x1 > x0 and y1 > y0:
        img[y0:y1, x0:x1] = color


def _stamp(img, cov, x, y, color):
    """Alpha-composite an ink coverage raster with its top-left at (x, y)."""
    h, w = img.shape[:2]
    ch, cw = cov.shape
    x, y = int(round(x)), int(round(y))
    sx0, sy0 = max(0, -x), max(0, -y)
    dx0, dy0 = max(0, x), max(0, y)
    dx1, dy1 = min(w, x + cw), min(h, y + ch)
    if dx1 <= dx0 or dy1 <= dy0:
        return
    a = cov[sy0 : sy0 + dy1 - dy0, sx0 : sx0 + dx1 - dx0, None]
    region = img[dy0:dy1, dx0:dx1].astype(np.float64)
    img[dy0:dy1, dx0:dx1] = np.rint(region * (1 - a) + np.asarray(color, float) * a).astype(np.uint8)


def _text(rng, n_min, n_max, dot=False):
    n = int(rng.integers(n_min, n_max + 1))
    s = "".join(str(d) for d in rng.integers(0, 10, n))
    if dot and n > 3:
        k = int(rng.integers(1, n - 1))
        s = s[:k] + "." + s[k:]
    return s


def _shelf(img, rng, x0, y0, x1, y1):
    """Shelf clutter: product boxes, stripes and small print."""
    base = rng.integers(40, 150, 3)
    _fill(img, x0, y0, x1, y1, base)
    area_w, area_h = x1 - x0, y1 - y0
    for _ in range(int(rng.integers(4, 12))):
        w = rng.uniform(0.1, 0.6) * area_w
        h = rng.uniform(0.2, 0.9) * area_h
        px = x0 + rng.uniform(-0.1, 1.0) * area_w
        py = y0 + rng.uniform(-0.1, 1.0) * area_h
        _fill(img, px, py, px + w, py + h, rng.integers(0, 256, 3))
    for _ in range(int(rng.integers(0, 4))):
        py = y0 + rng.uniform(0, 1) * area_h
        _fill(img, x0, py, x1, py + rng.uniform(2, 10), rng.integers(0, 100, 3))


def _small_print(img, rng, x, y, max_w, height, lines, color):
    for i in range(lines):
        s = _text(rng, 4, 14, dot=bool(rng.integers(0, 2)))
        cov, _ = font.render_text(s, height, font.FontStyle(stroke=rng.uniform(0.1, 0.16)))
        if cov.shape[1] > max_w:
            cov = cov[:, : int(max_w)]
        _stamp(img, cov, x, y + i * height * 1.6, color)


def _barcode(img, rng, x, y, w, h, unit):
    cx = x
    while cx < x + w:
        bw = unit * int(rng.integers(1, 4))
        _fill(img, cx, y, cx + bw, y + h, (10, 10, 10))
        cx += bw + unit * int(rng.integers(1, 4))


def _price_placement(t, rng, W, H, pw, ph):
    """Top-left corner of the price block for layout ``t``."""
    if t == 2:
        cx = rng.uniform(0.62, 0.7) * W
        x = max(cx - pw / 2, 0.38 * W)
        bottom = rng.uniform(0.8, 0.88) * H
    else:
        right = rng.uniform(0.9, 0.95) * W
        x = max(right - pw, 0.38 * W)
        bottom = rng.uniform(0.84, 0.92) * H
    return x, bottom - ph


def _price_text(price: Price) -> str:
    return str(price)


# -- rendering ------------------------------------------------------------------


def render_tag(spec: TagSpec, seed: int) -> tuple[np.ndarray, GroundTruth]:
    """Draw one tag (or bare shelf when ``spec.price`` is None)."""
    rng = np.random.default_rng(seed)
    W, H = spec.width, spec.height
    img = np.zeros((H, W, 3), dtype=np.uint8)
    _shelf(img, rng, 0, 0, W, H)
    if spec.price is None:
        for _ in range(int(rng.integers(1, 4))):
            _small_print(
                img, rng, rng.uniform(0, 0.7) * W, rng.uniform(0, 0.8) * H, 0.3 * W,
                rng.uniform(0.02, 0.05) * H, int(rng.integers(1, 3)), rng.integers(0, 256, 3),
            )
        return img, GroundTruth(None, None, spec.tag_type)

    t = spec.tag_type
    mx0, mx1 = rng.uniform(0.01, 0.05, 2) * W
    my0, my1 = rng.uniform(0.01, 0.05, 2) * H
    tag_color = rng.integers(232, 256, 3)
    _fill(img, mx0, my0, W - mx1, H - my1, tag_color)
    ink = rng.integers(0, 50, 3)
    if t == 4:
        _fill(img, mx0, my0, W - mx1, my0 + rng.uniform(0.22, 0.3) * H, (250, 215, 40))
        ink = np.array([int(rng.integers(150, 200)), int(rng.integers(0, 40)), int(rng.integers(0, 40))])

    small_h = rng.uniform(0.03, 0.055) * H
    _small_print(img, rng, mx0 + 0.04 * W, my0 + 0.05 * H, 0.85 * W, small_h, int(rng.integers(2, 4)), (20, 20, 20))
    bar_unit = max(1, int(round(W / 700)))
    bar_h = rng.uniform(0.12, 0.2) * H
    bar_w = rng.uniform(0.18, 0.28) * W
    bar_y = rng.uniform(0.55, 0.92) * H - bar_h
    if t != 5:
        _barcode(img, rng, mx0 + 0.04 * W, bar_y, bar_w, bar_h, bar_unit)
        _small_print(img, rng, mx0 + 0.04 * W, bar_y + bar_h + 0.01 * H, bar_w, small_h * 0.8, 1, (20, 20, 20))

    style = font.FontStyle(aspect=spec.aspect, stroke=spec.stroke)
    digit_h = spec.digit_h_frac * H
    text = _price_text(spec.price)
    cov, _ = font.render_text(text, digit_h, style)
    ph, pw = cov.shape
    # keep the price inside the right-hand 60% of the frame
    if pw > 0.57 * W:
        raise ValueError("price does not fit the tag; lower digit_h_frac")
    px, py = _price_placement(t, rng, W, H, pw, ph)
    px, py = round(px), round(py)
    _stamp(img, cov, px, py, ink)
    mask = cov >= 0.5
    ys, xs = np.nonzero(mask)
    zone = Quad.from_array(
        [(px + xs.min(), py + ys.min()), (px + xs.max() + 1, py + ys.min()),
         (px + xs.max() + 1, py + ys.max() + 1), (px + xs.min(), py + ys.max() + 1)]
    )

    if t == 5:
        # a second digit group of similar size on the left: article number
        code = _text(rng, 3, 5)
        ch = digit_h * rng.uniform(0.85, 1.0)
        ccov, _ = font.render_text(code, ch, style)
        cx = rng.uniform(0.04, 0.08) * W
        cwidth = min(ccov.shape[1], int(0.26 * W))
        _stamp(img, ccov[:, :cwidth], cx, py + ph - ccov.shape[0], (20, 20, 20))
        _barcode(img, rng, mx0 + 0.04 * W, my0 + 0.3 * H, bar_w, bar_h * 0.8, bar_unit)
    return img, GroundTruth(spec.price, zone, t)


# -- degradation ----------------------------------------------------------------


def _rotation_fill(img: np.ndarray) -> np.ndarray:
    border = np.concatenate([img[0], img[-1], img[:, 0], img[:, -1]])
    return np.rint(border.mean(axis=0)).astype(np.uint8)


def rotate_image(img: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate counter-clockwise (on screen) about the image center, bilinear.

    Pixels mapped from outside the source take its mean border color.
    """
    a = math.radians(degrees)
    return _rotate(img, math.cos(a), math.sin(a), _rotation_fill(img).astype(np.float64))


@njit(cache=True)
def _rotate(img, c, s, fill):
    h, w, nch = img.shape
    out = np.empty_like(img)
    cy, cx = (h - 1) / 2, (w - 1) / 2
    for r in range(h):
        for col in range(w):
            # output (row, col) back to input (row, col)
            sr = c * (r - cy) + s * (col - cx) + cy
            sc = -s * (r - cy) + c * (col - cx) + cx
            r0 = int(math.floor(sr))
            c0 = int(math.floor(sc))
            ar = sr - r0
            ac = sc - c0
            for ch in range(nch):
                acc = 0.0
                for dr in range(2):
                    for dc in range(2):
                        wgt = (ar if dr else 1 - ar) * (ac if dc else 1 - ac)
                        rr, cc = r0 + dr, c0 + dc
                        if 0 <= rr < h and 0 <= cc < w:
                            acc += wgt * img[rr, cc, ch]
                        else:
                            acc += wgt * fill[ch]
                out[r, col, ch] = min(max(math.floor(acc + 0.5), 0), 255)
    return out


def rotate_quad(q: Quad, width: int, height: int, degrees: float) -> Quad:
    return Quad.from_array(rotate_points(q.as_array(), (width / 2, height / 2), degrees))


def degrade(img: np.ndarray, d: DegradationParams, seed: int) -> np.ndarray:
    """Apply rotation, contrast, flare, blur and noise in that order."""
    if d.is_identity:
        return img.copy()
    rng = np.random.default_rng(seed)
    out = rotate_image(img, d.rotation_deg) if d.rotation_deg else img
    f = out.astype(np.float32)
    if d.contrast != 1:
        f = 128 + d.contrast * (f - 128)
    if d.flare:
        h, w = f.shape[:2]
        phi = rng.uniform(0, 2 * math.pi)
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float32)
        proj = xs * math.cos(phi) + ys * math.sin(phi)
        ramp = (proj - proj.min()) / max(float(np.ptp(proj)), 1e-6)
        f = f + d.flare * ramp[..., None]
    if d.blur_sigma:
        f = ndimage.gaussian_filter(f, sigma=(d.blur_sigma, d.blur_sigma, 0), mode="nearest")
    if d.noise_sigma:
        f = f + d.noise_sigma * rng.standard_normal(f.shape, dtype=np.float32)
    return np.clip(np.rint(f), 0, 255).astype(np.uint8)


# -- datasets -------------------------------------------------------------------


def image_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=(index,)).generate_state(1)[0])


def class_counts(n: int, mix: dict[str, float]) -> dict[str, int]:
    unknown = set(mix) - set(CLASSES) - {"clean"}
    if unknown:
        raise ValueError(f"unknown mix classes: {sorted(unknown)}")
    fracs = {k: float(mix.get(k, 0.0)) for k in CLASSES}
    if any(v < 0 for v in fracs.values()) or sum(fracs.values()) > 1 + 1e-9:
        raise ValueError("mix fractions must be non-negative and sum to at most 1")
    counts = {k: int(math.floor(n * v + 0.5)) for k, v in fracs.items()}
    while sum(counts.values()) > n:
        k = max(counts, key=counts.get)
        counts[k] -= 1
    counts["clean"] = n - sum(counts.values())
    return counts


def _random_price(rng, dotted: bool) -> Price:
    if dotted:
        int_digits = int(rng.choice([1, 2, 3, 4], p=[0.25, 0.35, 0.3, 0.1]))
        lo = 0 if int_digits == 1 else 10 ** (int_digits - 1)
        whole = int(rng.integers(lo, 10**int_digits))
        return Price(whole * 100 + int(rng.integers(0, 100)), 2)
    int_digits = int(rng.choice([2, 3, 4], p=[0.3, 0.45, 0.25]))
    return Price(int(rng.integers(10 ** (int_digits - 1), 10**int_digits)), 0)


def degradation_for(condition: str, rng) -> DegradationParams:
    if condition in ("clean", "absent"):
        return DegradationParams(tag_absent=condition == "absent")
    if condition == "angle":
        return DegradationParams(rotation_deg=float(rng.choice([-1, 1]) * rng.uniform(2.0, 8.0)))
    if condition == "blur":
        return DegradationParams(blur_sigma=float(rng.uniform(1.0, 2.5)))
    if condition == "contrast":
        return DegradationParams(contrast=float(rng.uniform(0.25, 0.45)), noise_sigma=float(rng.uniform(2.0, 6.0)))
    if condition == "washed":
        return DegradationParams(contrast=float(rng.uniform(0.2, 0.35)), flare=float(rng.uniform(40.0, 80.0)))
    if condition == "noise":
        return DegradationParams(noise_sigma=float(rng.uniform(10.0, 20.0)))
    raise ValueError(f"unknown condition {condition!r}")


@dataclass(frozen=True)
class Sample:
    index: int
    condition: str
    seed: int


def make_sample(index: int, condition: str, master: int) -> tuple[np.ndarray, GroundTruth]:
    seed = image_seed(master, index)
    rng = np.random.default_rng(seed)
    tag_type = int(rng.choice(TAG_TYPES))
    width = int(rng.integers(800, 1351))
    height = int(np.clip(round(width * rng.uniform(0.49, 0.53)), 400, 700))
    d = degradation_for(condition, rng)
    price = None if d.tag_absent else _random_price(rng, tag_type not in DOTLESS_TYPES)
    spec = TagSpec(
        tag_type, price, width, height,
        digit_h_frac=float(rng.uniform(*DIGIT_H_FRAC)),
        stroke=float(rng.uniform(0.11, 0.15)),
        aspect=float(rng.uniform(0.56, 0.64)),
    )
    img, gt = render_tag(spec, int(rng.integers(0, 2**63)))
    img = degrade(img, d, int(rng.integers(0, 2**63)))
    zone = gt.zone
    if zone is not None and d.rotation_deg:
        zone = rotate_quad(zone, width, height, d.rotation_deg)
    return img, replace(gt, zone=zone, degradation=d, condition=condition)


MANIFEST_FIELDS = (
    ["path", "condition", "tag_type", "price_minor", "frac_digits"]
    + [f"zone_{a}{i}" for i in range(4) for a in "xy"]
    + ["blur_sigma", "noise_sigma", "contrast", "flare", "rotation_deg", "tag_absent"]
)


def _manifest_row(path: str, gt: GroundTruth) -> dict:
    d = gt.degradation
    row = {"path": path, "condition": gt.condition, "tag_type": gt.tag_type}
    row["price_minor"] = "" if gt.price is None else gt.price.minor_units
    row["frac_digits"] = "" if gt.price is None else gt.price.frac_digits
    pts = gt.zone.as_array() if gt.zone is not None else None
    for i in range(4):
        for j, a in enumerate("xy"):
            row[f"zone_{a}{i}"] = "" if pts is None else f"{pts[i, j]:.2f}"
    defaults = DegradationParams()
    for k in ("blur_sigma", "noise_sigma", "contrast", "flare", "rotation_deg"):
        v = getattr(d, k)
        row[k] = "" if v == getattr(defaults, k) else f"{v:.4f}"
    row["tag_absent"] = int(d.tag_absent)
    return row


def _generate_one(args) -> dict:
    index, condition, master, out_dir = args
    img, gt = make_sample(index, condition, master)
    name = f"img_{index:05d}.ppm"
    write_image(Path(out_dir) / name, img)
    return _manifest_row(name, gt)


def assign_conditions(n: int, mix: dict[str, float], seed: int) -> list[str]:
    counts = class_counts(n, mix)
    labels = [k for k in ("clean",) + CLASSES for _ in range(counts[k])]
    order = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31,))).permutation(n)
    return [labels[i] for i in order]


def generate_dataset(
    n: int,
    out_dir: str | os.PathLike,
    mix: Optional[dict[str, float]] = None,
    seed: int = 0,
    workers: int = 1,
) -> Path:
    """Write ``n`` images and ``manifest.csv`` to ``out_dir``; returns the manifest path."""
    if n < 1:
        raise ValueError("n must be at least 1")
    mix = DEFAULT_MIX if mix is None else mix
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"cannot write to {out_dir}")
    conditions = assign_conditions(n, mix, seed)
    jobs = [(i, c, seed, str(out_dir)) for i, c in enumerate(conditions)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_generate_one, jobs, chunksize=8))
    else:
        rows = [_generate_one(j) for j in jobs]
    manifest = out_dir / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        fh.write(f"#pricetag-manifest v{MANIFEST_VERSION}\n")
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return manifest


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    truth: GroundTruth


def _opt_float(v: str, default: float) -> float:
    return float(v) if v not in ("", None) else default


def read_manifest(path: str | os.PathLike) -> Iterator[ManifestEntry]:
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("#pricetag-manifest"):
            raise ValueError(f"{path} is not a pricetag manifest")
        version = int(first.strip().rsplit("v", 1)[-1])
        if version > MANIFEST_VERSION:
            raise ValueError(f"manifest version {version} is newer than supported")
        for row in csv.DictReader(fh):
            price = None
            if row["price_minor"] != "":
                price = Price(int(row["price_minor"]), int(row["frac_digits"]))
            zone = None
            if row["zone_x0"] != "":
                zone = Quad.from_array([float(row[f"zone_{a}{i}"]) for i in range(4) for a in "xy"])
            d = DegradationParams(
                blur_sigma=_opt_float(row["blur_sigma"], 0.0),
                noise_sigma=_opt_float(row["noise_sigma"], 0.0),
                contrast=_opt_float(row["contrast"], 1.0),
                flare=_opt_float(row["flare"], 0.0),
                rotation_deg=_opt_float(row["rotation_deg"], 0.0),
                tag_absent=row["tag_absent"] == "1",
            )
            yield ManifestEntry(
                path.parent / row["path"],
                GroundTruth(price, zone, int(row["tag_type"]), d, row.get("condition") or "clean"),
            )


def describe(gt: GroundTruth) -> dict:
    """Plain-dict view of a ground truth record (for logs and demos)."""
    out = asdict(gt)
    out["zone"] = None if gt.zone is None else gt.zone.corners
    return out
