"""Price-zone search: size filtration, format-aware clustering, cluster choice.

The tag model encodes what is known about the tag before looking at it:
how tall price digits are relative to the frame, where on the tag the price
sits, and which digit patterns a price may take.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from statistics import median
from typing import Literal, Optional, Sequence

import numpy as np

from .binarize import DigitSizeEstimate
from .cc import Component
from .imgcore import Rect

Branch = Literal["opened", "raw"]


@dataclass(frozen=True)
class PriceFormat:
    int_min: int = 1
    int_max: int = 4
    frac_digits: int = 2

    def __post_init__(self):
        if self.int_min < 1 or self.int_max < self.int_min:
            raise ValueError("integer digit range must satisfy 1 <= min <= max")
        if self.frac_digits not in (0, 2):
            raise ValueError("fractional digits must be 0 or 2")

    @property
    def has_dot(self) -> bool:
        return self.frac_digits == 2

    @property
    def max_digits(self) -> int:
        return self.int_max + self.frac_digits

    @property
    def min_digits(self) -> int:
        return self.int_min + self.frac_digits


@dataclass(frozen=True)
class TagModel:
    """Geometry and format prior for one family of price tags.

    ``price_zone_prior`` is ``(x0, y0, x1, y1)`` in unit image coordinates.
    """

    name: str = "generic"
    digit_h_frac: tuple[float, float] = (0.12, 0.25)
    digit_aspect: tuple[float, float] = (0.40, 0.75)
    price_zone_prior: tuple[float, float, float, float] = (0.35, 0.40, 1.0, 1.0)
    formats: tuple[PriceFormat, ...] = (PriceFormat(1, 4, 2), PriceFormat(2, 4, 0))
    max_gap_factor: float = 1.0
    v_overlap_min: float = 0.6
    size_slack: float = 0.3
    height_ratio: tuple[float, float] = (0.6, 1.67)
    dot_max_rel_h: float = 0.35
    dot_bottom_tol: float = 0.25
    digit_advance: float = 1.08
    tau_zone: float = 0.5

    def __post_init__(self):
        lo, hi = self.digit_h_frac
        if not 0 < lo <= hi <= 1:
            raise ValueError("digit_h_frac must be a nonempty range in (0, 1]")
        alo, ahi = self.digit_aspect
        if not 0 < alo <= ahi:
            raise ValueError("digit_aspect must be a nonempty positive range")
        x0, y0, x1, y1 = self.price_zone_prior
        if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
            raise ValueError("price_zone_prior must lie within the unit square")
        if not self.formats:
            raise ValueError("at least one price format is required")
        object.__setattr__(self, "formats", tuple(self.formats))

    def digit_estimate(self, img_h: int) -> DigitSizeEstimate:
        h = 0.5 * sum(self.digit_h_frac) * img_h
        return DigitSizeEstimate.clamped(h, h * 0.5 * sum(self.digit_aspect))

    def prior_rect(self, img_w: int, img_h: int) -> Rect:
        x0, y0, x1, y1 = self.price_zone_prior
        rx0, ry0 = int(round(x0 * img_w)), int(round(y0 * img_h))
        return Rect(rx0, ry0, max(int(round(x1 * img_w)) - rx0, 1), max(int(round(y1 * img_h)) - ry0, 1))


# Five built-in layouts; the generic profile's prior covers all of them.
TAG_PROFILES: dict[str, TagModel] = {
    "generic": TagModel(),
    "type1": TagModel(name="type1", price_zone_prior=(0.45, 0.45, 1.0, 1.0)),
    "type2": TagModel(name="type2", price_zone_prior=(0.35, 0.45, 1.0, 1.0)),
    "type3": TagModel(name="type3", price_zone_prior=(0.40, 0.40, 1.0, 1.0), formats=(PriceFormat(2, 4, 0),)),
    "type4": TagModel(name="type4", price_zone_prior=(0.40, 0.40, 1.0, 0.95)),
    "type5": TagModel(name="type5", price_zone_prior=(0.45, 0.40, 1.0, 1.0), formats=(PriceFormat(1, 4, 2),)),
}


@dataclass(frozen=True)
class SizeFilterParams:
    h_range: tuple[float, float]
    w_range: tuple[float, float]
    area_range: tuple[float, float]
    aspect_range: tuple[float, float]
    # stroke ink covers a good part of a digit box; sparse speckle chains do not
    min_fill: float = 0.2
    # dot candidates: roughly square blobs well below digit height
    dot_h_range: tuple[float, float] = (3.0, 0.0)
    dot_aspect_range: tuple[float, float] = (0.5, 2.0)
    dot_min_fill: float = 0.45

    def is_digit(self, c: Component) -> bool:
        b = c.bbox
        return (
            self.h_range[0] <= b.h <= self.h_range[1]
            and self.w_range[0] <= b.w <= self.w_range[1]
            and self.area_range[0] <= c.pixel_count <= self.area_range[1]
            and self.aspect_range[0] <= b.w / b.h <= self.aspect_range[1]
            and c.pixel_count >= self.min_fill * b.w * b.h
        )

    def is_dot(self, c: Component) -> bool:
        b = c.bbox
        return (
            self.dot_h_range[0] <= b.h <= self.dot_h_range[1]
            and self.dot_h_range[0] <= b.w <= self.dot_h_range[1]
            and self.dot_aspect_range[0] <= b.w / b.h <= self.dot_aspect_range[1]
            and c.pixel_count >= self.dot_min_fill * b.w * b.h
        )


MIN_DIGIT_PX = 4


def derive_size_filter(model: TagModel, img_w: int, img_h: int) -> SizeFilterParams:
    """Loose digit-size bounds in pixels for an ``img_w x img_h`` frame."""
    s = model.size_slack
    lo, hi = model.digit_h_frac
    h_lo = max(lo * img_h * (1 - s), MIN_DIGIT_PX)
    h_hi = max(hi * img_h * (1 + s), h_lo)
    alo, ahi = model.digit_aspect
    w_lo = max(h_lo * alo, 1.0)
    w_hi = h_hi * ahi
    return SizeFilterParams(
        h_range=(h_lo, h_hi),
        w_range=(w_lo, w_hi),
        area_range=(0.15 * w_lo * h_lo, 1.0 * w_hi * h_hi),
        aspect_range=(alo * (1 - s), ahi * (1 + s)),
        dot_h_range=(max(3.0, 0.05 * lo * img_h), model.dot_max_rel_h * hi * img_h),
    )


def size_filter(comps: Sequence[Component], p: SizeFilterParams) -> list[Component]:
    """Keep digit-sized components; dot-sized blobs pass without the height floor."""
    return [c for c in comps if p.is_digit(c) or p.is_dot(c)]


def size_filter_stats(stats: dict[str, np.ndarray], p: SizeFilterParams) -> np.ndarray:
    """Vectorized :func:`size_filter` over label stat arrays; returns a keep mask."""
    h = stats["h"].astype(float)
    w = stats["w"].astype(float)
    n = stats["count"]
    aspect = w / h
    digit = (
        (h >= p.h_range[0]) & (h <= p.h_range[1])
        & (w >= p.w_range[0]) & (w <= p.w_range[1])
        & (n >= p.area_range[0]) & (n <= p.area_range[1])
        & (aspect >= p.aspect_range[0]) & (aspect <= p.aspect_range[1])
        & (n >= p.min_fill * w * h)
    )
    dot = (
        (h >= p.dot_h_range[0]) & (h <= p.dot_h_range[1])
        & (w >= p.dot_h_range[0]) & (w <= p.dot_h_range[1])
        & (aspect >= p.dot_aspect_range[0]) & (aspect <= p.dot_aspect_range[1])
        & (n >= p.dot_min_fill * w * h)
    )
    return digit | dot


# -- clustering -----------------------------------------------------------------


@dataclass
class Cluster:
    members: list[Component]
    bbox: Rect
    dot: Optional[Component] = None
    matched_format: Optional[PriceFormat] = None
    score: float = 0.0
    branch: Branch = "raw"
    extended: bool = False

    @property
    def content_bbox(self) -> Rect:
        """Box of the members and dot, ignoring any widening."""
        return _bbox_of(self.members + ([self.dot] if self.dot is not None else []))

    @property
    def dot_index(self) -> Optional[int]:
        """Number of members left of the dot."""
        if self.dot is None:
            return None
        cx = self.dot.centroid[0]
        return sum(1 for m in self.members if m.centroid[0] < cx)

    @property
    def median_height(self) -> float:
        return float(median(m.bbox.h for m in self.members))

    def digit_estimate(self, aspect: float) -> DigitSizeEstimate:
        h = self.median_height
        return DigitSizeEstimate.clamped(h, h * aspect)


def _bbox_of(comps: Sequence[Component]) -> Rect:
    r = comps[0].bbox
    for c in comps[1:]:
        r = r.union(c.bbox)
    return r


def _v_overlap(a: Rect, b: Rect) -> float:
    inter = min(a.y1, b.y1) - max(a.y, b.y)
    return max(inter, 0) / min(a.h, b.h)


def _chains(a: Component, b: Component, model: TagModel, max_gap: float) -> bool:
    ra, rb = a.bbox, b.bbox
    gap = rb.x - ra.x1
    ratio = rb.h / ra.h
    lo, hi = model.height_ratio
    return _v_overlap(ra, rb) >= model.v_overlap_min and gap <= max_gap and lo <= ratio <= hi


def match_format(n_members: int, dot_index: Optional[int], formats: Sequence[PriceFormat]) -> Optional[PriceFormat]:
    """Pick the format fitting a cluster's digit count and dot position.

    A dotless cluster may still fit a dotted format if its digits cover the
    integer part plus two decimals (the dot was lost). Several fits resolve
    toward the format with more digits.
    """
    fits = []
    for f in formats:
        if dot_index is not None:
            after = n_members - dot_index
            ok = f.has_dot and f.int_min <= dot_index <= f.int_max and 0 <= after <= f.frac_digits
        elif f.has_dot:
            ok = f.int_min <= n_members - f.frac_digits <= f.int_max
        else:
            ok = f.int_min <= n_members <= f.int_max
        if ok:
            fits.append(f)
    if not fits:
        return None
    return max(fits, key=lambda f: (f.max_digits, f.frac_digits, f.int_min))


def _attach_dot(members: list[Component], dots: list[Component], model: TagModel) -> Optional[Component]:
    mh = median(m.bbox.h for m in members)
    bottoms = median(m.bbox.y1 for m in members)
    adv = model.digit_advance * median(m.bbox.w for m in members)
    left = members[0].bbox.x - adv
    right = members[-1].bbox.x1 + adv
    best, best_err = None, None
    for d in dots:
        cx = d.centroid[0]
        if d.bbox.h > model.dot_max_rel_h * mh or not left <= cx <= right:
            continue
        err = abs(d.bbox.y1 - bottoms)
        if err > model.dot_bottom_tol * mh:
            continue
        # the dot must sit in a gap, not over a digit
        if any(m.bbox.x <= cx < m.bbox.x1 for m in members):
            continue
        if best_err is None or err < best_err:
            best, best_err = d, err
    return best


def cluster_by_format(
    comps: Sequence[Component],
    model: TagModel,
    digit_est: DigitSizeEstimate,
    digit_h_min: Optional[float] = None,
    branch: Branch = "raw",
) -> list[Cluster]:
    """Chain digit candidates left to right into clusters and attach dots.

    Components shorter than ``digit_h_min`` (default: ``dot_max_rel_h`` of the
    estimated digit height) are dot candidates, the rest digit candidates.
    Each digit candidate joins the open chain whose tail it continues
    (vertical overlap, gap, height ratio), preferring the closest baseline.
    Dot candidates no cluster claims come back as singleton clusters, so
    every input lands in exactly one cluster.
    """
    if digit_h_min is None:
        digit_h_min = model.dot_max_rel_h * digit_est.digit_h
    max_gap = model.max_gap_factor * digit_est.digit_w
    order = lambda c: (c.bbox.x, c.bbox.y, c.id)  # noqa: E731
    digits = sorted((c for c in comps if c.bbox.h >= digit_h_min), key=order)
    dots = sorted((c for c in comps if c.bbox.h < digit_h_min), key=order)
    chains: list[list[Component]] = []
    open_chains: list[list[Component]] = []
    for c in digits:
        # extend the open chain whose tail matches best (closest baseline)
        best = None
        for chain in open_chains:
            if _chains(chain[-1], c, model, max_gap):
                if best is None or abs(chain[-1].bbox.y1 - c.bbox.y1) < abs(best[-1].bbox.y1 - c.bbox.y1):
                    best = chain
        if best is None:
            best = []
            open_chains.append(best)
            chains.append(best)
        best.append(c)
        # a chain whose tail is left of c by more than max_gap can never grow again
        open_chains = [ch for ch in open_chains if c.bbox.x - ch[-1].bbox.x1 <= max_gap]

    clusters = []
    used: set[int] = set()
    for members in chains:
        free = [d for d in dots if d.id not in used]
        dot = _attach_dot(members, free, model) if free else None
        if dot is not None:
            used.add(dot.id)
        bbox = _bbox_of(members + ([dot] if dot else []))
        cl = Cluster(members=members, bbox=bbox, dot=dot, branch=branch)
        cl.matched_format = match_format(len(members), cl.dot_index, model.formats)
        clusters.append(cl)
    for d in dots:
        if d.id not in used:
            cl = Cluster(members=[d], bbox=d.bbox, branch=branch)
            cl.matched_format = match_format(1, None, model.formats)
            clusters.append(cl)
    return clusters


def extend_for_missing_digits(
    c: Cluster, digit_est: DigitSizeEstimate, img_w: Optional[int] = None, advance: float = 1.08
) -> Cluster:
    """Widen the box to the right for decimals the labeling did not find.

    Prices with a dot always carry two decimals; each missing one adds one
    digit advance (digit width plus spacing) to the right edge.
    """
    if c.dot is None:
        raise ValueError("widening needs a cluster with a dot")
    after = len(c.members) - c.dot_index
    if after >= 2:
        return c
    step = int(np.floor(advance * digit_est.digit_w + 0.5))
    x1 = c.bbox.x1 + (2 - after) * step
    if img_w is not None:
        x1 = min(x1, img_w)
    bbox = Rect(c.bbox.x, c.bbox.y, max(x1 - c.bbox.x, c.bbox.w), c.bbox.h)
    return replace(c, bbox=bbox, extended=True)


# -- scoring and selection ------------------------------------------------------

SCORE_WEIGHTS = {"format": 1.0, "size": 0.5, "layout": 1.0, "count": 0.5}


def score_terms(c: Cluster, model: TagModel, img_w: int, img_h: int) -> dict[str, float]:
    fmt = 1.0 if c.matched_format is not None else 0.2

    lo, hi = model.digit_h_frac
    center = 0.5 * (lo + hi) * img_h
    half = 0.5 * (hi * (1 + model.size_slack) - lo * (1 - model.size_slack)) * img_h
    size = max(0.0, 1.0 - abs(c.median_height - center) / half)

    prior = model.prior_rect(img_w, img_h)
    layout = c.bbox.intersection_area(prior) / c.bbox.area

    n = len(c.members)
    if c.matched_format is None:
        count = 1.0
    else:
        f = c.matched_format
        # members may lack decimals that widening restores
        lo_n = f.int_min + (f.frac_digits if c.dot is None else 0)
        hi_n = f.max_digits
        count = 1.0 if lo_n <= n <= hi_n else (n / lo_n if n < lo_n else hi_n / n)
    return {"format": fmt, "size": size, "layout": layout, "count": count}


def score_cluster(c: Cluster, model: TagModel, img_w: int, img_h: int) -> float:
    """Weighted product of format, digit-size, layout and count terms, in [0, 1]."""
    terms = score_terms(c, model, img_w, img_h)
    score = 1.0
    for k, v in terms.items():
        score *= v ** SCORE_WEIGHTS[k]
    return float(min(max(score, 0.0), 1.0))


def _rank_key(c: Cluster):
    return (c.score, len(c.members), c.branch == "opened", -c.bbox.x)


def select_best(
    opened: Sequence[Cluster], raw: Sequence[Cluster], tau_zone: float = 0.5
) -> Optional[Cluster]:
    """Highest-scoring cluster across both branches, or None when below ``tau_zone``.

    Scores must already be set. Ties prefer more members, then the opened
    branch, then the leftmost box.
    """
    pool = list(opened) + list(raw)
    if not pool:
        return None
    best = max(pool, key=_rank_key)
    return best if best.score >= tau_zone else None


@dataclass
class BranchResult:
    branch: Branch
    components: list[Component] = field(default_factory=list)
    candidates: list[Component] = field(default_factory=list)
    clusters: list[Cluster] = field(default_factory=list)


def find_clusters(
    comps: Sequence[Component],
    model: TagModel,
    img_w: int,
    img_h: int,
    branch: Branch,
    prefiltered: bool = False,
) -> BranchResult:
    """Filter, cluster, widen and score one branch's components."""
    params = derive_size_filter(model, img_w, img_h)
    cands = list(comps) if prefiltered else size_filter(comps, params)
    est = model.digit_estimate(img_h)
    clusters = cluster_by_format(cands, model, est, digit_h_min=params.h_range[0], branch=branch)
    aspect = 0.5 * sum(model.digit_aspect)
    out = []
    for cl in clusters:
        if cl.dot is not None and len(cl.members) > 1:
            cl = extend_for_missing_digits(cl, cl.digit_estimate(aspect), img_w, model.digit_advance)
        cl.score = score_cluster(cl, model, img_w, img_h)
        out.append(cl)
    return BranchResult(branch, list(comps), cands, out)
