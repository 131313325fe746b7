"""End-to-end price recognition, dataset evaluation and latency measurement."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
from shapely.geometry import Polygon

from . import draw
from .binarize import DigitSizeEstimate, NiblackParams, derive_window, niblack
from .cc import components_from_stats, label_image
from .config import PipelineConfig
from .deskew import compensate, estimate_skew
from .imgcore import InvalidZoneError, Quad, as_color, scale_to_limit, to_gray, warp_quad_to_rect
from .morph import StructElem, opening
from .ocr import EmptyZoneError, Price, Recognizer, RejectError, make_recognizer, postprocess, recognize_glyphs, segment_glyphs
from .pnm import read_image, write_image
from .synthgen import GroundTruth, read_manifest
from .zonefind import BranchResult, derive_size_filter, find_clusters, select_best, size_filter_stats

log = logging.getLogger(__name__)

Status = Literal["accepted", "rejected"]

REASONS = (
    "no-cluster",
    "low-score",
    "skew-estimation-empty",
    "invalid-zone",
    "empty-zone",
    "format-reject",
    "low-confidence",
    "invalid-input",
    "internal-error",
)

STAGES = ("scale", "gray", "binarize", "morph", "label", "filter", "cluster", "select", "skew", "warp", "ocr", "postprocess")


@dataclass
class RecognitionResult:
    status: Status
    price: Optional[Price] = None
    zone: Optional[Quad] = None
    skew: Optional[float] = None
    branch: Optional[str] = None
    reason: str = ""
    stage_timings: dict[str, int] = field(default_factory=dict)
    total_us: int = 0

    def __post_init__(self):
        if self.status == "accepted" and (self.price is None or self.zone is None):
            raise ValueError("an accepted result needs a price and a zone")
        if self.status == "rejected" and self.price is not None:
            raise ValueError("a rejected result carries no price")

    @property
    def accepted(self) -> bool:
        return self.status == "accepted"

    def summary(self) -> str:
        return str(self.price) if self.accepted else f"REJECT {self.reason}"


class _Timer:
    def __init__(self):
        self.us: dict[str, int] = defaultdict(int)

    @contextmanager
    def __call__(self, stage: str):
        t0 = time.perf_counter_ns()
        try:
            yield
        finally:
            self.us[stage] += (time.perf_counter_ns() - t0) // 1000


class _Reject(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def expand_quad(q: Quad, margin: float, width: int, height: int) -> Quad:
    """Grow ``q`` by ``margin`` pixels along its own axes, clamped to the image."""
    p = q.as_array()
    u = p[1] - p[0]
    u /= max(np.hypot(*u), 1e-9)
    v = p[3] - p[0]
    v /= max(np.hypot(*v), 1e-9)
    signs = ((-1, -1), (1, -1), (1, 1), (-1, 1))
    out = np.array([p[i] + margin * (su * u + sv * v) for i, (su, sv) in enumerate(signs)])
    out[:, 0] = np.clip(out[:, 0], 0, width)
    out[:, 1] = np.clip(out[:, 1], 0, height)
    return Quad.from_array(out)


_RECOGNIZERS: dict[str, Recognizer] = {}


def _recognizer(name: str) -> Recognizer:
    if name not in _RECOGNIZERS:
        _RECOGNIZERS[name] = make_recognizer(name)
    return _RECOGNIZERS[name]


def _binarize(gray: np.ndarray, est: DigitSizeEstimate, cfg: PipelineConfig) -> np.ndarray:
    win_w, win_h = derive_window(est, cfg.window_h_factor, cfg.window_w_factor)
    return niblack(gray, NiblackParams(cfg.niblack_k, win_w, win_h, cfg.polarity))


def run_single(
    img: np.ndarray,
    cfg: PipelineConfig = PipelineConfig(),
    recognizer: Optional[Recognizer] = None,
    debug_dir: Optional[str | os.PathLike] = None,
) -> RecognitionResult:
    """Locate, rectify and read the price on one color image.

    Never raises for bad input or internal failures; those come back as
    rejections with a reason code from :data:`REASONS`.
    """
    timer = _Timer()
    t0 = time.perf_counter_ns()
    state: dict = {}
    try:
        result = _run(img, cfg, recognizer or _recognizer(cfg.recognizer), timer, state)
    except _Reject as exc:
        result = RecognitionResult("rejected", reason=exc.reason, skew=state.get("skew"), branch=state.get("branch"))
    except Exception:  # noqa: BLE001 - every failure becomes a rejection
        log.exception("internal error while recognizing")
        result = RecognitionResult("rejected", reason="internal-error")
    result.stage_timings = dict(timer.us)
    result.total_us = (time.perf_counter_ns() - t0) // 1000
    if debug_dir is not None or cfg.debug:
        try:
            _write_debug(Path(debug_dir or "debug"), state)
        except Exception:  # noqa: BLE001
            log.exception("could not write debug images")
    return result


def _run(img, cfg: PipelineConfig, recognizer: Recognizer, timer: _Timer, state: dict) -> RecognitionResult:
    try:
        img = as_color(img)
    except ValueError:
        raise _Reject("invalid-input") from None
    in_h, in_w = img.shape[:2]

    with timer("scale"):
        scaled = scale_to_limit(img, cfg.max_w, cfg.max_h)
    H, W = scaled.shape[:2]
    fx, fy = W / in_w, H / in_h
    state["image"] = scaled
    with timer("gray"):
        gray = to_gray(scaled)
    model = cfg.tag
    est = model.digit_estimate(H)
    with timer("binarize"):
        binary = _binarize(gray, est, cfg)
    with timer("morph"):
        opened = opening(binary, StructElem(cfg.se_side))

    params = derive_size_filter(model, W, H)
    results: dict[str, BranchResult] = {}
    images = {"opened": opened, "raw": binary}
    for name in ("opened", "raw"):
        with timer("label"):
            _, stats = label_image(images[name])
        with timer("filter"):
            comps = components_from_stats(stats, size_filter_stats(stats, params))
        with timer("cluster"):
            results[name] = find_clusters(comps, model, W, H, name, prefiltered=True)
    state["branches"] = results

    with timer("select"):
        best = select_best(results["opened"].clusters, results["raw"].clusters, model.tau_zone)
    if best is None:
        any_cluster = results["opened"].clusters or results["raw"].clusters
        raise _Reject("low-score" if any_cluster else "no-cluster")
    state["best"] = best
    state["branch"] = best.branch
    zone_bin = images[best.branch]

    with timer("skew"):
        r = best.bbox
        if not zone_bin[r.y : r.y1, r.x : r.x1].any():
            raise _Reject("skew-estimation-empty")
        angle = estimate_skew(zone_bin, r, cfg.max_skew_deg)
        quad = compensate(r, angle, cfg.threshold_deg, W, H)
    state["skew"] = angle
    state["quad"] = quad

    with timer("warp"):
        length, content_h = quad.edge_lengths()
        margin = cfg.ocr_margin * content_h
        ocr_quad = expand_quad(quad, margin, W, H)
        out_w = max(int(round(length + 2 * margin)), 1)
        out_h = max(int(round(content_h + 2 * margin)), 1)
        try:
            crop = warp_quad_to_rect(scaled, ocr_quad, out_w, out_h)
        except InvalidZoneError:
            raise _Reject("invalid-zone") from None
    state["crop"] = crop

    with timer("ocr"):
        aspect = 0.5 * sum(model.digit_aspect)
        crop_est = DigitSizeEstimate.clamped(content_h, content_h * aspect)
        crop_bin = _binarize(to_gray(crop), crop_est, cfg)
        if best.branch == "opened":
            crop_bin = opening(crop_bin, StructElem(cfg.se_side))
        state["crop_bin"] = crop_bin
        try:
            boxes = segment_glyphs(crop_bin, digit_h=content_h)
        except EmptyZoneError:
            raise _Reject("empty-zone") from None
        symbols = recognize_glyphs(crop_bin, boxes, recognizer)
    state["symbols"] = symbols

    with timer("postprocess"):
        try:
            price = postprocess(symbols, model.formats, cfg.min_conf)
        except RejectError as exc:
            raise _Reject(exc.reason) from None

    zone = Quad.from_array(quad.as_array() / (fx, fy))
    return RecognitionResult("accepted", price=price, zone=zone, skew=angle, branch=best.branch)


def _write_debug(out: Path, state: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    img = state.get("image")
    if img is None:
        return
    branches = state.get("branches", {})
    for name, res in branches.items():
        canvas = img.copy()
        for c in res.components:
            draw.draw_rect(canvas, c.bbox, draw.GREEN, 1)
        for cl in res.clusters:
            if cl.extended:
                # widened box in yellow over the box the members and dot span
                draw.draw_rect(canvas, cl.bbox, draw.YELLOW, 2)
                draw.draw_rect(canvas, cl.content_bbox, draw.RED, 2)
            else:
                draw.draw_rect(canvas, cl.bbox, draw.RED, 2)
        write_image(out / f"components_{name}.ppm", canvas)
    best = state.get("best")
    if best is not None:
        canvas = img.copy()
        draw.draw_rect(canvas, best.bbox, draw.BLUE, 2)
        if "quad" in state:
            draw.draw_quad(canvas, state["quad"], draw.RED, 2)
        write_image(out / "zone.ppm", canvas)
    if "crop" in state:
        write_image(out / "crop.ppm", state["crop"])
    if "crop_bin" in state:
        write_image(out / "crop_bin.pgm", state["crop_bin"])


# -- metrics ----------------------------------------------------------------------


def _round3(x: Fraction) -> float:
    d = Decimal(x.numerator) / Decimal(x.denominator)
    return float(d.quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class Metrics:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def _ratio(self, num: int, den: int) -> Fraction:
        return Fraction(num, den) if den else Fraction(0)

    @property
    def precision_exact(self) -> Fraction:
        return self._ratio(self.tp, self.tp + self.fp)

    @property
    def recall_exact(self) -> Fraction:
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def accuracy_exact(self) -> Fraction:
        return self._ratio(self.tp + self.tn, self.total)

    @property
    def precision(self) -> float:
        return float(self.precision_exact)

    @property
    def recall(self) -> float:
        return float(self.recall_exact)

    @property
    def accuracy(self) -> float:
        return float(self.accuracy_exact)

    def rounded(self) -> tuple[float, float, float]:
        """Precision, recall and accuracy rounded half up to three decimals."""
        return _round3(self.precision_exact), _round3(self.recall_exact), _round3(self.accuracy_exact)

    def __str__(self) -> str:
        p, r, a = self.rounded()
        return (
            f"total={self.total} TP={self.tp} TN={self.tn} FP={self.fp} FN={self.fn} "
            f"precision={p:.3f} recall={r:.3f} accuracy={a:.3f}"
        )


def compute_metrics(tp: int, tn: int, fp: int, fn: int) -> Metrics:
    if min(tp, tn, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    return Metrics(tp, tn, fp, fn)


def quad_iou(a: Quad, b: Quad) -> float:
    pa, pb = Polygon(a.corners), Polygon(b.corners)
    if not pa.is_valid or not pb.is_valid:
        pa, pb = pa.buffer(0), pb.buffer(0)
    union = pa.union(pb).area
    return pa.intersection(pb).area / union if union > 0 else 0.0


Outcome = Literal["TP", "TN", "FP", "FN", "error"]


def classify_outcome(
    result: Optional[RecognitionResult], truth: GroundTruth, iou_threshold: float = 0.5, check_value: bool = False
) -> Outcome:
    if result is None:
        return "error"
    if truth.price is None:
        return "FP" if result.accepted else "TN"
    if not result.accepted:
        return "FN"
    ok = quad_iou(result.zone, truth.zone) >= iou_threshold
    if ok and check_value:
        ok = result.price == truth.price
    return "TP" if ok else "FP"


@dataclass
class DatasetRow:
    path: Path
    truth: GroundTruth
    result: Optional[RecognitionResult]
    outcome: Outcome
    iou: float = 0.0
    error: str = ""


@dataclass
class DatasetReport:
    rows: list[DatasetRow]

    def _metrics(self, rows) -> Metrics:
        counts = {k: 0 for k in ("TP", "TN", "FP", "FN")}
        for r in rows:
            if r.outcome in counts:
                counts[r.outcome] += 1
        return compute_metrics(counts["TP"], counts["TN"], counts["FP"], counts["FN"])

    @property
    def metrics(self) -> Metrics:
        """Zone metrics over every processed image."""
        return self._metrics(self.rows)

    @property
    def metrics_correct_only(self) -> Metrics:
        return self._metrics(r for r in self.rows if r.truth.price is not None)

    @property
    def errors(self) -> int:
        return sum(r.outcome == "error" for r in self.rows)

    @property
    def zone_found(self) -> int:
        return sum(r.outcome == "TP" for r in self.rows)

    @property
    def value_correct(self) -> int:
        return sum(r.outcome == "TP" and r.result.price == r.truth.price for r in self.rows)

    @property
    def value_accuracy(self) -> float:
        return self.value_correct / self.zone_found if self.zone_found else 0.0

    @property
    def absent_rejection_rate(self) -> float:
        neg = [r for r in self.rows if r.truth.price is None and r.outcome != "error"]
        return sum(r.outcome == "TN" for r in neg) / len(neg) if neg else 0.0

    def by_reason(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for r in self.rows:
            if r.result is not None and not r.result.accepted:
                out[r.result.reason] += 1
        return dict(sorted(out.items()))

    def table(self) -> str:
        m_all, m_ok = self.metrics, self.metrics_correct_only
        lines = [
            f"correct images only: {m_ok}",
            f"full set:            {m_all}",
            f"zones found {self.zone_found}, correct values {self.value_correct} "
            f"({100 * self.value_accuracy:.2f}%)",
            f"tag-absent rejection rate {self.absent_rejection_rate:.3f}; processing errors {self.errors}",
            f"rejections by reason: {self.by_reason()}",
        ]
        return "\n".join(lines)


RESULT_FIELDS = (
    ["path", "status", "price_minor", "frac_digits"]
    + [f"zone_{a}{i}" for i in range(4) for a in "xy"]
    + ["skew_deg", "branch", "reason", "total_us"]
)


def result_row(path: str, result: Optional[RecognitionResult], include_timing: bool = True, error: str = "") -> dict:
    row = dict.fromkeys(RESULT_FIELDS, "")
    row["path"] = path
    if result is None:
        row["status"] = "error"
        row["reason"] = error or "unreadable"
        return row
    row["status"] = result.status
    row["reason"] = result.reason
    if result.price is not None:
        row["price_minor"] = result.price.minor_units
        row["frac_digits"] = result.price.frac_digits
    if result.zone is not None:
        for i, (x, y) in enumerate(result.zone.corners):
            row[f"zone_x{i}"] = f"{x:.2f}"
            row[f"zone_y{i}"] = f"{y:.2f}"
    if result.skew is not None:
        row["skew_deg"] = f"{result.skew:.3f}"
    row["branch"] = result.branch or ""
    if include_timing:
        row["total_us"] = result.total_us
    return row


def write_results_csv(rows: Sequence[DatasetRow], out, base: Optional[Path] = None, include_timing: bool = True) -> None:
    """Write results; ``include_timing=False`` leaves ``total_us`` blank for byte-stable output."""
    own = isinstance(out, (str, os.PathLike))
    fh = open(out, "w", newline="") if own else out
    try:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            path = r.path.relative_to(base) if base is not None else r.path
            writer.writerow(result_row(str(path), r.result, include_timing, r.error))
    finally:
        if own:
            fh.close()


def results_csv_text(report: DatasetReport, base: Optional[Path] = None, include_timing: bool = True) -> str:
    buf = io.StringIO()
    write_results_csv(report.rows, buf, base, include_timing)
    return buf.getvalue()


def _process(args) -> tuple[Optional[RecognitionResult], str]:
    path, cfg = args
    try:
        img = read_image(path)
    except (OSError, ValueError) as exc:
        return None, f"unreadable: {exc}"
    return run_single(img, cfg), ""


def run_dataset(
    manifest: str | os.PathLike,
    cfg: PipelineConfig = PipelineConfig(),
    workers: int = 1,
    out_csv: Optional[str | os.PathLike] = None,
    check_value: bool = False,
    include_timing: bool = True,
) -> DatasetReport:
    """Run every manifest entry and tally TP/TN/FP/FN.

    Zone correctness is IoU against the ground-truth quad; with
    ``check_value`` a TP must also read the right price. Unreadable images
    become error rows, excluded from the metrics. Rows keep manifest order
    regardless of ``workers``.
    """
    entries = list(read_manifest(manifest))
    jobs = [(e.path, cfg) for e in entries]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outs = list(pool.map(_process, jobs, chunksize=4))
    else:
        outs = [_process(j) for j in jobs]
    rows = []
    for e, (res, err) in zip(entries, outs):
        outcome = classify_outcome(res, e.truth, cfg.iou_threshold, check_value)
        iou = 0.0
        if res is not None and res.zone is not None and e.truth.zone is not None:
            iou = quad_iou(res.zone, e.truth.zone)
        rows.append(DatasetRow(e.path, e.truth, res, outcome, iou, err))
    report = DatasetReport(rows)
    if report.errors:
        log.warning("%d image(s) could not be read and were excluded from metrics", report.errors)
    if out_csv is not None:
        write_results_csv(rows, out_csv, Path(manifest).parent, include_timing)
    return report


# -- latency ------------------------------------------------------------------------


@dataclass
class BenchReport:
    stage_us: dict[str, list[int]]
    total_us: list[int]

    @staticmethod
    def _pct(values, q) -> float:
        return float(np.percentile(values, q)) if values else 0.0

    def median(self, stage: Optional[str] = None) -> float:
        return self._pct(self.total_us if stage is None else self.stage_us.get(stage, []), 50)

    def p90(self, stage: Optional[str] = None) -> float:
        return self._pct(self.total_us if stage is None else self.stage_us.get(stage, []), 90)

    def share(self, stages: Sequence[str]) -> float:
        """Fraction of the end-to-end median spent in ``stages`` (by medians)."""
        total = self.median()
        return sum(self.median(s) for s in stages) / total if total else 0.0

    def table(self) -> str:
        lines = [f"{'stage':<12} {'median ms':>10} {'p90 ms':>10}"]
        for s in STAGES:
            if s in self.stage_us:
                lines.append(f"{s:<12} {self.median(s) / 1000:>10.2f} {self.p90(s) / 1000:>10.2f}")
        lines.append(f"{'end-to-end':<12} {self.median() / 1000:>10.2f} {self.p90() / 1000:>10.2f}")
        return "\n".join(lines)


def bench_images(images: Sequence[np.ndarray], cfg: PipelineConfig = PipelineConfig(), repetitions: int = 5) -> BenchReport:
    if repetitions < 3:
        raise ValueError("use at least 3 repetitions")
    stage_us: dict[str, list[int]] = defaultdict(list)
    total: list[int] = []
    for img in images:
        run_single(img, cfg)  # warm-up
        for _ in range(repetitions):
            t0 = time.perf_counter_ns()
            res = run_single(img, cfg)
            total.append((time.perf_counter_ns() - t0) // 1000)
            for s in STAGES:
                stage_us[s].append(res.stage_timings.get(s, 0))
    return BenchReport(dict(stage_us), total)


def bench(
    manifest: str | os.PathLike,
    cfg: PipelineConfig = PipelineConfig(),
    repetitions: int = 5,
    single_thread: bool = False,
    limit: Optional[int] = None,
) -> BenchReport:
    """Per-stage and end-to-end latency over warm runs of every manifest image."""
    if single_thread:
        import warnings

        import numba

        with warnings.catch_warnings():
            # probing the threading layer may complain about an old TBB; irrelevant here
            warnings.simplefilter("ignore")
            numba.set_num_threads(1)
    entries = list(read_manifest(manifest))
    if limit is not None:
        entries = entries[:limit]
    images = [read_image(e.path) for e in entries]
    return bench_images(images, cfg, repetitions)


def iou_to_str(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.3f}"
