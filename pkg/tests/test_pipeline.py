from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pricetag.binarize import NiblackParams, niblack
from pricetag.config import PipelineConfig
from pricetag.imgcore import Quad, Rect
from pricetag.ocr import Price
from pricetag.pipeline import (
    REASONS,
    STAGES,
    RecognitionResult,
    bench_images,
    classify_outcome,
    compute_metrics,
    expand_quad,
    quad_iou,
    run_dataset,
    run_single,
)
from pricetag.synthgen import (
    DegradationParams,
    GroundTruth,
    TagSpec,
    degrade,
    generate_dataset,
    render_tag,
    rotate_quad,
)


@pytest.fixture(scope="module")
def clean_tag():
    return render_tag(TagSpec(1, Price(12999, 2), 1100, 560), 42)


# -- metrics --------------------------------------------------------------------


@pytest.mark.parametrize(
    "counts, expected",
    [((664, 0, 13, 2), (0.981, 0.997, 0.978)), ((664, 15, 27, 2), (0.961, 0.997, 0.959)), ((0, 0, 0, 0), (0, 0, 0))],
)
def test_metrics_examples(counts, expected):
    m = compute_metrics(*counts)
    assert m.rounded() == expected
    assert m.total == sum(counts)


def test_metrics_exact_fractions():
    m = compute_metrics(664, 15, 27, 2)
    assert m.precision_exact == Fraction(664, 691)
    assert m.accuracy_exact == Fraction(679, 708)
    with pytest.raises(ValueError):
        compute_metrics(1, -1, 0, 0)


def test_all_rejected_correct_only():
    m = compute_metrics(0, 0, 0, 25)
    assert m.recall == 0 and m.precision == 0


@given(st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000))
def test_metric_identities(tp, tn, fp, fn):
    m = compute_metrics(tp, tn, fp, fn)
    assert m.total == tp + tn + fp + fn
    for v in (m.precision, m.recall, m.accuracy):
        assert 0 <= v <= 1
    if tp + fp:
        assert m.precision_exact * (tp + fp) == tp


# -- outcomes -------------------------------------------------------------------

BOX = Quad.from_rect(Rect(100, 100, 200, 80))
TRUTH = GroundTruth(Price(999, 2), BOX, 1)
ABSENT = GroundTruth(None, None, 2)


def accepted(zone=BOX, price=Price(999, 2)):
    return RecognitionResult("accepted", price=price, zone=zone)


def test_outcome_taxonomy():
    rejected = RecognitionResult("rejected", reason="low-score")
    assert classify_outcome(None, TRUTH) == "error"
    assert classify_outcome(accepted(), ABSENT) == "FP"
    assert classify_outcome(rejected, ABSENT) == "TN"
    assert classify_outcome(rejected, TRUTH) == "FN"
    assert classify_outcome(accepted(), TRUTH) == "TP"
    far = Quad.from_rect(Rect(400, 300, 200, 80))
    assert classify_outcome(accepted(zone=far), TRUTH) == "FP"
    wrong = accepted(price=Price(998, 2))
    assert classify_outcome(wrong, TRUTH) == "TP"
    assert classify_outcome(wrong, TRUTH, check_value=True) == "FP"


def test_quad_iou():
    assert quad_iou(BOX, BOX) == pytest.approx(1.0)
    half = Quad.from_rect(Rect(200, 100, 200, 80))
    assert quad_iou(BOX, half) == pytest.approx(1 / 3)
    assert quad_iou(BOX, Quad.from_rect(Rect(0, 0, 10, 10))) == 0


def test_result_invariants():
    with pytest.raises(ValueError):
        RecognitionResult("accepted", price=Price(1, 0))
    with pytest.raises(ValueError):
        RecognitionResult("rejected", price=Price(1, 0), reason="low-score")
    assert RecognitionResult("rejected", reason="no-cluster").summary() == "REJECT no-cluster"


def test_expand_quad():
    q = expand_quad(Quad.from_rect(Rect(10, 10, 20, 10)), 2, 100, 100)
    assert q == Quad.from_rect(Rect(8, 8, 24, 14))
    assert expand_quad(Quad.from_rect(Rect(0, 0, 20, 10)), 5, 22, 100).bounding_rect() == Rect(0, 0, 22, 15)


# -- single images --------------------------------------------------------------


def test_clean_tag_is_read(clean_tag):
    img, gt = clean_tag
    res = run_single(img)
    assert res.accepted, res.reason
    assert res.price == Price(12999, 2) and res.summary() == "129.99"
    assert quad_iou(res.zone, gt.zone) >= 0.5
    assert res.branch in ("opened", "raw")
    assert set(res.stage_timings) == set(STAGES)
    assert sum(res.stage_timings.values()) <= res.total_us


def test_absent_tag_rejected():
    img, _ = render_tag(TagSpec(2, None, 1000, 500), 4)
    res = run_single(img)
    assert not res.accepted and res.reason in ("no-cluster", "low-score")


def test_rotated_tag(clean_tag):
    img, gt = clean_tag
    h, w = img.shape[:2]
    rotated = degrade(img, DegradationParams(rotation_deg=5.0), 0)
    truth = rotate_quad(gt.zone, w, h, 5.0)
    res = run_single(rotated)
    assert res.accepted, res.reason
    assert res.price == Price(12999, 2)
    assert abs(res.skew - 5.0) <= 0.7
    assert quad_iou(res.zone, truth) >= 0.5
    p = res.zone.as_array()
    top = np.degrees(np.arctan2(-(p[1, 1] - p[0, 1]), p[1, 0] - p[0, 0]))
    assert abs(top - 5.0) <= 0.7


def test_large_input_zone_in_input_coordinates(clean_tag):
    img, gt = clean_tag
    big = np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)
    res = run_single(big)
    assert res.accepted
    doubled = Quad.from_array(gt.zone.as_array() * 2)
    assert quad_iou(res.zone, doubled) >= 0.5


def test_deterministic(clean_tag):
    img, _ = clean_tag
    a, b = run_single(img), run_single(img)
    assert (a.status, a.price, a.zone, a.skew, a.branch, a.reason) == (b.status, b.price, b.zone, b.skew, b.branch, b.reason)


@pytest.mark.parametrize(
    "bad",
    [
        None,
        "image.ppm",
        np.zeros((0, 0, 3), np.uint8),
        np.zeros((4, 4, 4), np.uint8),
        np.full((5, 5, 3), np.nan),
    ],
)
def test_invalid_input_rejected(bad):
    res = run_single(bad)
    assert not res.accepted and res.reason == "invalid-input"


@pytest.mark.parametrize(
    "make",
    [
        lambda r: np.zeros((500, 1000, 3), np.uint8),
        lambda r: np.full((500, 1000, 3), 255, np.uint8),
        lambda r: r.integers(0, 256, (500, 1000, 3), dtype=np.uint8),
        lambda r: np.zeros((1, 1, 3), np.uint8),
        lambda r: np.tile((np.arange(1000) // 20 % 2 * 255).astype(np.uint8)[None, :, None], (500, 1, 3)),
    ],
)
def test_hostile_images_never_accepted_or_crash(make):
    res = run_single(make(np.random.default_rng(0)))
    assert res.status in ("accepted", "rejected") and res.reason in REASONS + ("",)
    if res.accepted:
        assert res.price is not None and res.zone is not None


def test_gray_input_accepted(clean_tag):
    img, _ = clean_tag
    gray = img.mean(axis=2).astype(np.uint8)
    res = run_single(gray)
    assert res.accepted and res.price == Price(12999, 2)


def test_recognizer_failure_becomes_rejection(clean_tag):
    class Broken:
        def classify(self, glyph):
            raise RuntimeError("boom")

    res = run_single(clean_tag[0], recognizer=Broken())
    assert not res.accepted and res.reason == "internal-error"


def test_debug_images(tmp_path, clean_tag):
    run_single(clean_tag[0], debug_dir=tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"zone.ppm", "crop.ppm", "crop_bin.pgm"} <= names
    assert any(n.startswith("components_") for n in names)


# -- datasets and timing --------------------------------------------------------


@pytest.fixture(scope="module")
def small_set(tmp_path_factory):
    out = tmp_path_factory.mktemp("set")
    mix = {"absent": 0.2, "angle": 0.2, "blur": 0.2, "contrast": 0.2}
    return generate_dataset(10, out, mix=mix, seed=31)


def test_run_dataset(small_set, tmp_path):
    out = tmp_path / "r.csv"
    rep = run_dataset(small_set, out_csv=out, include_timing=False)
    assert len(rep.rows) == 10 and rep.errors == 0
    m = rep.metrics
    assert m.total == 10
    assert rep.metrics_correct_only.total == sum(r.truth.price is not None for r in rep.rows)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("path,status,price_minor") and len(lines) == 11
    assert lines[1].startswith("img_00000.ppm,")
    rep2 = run_dataset(small_set, workers=2, out_csv=tmp_path / "r2.csv", include_timing=False)
    assert (tmp_path / "r2.csv").read_bytes() == out.read_bytes()
    assert [r.outcome for r in rep.rows] == [r.outcome for r in rep2.rows]
    assert "correct images only" in rep.table()


def test_unreadable_image_is_an_error_row(small_set, tmp_path):
    (small_set.parent / "img_00003.ppm").write_bytes(b"garbage")
    rep = run_dataset(small_set, out_csv=tmp_path / "r.csv")
    assert rep.errors == 1 and rep.metrics.total == 9
    assert rep.rows[3].outcome == "error"
    row = (tmp_path / "r.csv").read_text().splitlines()[4]
    assert row.startswith("img_00003.ppm,error,")


def test_bench_accounting(clean_tag):
    rep = bench_images([clean_tag[0]], repetitions=3)
    assert len(rep.total_us) == 3
    assert sum(rep.median(s) for s in STAGES) <= 1.1 * rep.median()
    assert "end-to-end" in rep.table()
    with pytest.raises(ValueError):
        bench_images([clean_tag[0]], repetitions=2)


def _time_niblack(img, p, reps=5):
    import time

    niblack(img, p)
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        niblack(img, p)
        best = min(best, time.perf_counter() - t0)
    return best


def test_binarization_scales_linearly():
    rng = np.random.default_rng(1)
    p = NiblackParams(-0.2, 73, 49)
    small = rng.integers(0, 256, (700, 950), dtype=np.uint8)
    big = rng.integers(0, 256, (1400, 950), dtype=np.uint8)
    assert _time_niblack(big, p) <= 2.5 * _time_niblack(small, p)


def test_config_round_trip(tmp_path):
    cfg = PipelineConfig(niblack_k=-0.3)
    cfg.dump(tmp_path / "c.json")
    assert PipelineConfig.load(tmp_path / "c.json") == cfg
