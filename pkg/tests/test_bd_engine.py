import math

import numpy as np
import pytest

from bd_engine import (
    aggregate,
    bd_quality,
    bd_quality_weighted,
    bd_rate,
    bd_rate_with_mode,
    compare_methods,
)
from conftest import make_curve, random_curve
from diagnostics import CROSSOVER, EXTRAPOLATED, compute_overlap
from errors import (
    EmptyInput,
    MixedKinds,
    NoOverlap,
    NonInvertibleCurve,
    PdfOutsideCurveRange,
    TooFewPoints,
    UnnormalizedPdf,
)
from models import (
    Axis,
    BdKind,
    BdMode,
    BdResult,
    Extrapolation,
    FitMethod,
    OverlapInterval,
    PdfBin,
    PdfSpread,
    RatePdf,
)

METHODS = list(FitMethod)


def shifted(curve, rate_factor=1.0, quality_offset=0.0, label="test"):
    return make_curve(curve.rates * rate_factor, curve.qualities + quality_offset, label=label)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("c", [-3.0, 1.0, 5.0])
def test_constant_quality_offset(anchor, method, c):
    result = bd_quality(anchor, shifted(anchor, quality_offset=c), method)
    assert result.kind is BdKind.QUALITY
    assert result.value == pytest.approx(c, abs=1e-9)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("k", [0.5, 2.0, 10.0])
def test_rate_scaling(anchor, method, k):
    result = bd_rate(anchor, shifted(anchor, rate_factor=k), method)
    assert result.value == pytest.approx(100.0 * (k - 1.0), rel=1e-6)
    assert result.extrapolated is Extrapolation.NONE


def test_identity_on_random_curves(rng):
    """BD(a, a) is zero for 100 random curves"""
    for _ in range(100):
        curve = random_curve(rng)
        assert bd_rate(curve, curve, diagnose=False).value == pytest.approx(0.0, abs=1e-9)
        assert bd_quality(curve, curve, diagnose=False).value == pytest.approx(0.0, abs=1e-9)


def test_crossing_lines_average_to_zero(crossing_pair):
    a, b = crossing_pair
    result = bd_quality(a, b)
    assert abs(result.value) <= 1e-6
    assert CROSSOVER in result.diagnostics.codes()
    assert result.diagnostics.crossover_rates_kbps[0] == pytest.approx(100.0, abs=0.1)


def test_quality_antisymmetry(rng):
    for _ in range(20):
        a = random_curve(rng, "a", n=6, log_start=2.0)
        b = random_curve(rng, "b", n=6, log_start=2.1)
        forward = bd_quality(a, b, diagnose=False).value
        backward = bd_quality(b, a, diagnose=False).value
        assert forward == pytest.approx(-backward, abs=1e-9)


def test_rate_span_is_the_shared_bitrate_band(anchor):
    """Anchor spans 100-1600 kbps over the quality range, the test 50-800"""
    result = bd_rate(anchor, shifted(anchor, rate_factor=0.5))
    assert result.interval_used.axis is Axis.QUALITY
    assert result.rate_span.axis is Axis.RATE
    assert result.rate_span.lo == pytest.approx(math.log10(100.0))
    assert result.rate_span.hi == pytest.approx(math.log10(800.0))


def test_rate_span_falls_back_to_anchor_band(anchor):
    result = bd_rate(anchor, shifted(anchor, rate_factor=0.01))
    assert result.rate_span.lo == pytest.approx(math.log10(100.0))
    assert result.rate_span.hi == pytest.approx(math.log10(1600.0))


def test_roi_narrows_integration(crossing_pair):
    a, b = crossing_pair
    result = bd_quality(a, b, roi=(10.0, 100.0))
    assert result.interval_used.hi == pytest.approx(2.0)
    # 10 - 5r averaged over [1, 2]
    assert result.value == pytest.approx(2.5, abs=1e-9)


def test_bd_quality_without_rate_overlap(anchor):
    far = make_curve([10_000, 20_000, 40_000, 80_000], [40.0, 42.0, 44.0, 46.0], label="far")
    with pytest.raises(NoOverlap):
        bd_quality(anchor, far)


def test_bd_rate_without_quality_overlap(disjoint_pair):
    with pytest.raises(NoOverlap):
        bd_rate(*disjoint_pair)


def test_bd_rate_needs_invertible_curves(anchor):
    flat = make_curve([100, 200, 400, 800], [30.0, 32.0, 32.0, 35.0], label="flat")
    with pytest.raises(NonInvertibleCurve) as exc:
        bd_rate(anchor, flat)
    assert exc.value.label == "flat"


def test_cubic_needs_four_points():
    a = make_curve([100, 200, 400], [30.0, 33.0, 35.0])
    with pytest.raises(TooFewPoints):
        bd_quality(a, a, FitMethod.CUBIC_FIT)


def test_mode_none_sentinel(disjoint_pair):
    a, b = disjoint_pair
    better = bd_rate_with_mode(a, b, mode=BdMode.NONE)
    worse = bd_rate_with_mode(b, a, mode=BdMode.NONE)
    assert better.value == -100.0
    assert worse.value == 100.0
    assert better.interval_used.is_empty


@pytest.mark.parametrize("mode, side", [
    (BdMode.LOW, Extrapolation.LOW),
    (BdMode.HIGH, Extrapolation.HIGH),
    (BdMode.BOTH, Extrapolation.BOTH),
])
def test_adaptive_modes_extend_disjoint_curves(disjoint_pair, mode, side):
    a, b = disjoint_pair
    result = bd_rate_with_mode(a, b, mode=mode)
    assert math.isfinite(result.value)
    assert result.value > -100.0
    assert result.extrapolated is side
    assert not result.interval_used.is_empty
    assert EXTRAPOLATED in result.diagnostics.codes()


def test_low_mode_integrates_over_lower_curve_range(disjoint_pair):
    a, b = disjoint_pair
    result = bd_rate_with_mode(a, b, mode=BdMode.LOW)
    assert (result.interval_used.lo, result.interval_used.hi) == (30.0, 36.0)


def test_both_mode_on_parallel_lines():
    """log10 R = D/10 against D/10 - log10 2 on touching quality ranges"""
    d_anchor = np.array([20.0, 22.5, 25.0, 27.5, 30.0])
    d_test = d_anchor + 10.0
    a = make_curve(10.0 ** (d_anchor / 10.0), d_anchor, label="a")
    b = make_curve(10.0 ** (d_test / 10.0) / 2.0, d_test, label="b")
    assert compute_overlap(a, b, Axis.QUALITY).is_empty

    result = bd_rate_with_mode(a, b, mode=BdMode.BOTH)
    assert result.value == pytest.approx(-50.0, abs=1e-6)
    assert (result.interval_used.lo, result.interval_used.hi) == (20.0, 40.0)


@pytest.mark.parametrize("mode", [BdMode.LOW, BdMode.HIGH, BdMode.BOTH])
def test_adaptive_modes_are_no_ops_with_overlap(anchor, mode):
    test = shifted(anchor, rate_factor=0.7, quality_offset=0.4)
    plain = bd_rate_with_mode(anchor, test, mode=BdMode.NONE)
    adaptive = bd_rate_with_mode(anchor, test, mode=mode)
    assert adaptive.value == plain.value
    assert adaptive.interval_used == plain.interval_used
    assert adaptive.extrapolated is Extrapolation.NONE


def test_always_mode_extends_with_overlap(anchor):
    test = shifted(anchor, rate_factor=0.7, quality_offset=1.0)
    result = bd_rate_with_mode(anchor, test, mode=BdMode.LOW_ALWAYS)
    assert result.extrapolated is Extrapolation.LOW
    assert result.interval_used.lo == 30.0
    assert result.interval_used.hi == 38.5


def test_rate_roi(anchor):
    test = shifted(anchor, rate_factor=0.5)
    result = bd_rate_with_mode(anchor, test, roi=(32.0, 36.0))
    assert (result.interval_used.lo, result.interval_used.hi) == (32.0, 36.0)
    assert result.value == pytest.approx(-50.0, rel=1e-9)


def test_uniform_pdf_reduces_to_bd_quality(rng):
    """Uniform pdf over the classic interval, 50 random pairs"""
    for _ in range(50):
        a = random_curve(rng, "a", n=6, log_start=2.0)
        b = random_curve(rng, "b", n=6, log_start=2.1)
        classic = bd_quality(a, b, diagnose=False)
        lo, hi = classic.interval_used.to_kbps()
        weighted = bd_quality_weighted(a, b, FitMethod.PIECEWISE_CUBIC, RatePdf.uniform(lo, hi), diagnose=False)
        assert weighted.value == pytest.approx(classic.value, abs=1e-6)


def test_weighted_offset_under_any_pdf(anchor):
    pdf = RatePdf(bins=(PdfBin(150, 300, 0.7), PdfBin(300, 1200, 0.3))).normalize()
    result = bd_quality_weighted(anchor, shifted(anchor, quality_offset=1.0), FitMethod.PIECEWISE_CUBIC, pdf)
    assert result.value == pytest.approx(1.0, abs=1e-6)


def two_bin_lines():
    x = np.array([2.0, 2.5, 3.0, 3.5, 4.0])
    a = make_curve(10.0 ** x, 20.0 + 10.0 * x, label="a")
    b = make_curve(10.0 ** x, 25.0 + 5.0 * x, label="b")
    pdf = RatePdf(bins=(PdfBin(100, 1000, 0.25), PdfBin(1000, 10_000, 0.75))).normalize()
    return a, b, pdf


def test_two_bin_pdf_log_spread():
    """Difference 5 - 5 log10 R, averaged at each bin's log midpoint"""
    a, b, pdf = two_bin_lines()
    result = bd_quality_weighted(a, b, FitMethod.PIECEWISE_CUBIC, pdf)
    assert result.value == pytest.approx(0.25 * -7.5 + 0.75 * -12.5, abs=1e-6)


def test_two_bin_pdf_linear_spread():
    a, b, pdf = two_bin_lines()
    pdf = RatePdf(bins=pdf.bins, normalized=True, raw_total=1.0, spread=PdfSpread.LINEAR)

    def mean_log10(lo, hi):
        return (hi * math.log(hi) - hi - lo * math.log(lo) + lo) / ((hi - lo) * math.log(10.0))

    expected = 0.25 * (5 - 5 * mean_log10(100, 1000)) + 0.75 * (5 - 5 * mean_log10(1000, 10_000))
    result = bd_quality_weighted(a, b, FitMethod.PIECEWISE_CUBIC, pdf)
    assert result.value == pytest.approx(expected, abs=1e-6)


def test_weighted_needs_normalized_pdf(anchor):
    pdf = RatePdf(bins=(PdfBin(150, 300, 2.0),))
    with pytest.raises(UnnormalizedPdf):
        bd_quality_weighted(anchor, anchor, FitMethod.PIECEWISE_CUBIC, pdf)


def test_weighted_pdf_outside_curves(anchor):
    pdf = RatePdf.uniform(50, 1000)
    with pytest.raises(PdfOutsideCurveRange):
        bd_quality_weighted(anchor, shifted(anchor, quality_offset=1.0), FitMethod.PIECEWISE_CUBIC, pdf)

    result = bd_quality_weighted(anchor, shifted(anchor, quality_offset=1.0), FitMethod.PIECEWISE_CUBIC, pdf,
                                 extend=True)
    assert result.value == pytest.approx(1.0, abs=1e-6)
    assert result.extrapolated is Extrapolation.LOW


def test_weighted_zero_rate_bin(anchor):
    pdf = RatePdf(bins=(PdfBin(0, 1000, 1.0),)).normalize()
    with pytest.raises(PdfOutsideCurveRange):
        bd_quality_weighted(anchor, anchor, FitMethod.PIECEWISE_CUBIC, pdf, extend=True)


def rate_result(value, method=FitMethod.PIECEWISE_CUBIC, kind=BdKind.RATE):
    return BdResult(kind=kind, value=value, interval_used=OverlapInterval(Axis.QUALITY, 30.0, 40.0),
                    mode=BdMode.NONE, method=method, metric=None)


def test_aggregate_mean():
    agg = aggregate([rate_result(v) for v in (-48.7, -28.0, -50.8, -33.6)])
    assert agg.mean == pytest.approx(-40.275, abs=1e-9)
    assert (agg.minimum, agg.maximum, agg.count) == (-50.8, -28.0, 4)


def test_aggregate_single():
    agg = aggregate([rate_result(-12.5)])
    assert agg.mean == -12.5
    assert agg.count == 1


def test_aggregate_empty():
    with pytest.raises(EmptyInput):
        aggregate([])


def test_aggregate_mixed():
    with pytest.raises(MixedKinds):
        aggregate([rate_result(-10.0), rate_result(-10.0, method=FitMethod.CUBIC_FIT)])
    with pytest.raises(MixedKinds):
        aggregate([rate_result(-10.0), rate_result(1.0, kind=BdKind.QUALITY)])


def test_methods_agree_on_collinear_data():
    x = np.array([2.0, 2.3, 2.6, 2.9, 3.2])
    a = make_curve(10.0 ** x, 10.0 + 8.0 * x, label="a")
    b = make_curve(10.0 ** (x - 0.1), 10.5 + 8.0 * x, label="b")
    for kind in BdKind:
        comparison = compare_methods(a, b, kind)
        assert abs(comparison.difference) <= 1e-6


def test_methods_differ_on_curved_data(anchor):
    test = make_curve([120, 230, 390, 820, 1500], [30.4, 34.0, 35.9, 37.6, 38.9], label="test")
    comparison = compare_methods(anchor, test, BdKind.RATE)
    assert comparison.cubic.method is FitMethod.CUBIC_FIT
    assert comparison.pchip.method is FitMethod.PIECEWISE_CUBIC
    assert abs(comparison.difference) > 1e-6
    assert comparison.cubic.diagnostics is comparison.pchip.diagnostics


def test_compare_methods_honours_roi_and_skips_lints(anchor):
    test = make_curve([120, 230, 390, 820, 1500], [30.4, 34.0, 35.9, 37.6, 38.9], label="test")
    comparison = compare_methods(anchor, test, BdKind.QUALITY, roi=(200.0, 800.0), diagnose=False)
    for result in (comparison.cubic, comparison.pchip):
        assert result.kind is BdKind.QUALITY
        assert result.interval_used.lo == pytest.approx(math.log10(200.0))
        assert result.interval_used.hi == pytest.approx(math.log10(800.0))
        assert result.diagnostics is None
