import pytest

from errors import (
    DuplicateRate,
    EmptyInput,
    NonMonotoneQuality,
    NonPositiveRate,
    QualityOutOfMetricBounds,
    UnorderedRates,
)
from models import MOS, PSNR, SSIM, VMAF, MetricKind, MetricName, RdPoint
from validator import get_monotone_violations, validate_curve


def points(rates, qualities):
    return [RdPoint(r, q) for r, q in zip(rates, qualities)]


def test_valid_curve_keeps_point_order():
    """Points come back untouched and in input order"""
    curve = validate_curve(points([100, 200, 400], [30, 33, 35]), PSNR, label="x264")
    assert curve.label == "x264"
    assert [p.rate for p in curve.points] == [100, 200, 400]
    assert curve.monotone_violations == ()
    assert curve.is_strictly_increasing


def test_single_point_is_rejected():
    with pytest.raises(EmptyInput):
        validate_curve(points([100], [30]), PSNR)


@pytest.mark.parametrize("rate", [0.0, -5.0, float("nan"), float("inf")])
def test_non_positive_rate(rate):
    with pytest.raises(NonPositiveRate) as exc:
        validate_curve(points([100, rate], [30, 31]), PSNR)
    assert exc.value.index == 1


def test_duplicate_rate_reports_both_indices():
    with pytest.raises(DuplicateRate) as exc:
        validate_curve(points([100, 200, 200], [30, 31, 32]), PSNR)
    assert exc.value.indices == (1, 2)


def test_repeated_rate_is_a_duplicate_even_when_apart():
    with pytest.raises(DuplicateRate) as exc:
        validate_curve(points([100, 200, 100], [30, 31, 32]), PSNR)
    assert exc.value.rate == 100
    assert exc.value.indices == (0, 2)


def test_descending_rates_are_not_reordered():
    with pytest.raises(UnorderedRates):
        validate_curve(points([200, 100], [30, 31]), PSNR)


def test_quality_decrease_rejected_by_default():
    with pytest.raises(NonMonotoneQuality) as exc:
        validate_curve(points([100, 200, 400, 800], [3.0, 3.5, 3.4, 4.0]), MOS, label="mos")
    assert exc.value.indices == (2,)


def test_quality_decrease_recorded_when_permissive():
    curve = validate_curve(points([100, 200, 400, 800], [3.0, 3.5, 3.4, 4.0]), MOS, allow_non_monotone=True)
    assert curve.monotone_violations == (2,)
    assert not curve.is_strictly_increasing


def test_flat_quality_is_monotone_but_not_invertible():
    """Equal neighbouring qualities are accepted; only BD-Rate needs strict increase"""
    curve = validate_curve(points([100, 200, 400], [30, 32, 32]), PSNR)
    assert curve.monotone_violations == ()
    assert not curve.is_strictly_increasing


@pytest.mark.parametrize("metric, quality", [(SSIM, 1.2), (VMAF, -1.0), (MOS, 5.5), (PSNR, float("nan"))])
def test_quality_outside_metric_bounds(metric, quality):
    with pytest.raises(QualityOutOfMetricBounds):
        validate_curve(points([100, 200], [metric.bounds[0] if metric.bounds else 30, quality]), metric)


def test_unknown_metric_has_no_bounds():
    metric = MetricKind.from_label("ssimulacra2")
    assert metric.name is MetricName.OTHER
    curve = validate_curve(points([100, 200], [-20.0, 500.0]), metric)
    assert len(curve) == 2


def test_get_monotone_violations():
    assert get_monotone_violations(points([1, 2, 3, 4], [1, 0, 2, 1])) == [1, 3]
