"""Checks for the situations where a single BD number misleads.

Crossing curves, poor overlap, quality ranges that differ per metric,
non-monotone or saturated quality, too few points, and cubic vs.
piecewise-cubic disagreement each map to a lint code.
"""
import logging
from collections import defaultdict
from itertools import combinations
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from errors import MetricMismatch
from interp import FittedCurve, evaluate, fit_curve
from models import (
    Axis,
    BdKind,
    BdResult,
    DiagnosticsReport,
    Extrapolation,
    FitMethod,
    Lint,
    LintConfig,
    MetricKind,
    MetricName,
    OverlapInterval,
    RdCurve,
    Severity,
)

logger = logging.getLogger(__name__)

CROSSOVER = "CROSSOVER"
TANGENT = "TANGENT"
LOW_OVERLAP = "LOW_OVERLAP"
NO_OVERLAP = "NO_OVERLAP"
METRIC_RANGE_DIVERGENCE = "METRIC_RANGE_DIVERGENCE"
NON_MONOTONE = "NON_MONOTONE"
NON_INVERTIBLE = "NON_INVERTIBLE"
SSIM_SATURATION = "SSIM_SATURATION"
FEW_POINTS = "FEW_POINTS"
METHOD_DISAGREEMENT = "METHOD_DISAGREEMENT"
EXTRAPOLATED = "EXTRAPOLATED"

CROSSOVER_SAMPLES = 1000
ROOT_TOLERANCE = 1e-9  # fraction of the interval width


def compute_overlap(a: RdCurve, b: RdCurve, axis: Axis) -> OverlapInterval:
    """[max of minima, min of maxima] on one axis; Rate in log10(kbps)."""
    if a.metric != b.metric:
        raise MetricMismatch(str(a.metric), str(b.metric))
    ra, rb = _axis_range(a, axis), _axis_range(b, axis)
    return OverlapInterval(axis, max(ra[0], rb[0]), min(ra[1], rb[1]))


def overlap_fraction(a: RdCurve, b: RdCurve, axis: Axis) -> float:
    """Overlap length over union length on one axis; 0 when disjoint."""
    overlap = compute_overlap(a, b, axis)
    ra, rb = _axis_range(a, axis), _axis_range(b, axis)
    union = max(ra[1], rb[1]) - min(ra[0], rb[0])
    if union <= 0:
        return 1.0 if ra == rb else 0.0
    return overlap.length / union


def find_crossovers(fa: FittedCurve, fb: FittedCurve, interval: OverlapInterval,
                    samples: int = CROSSOVER_SAMPLES) -> List[float]:
    """
    Positions inside the interval where fa - fb changes sign.

    The difference is sampled on a uniform grid to bracket the roots; each
    bracket is refined by bisection to 1e-9 of the interval width. Touching
    without a sign change is not a crossover (see find_tangents).
    """
    if interval.is_empty:
        return []
    xs, delta = _sample_difference(fa, fb, interval, samples)
    width = interval.hi - interval.lo
    signs = np.sign(delta)
    nonzero = np.flatnonzero(signs)

    def difference(x):
        return evaluate(fa, x) - evaluate(fb, x)

    roots = []
    for i, j in zip(nonzero[:-1], nonzero[1:]):
        if signs[i] != signs[j]:
            roots.append(float(bisect(difference, xs[i], xs[j], xtol=ROOT_TOLERANCE * width)))
    return roots


def find_tangents(fa: FittedCurve, fb: FittedCurve, interval: OverlapInterval,
                  samples: int = CROSSOVER_SAMPLES) -> List[float]:
    """Positions where the curves touch without crossing."""
    if interval.is_empty:
        return []
    xs, delta = _sample_difference(fa, fb, interval, samples)
    width = interval.hi - interval.lo
    magnitude = np.abs(delta)
    scale = max(1.0, float(magnitude.max()))

    def gap(x):
        return abs(evaluate(fa, x) - evaluate(fb, x))

    tangents = []
    for i in range(1, len(xs) - 1):
        left, here, right = delta[i - 1], magnitude[i], delta[i + 1]
        if np.sign(left) == 0 or np.sign(left) != np.sign(right):
            continue
        if here > abs(left) or here > abs(right) or here > 1e-3 * scale:
            continue
        if here == abs(left) and here == abs(right):
            continue
        res = minimize_scalar(gap, bounds=(xs[i - 1], xs[i + 1]), method="bounded",
                              options={"xatol": ROOT_TOLERANCE * width})
        if res.fun <= 1e-8 * scale:
            tangents.append(float(res.x))
    return tangents


def run_lints(a: RdCurve, b: RdCurve, results: Sequence[BdResult] = (),
              method: FitMethod = FitMethod.PIECEWISE_CUBIC,
              config: LintConfig = LintConfig()) -> DiagnosticsReport:
    """
    Diagnose a curve pair and the BD results computed from it.

    results may hold results for other metrics of the same comparison;
    they feed the per-metric range check.
    """
    rate_overlap = compute_overlap(a, b, Axis.RATE)
    quality_overlap = compute_overlap(a, b, Axis.QUALITY)
    fractions = {
        Axis.RATE: overlap_fraction(a, b, Axis.RATE),
        Axis.QUALITY: overlap_fraction(a, b, Axis.QUALITY),
    }
    lints: List[Lint] = []
    crossovers: List[float] = []
    tangents: List[float] = []

    if rate_overlap.is_empty:
        lints.append(Lint(NO_OVERLAP, Severity.ERROR,
                          f"'{a.label}' and '{b.label}' share no bitrate range; BD-Quality is undefined"))
    else:
        fit_method = method if min(len(a), len(b)) >= method.min_points else FitMethod.PIECEWISE_CUBIC
        fa = fit_curve(fit_method, a.log_rates, a.qualities)
        fb = fit_curve(fit_method, b.log_rates, b.qualities)
        crossovers = find_crossovers(fa, fb, rate_overlap, config.crossover_samples)
        tangents = find_tangents(fa, fb, rate_overlap, config.crossover_samples)
        if crossovers:
            at = ", ".join(f"{10.0 ** x:.1f}" for x in crossovers)
            lints.append(Lint(CROSSOVER, Severity.WARN,
                              f"'{a.label}' and '{b.label}' cross at {at} kbps; the averaged delta mixes "
                              "regions where each curve is better"))
        if tangents:
            at = ", ".join(f"{10.0 ** x:.1f}" for x in tangents)
            lints.append(Lint(TANGENT, Severity.INFO, f"'{a.label}' and '{b.label}' touch at {at} kbps"))

    if quality_overlap.is_empty:
        lints.append(Lint(NO_OVERLAP, Severity.ERROR,
                          f"'{a.label}' and '{b.label}' share no {a.metric} range; BD-Rate needs extrapolation"))

    for axis, overlap in ((Axis.RATE, rate_overlap), (Axis.QUALITY, quality_overlap)):
        if not overlap.is_empty and fractions[axis] < config.low_overlap_threshold:
            lints.append(Lint(LOW_OVERLAP, Severity.WARN,
                              f"{axis.value} overlap covers {fractions[axis]:.0%} of the combined range "
                              f"(threshold {config.low_overlap_threshold:.0%})"))

    violations = tuple((c.label, i) for c in (a, b) for i in c.monotone_violations)
    if violations:
        caution = " MOS-based BD values are unreliable on non-monotone data." if a.metric.name is MetricName.MOS else ""
        lints.append(Lint(NON_MONOTONE, Severity.WARN,
                          f"Quality decreases with rate at {list(violations)}.{caution}"))

    for curve in (a, b):
        if not curve.is_strictly_increasing:
            lints.append(Lint(NON_INVERTIBLE, Severity.ERROR,
                              f"'{curve.label}' quality is not strictly increasing; BD-Rate cannot be computed"))

    if a.metric.name is MetricName.SSIM:
        for curve in (a, b):
            span = float(curve.qualities.max() - curve.qualities.min())
            if span < config.ssim_span_threshold:
                lints.append(Lint(SSIM_SATURATION, Severity.WARN,
                                  f"SSIM of '{curve.label}' spans only {span:.4f}; "
                                  "BD values on saturated SSIM should be interpreted with caution"))

    for curve in (a, b):
        if len(curve) < config.min_points:
            lints.append(Lint(FEW_POINTS, Severity.INFO,
                              f"'{curve.label}' has {len(curve)} points (fewer than {config.min_points})"))

    per_metric_ranges = _per_metric_ranges(results)
    lints.extend(_range_divergence_lints(per_metric_ranges, config))
    lints.extend(_method_disagreement_lints(results, config))
    for result in results:
        if result.extrapolated is not Extrapolation.NONE:
            lints.append(Lint(EXTRAPOLATED, Severity.INFO,
                              f"{result.metric} BD-{result.kind.value} ({result.method.value}, {result.mode.value}) "
                              f"relies on linear extrapolation ({result.extrapolated.value})"))

    for lint in lints:
        logger.log(_LOG_LEVELS[lint.severity], "%s: %s", lint.code, lint.message)

    return DiagnosticsReport(
        crossovers=tuple(crossovers),
        overlap_fraction_rate=fractions[Axis.RATE],
        overlap_fraction_quality=fractions[Axis.QUALITY],
        monotone_violations=violations,
        per_metric_ranges=per_metric_ranges,
        lints=tuple(lints),
        tangents=tuple(tangents),
    )


def lint_metric_ranges(results: Sequence[BdResult], config: LintConfig = LintConfig()
                       ) -> Tuple[Dict[MetricKind, OverlapInterval], List[Lint]]:
    """
    Compare the bitrate bands of BD-Rate results measured with different
    metrics on the same curve pair. Returns the per-metric bands and any
    METRIC_RANGE_DIVERGENCE lints.
    """
    ranges = _per_metric_ranges(results)
    lints = _range_divergence_lints(ranges, config)
    for lint in lints:
        logger.log(_LOG_LEVELS[lint.severity], "%s: %s", lint.code, lint.message)
    return ranges, lints


_LOG_LEVELS = {Severity.INFO: logging.INFO, Severity.WARN: logging.WARNING, Severity.ERROR: logging.ERROR}


def _axis_range(curve: RdCurve, axis: Axis) -> Tuple[float, float]:
    values = curve.log_rates if axis is Axis.RATE else curve.qualities
    return float(values.min()), float(values.max())


def _sample_difference(fa, fb, interval, samples):
    xs = np.linspace(interval.lo, interval.hi, samples)
    return xs, evaluate(fa, xs) - evaluate(fb, xs)


def _per_metric_ranges(results: Sequence[BdResult]) -> Dict[MetricKind, OverlapInterval]:
    """Bitrate band each metric's BD-Rate integrates over."""
    ranges: Dict[MetricKind, OverlapInterval] = {}
    for result in results:
        span = result.rate_span if result.kind is BdKind.RATE else None
        if span is None or span.is_empty:
            continue
        ranges[result.metric] = ranges[result.metric].union(span) if result.metric in ranges else span
    return ranges


def _range_divergence_lints(ranges: Dict[MetricKind, OverlapInterval], config: LintConfig) -> List[Lint]:
    lints = []
    for (m1, r1), (m2, r2) in combinations(sorted(ranges.items(), key=lambda item: item[0].label), 2):
        union = r1.union(r2).length
        if union <= 0:
            continue
        divergence = (union - r1.intersect(r2).length) / union
        if divergence > config.range_divergence_threshold:
            lo1, hi1 = r1.to_kbps()
            lo2, hi2 = r2.to_kbps()
            lints.append(Lint(METRIC_RANGE_DIVERGENCE, Severity.WARN,
                              f"{m1} integrates over {lo1:.0f}-{hi1:.0f} kbps but {m2} over {lo2:.0f}-{hi2:.0f} kbps "
                              f"({divergence:.0%} of the combined range differs)"))
    return lints


def _method_disagreement_lints(results: Sequence[BdResult], config: LintConfig) -> List[Lint]:
    grouped = defaultdict(dict)
    for result in results:
        grouped[(result.metric.label, result.kind, result.mode)][result.method] = result
    lints = []
    for (metric, kind, mode), by_method in grouped.items():
        if len(by_method) < 2:
            continue
        cubic = by_method[FitMethod.CUBIC_FIT].value
        pchip = by_method[FitMethod.PIECEWISE_CUBIC].value
        gap = abs(cubic - pchip)
        if kind is BdKind.RATE:
            disagree = gap > config.method_disagreement_pp
            shown = f"{cubic:.1f}% vs {pchip:.1f}%"
        else:
            disagree = gap > config.method_disagreement_quality * max(abs(cubic), abs(pchip), 1e-6)
            shown = f"{cubic:.3f} vs {pchip:.3f}"
        if disagree:
            lints.append(Lint(METHOD_DISAGREEMENT, Severity.WARN,
                              f"{metric} BD-{kind.value}: cubic and piecewise-cubic fits disagree ({shown})"))
    return lints
