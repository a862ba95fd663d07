"""BD-Quality, BD-Rate and their variants.

Sign convention is test minus anchor: a positive BD-Quality means the
test curve is better on average, a negative BD-Rate means the test needs
less bitrate for the same quality.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from errors import (
    EmptyInput,
    MetricMismatch,
    MixedKinds,
    NoOverlap,
    NonInvertibleCurve,
    PdfOutsideCurveRange,
    UnnormalizedPdf,
)
from diagnostics import compute_overlap, run_lints
from interp import (
    FittedCurve,
    Orientation,
    attach_linear_tails,
    domain_tolerance,
    evaluate,
    fit_curve,
    integrate,
)
from models import (
    AggregateResult,
    Axis,
    BdKind,
    BdMode,
    BdResult,
    Extrapolation,
    FitMethod,
    LintConfig,
    OverlapInterval,
    PdfSpread,
    RatePdf,
    RdCurve,
)
from quadrature import adaptive_simpson

logger = logging.getLogger(__name__)

# 10 ** delta overflows a float beyond this
MAX_LOG_RATE_GAP = 300.0
NO_OVERLAP_SENTINEL = 100.0


@dataclass(frozen=True)
class MethodComparison:
    cubic: BdResult
    pchip: BdResult

    @property
    def difference(self) -> float:
        """cubic minus piecewise-cubic, in the result's units."""
        return self.cubic.value - self.pchip.value


def fit_quality_of_rate(curve: RdCurve, method: FitMethod) -> FittedCurve:
    return fit_curve(method, curve.log_rates, curve.qualities, Orientation.QUALITY_OF_LOG_RATE)


def fit_rate_of_quality(curve: RdCurve, method: FitMethod) -> FittedCurve:
    """Inverse fit, log10 rate as a function of quality."""
    if not curve.is_strictly_increasing:
        raise NonInvertibleCurve(curve.label)
    return fit_curve(method, curve.qualities, curve.log_rates, Orientation.LOG_RATE_OF_QUALITY)


def bd_quality(anchor: RdCurve, test: RdCurve, method: FitMethod = FitMethod.PIECEWISE_CUBIC,
               roi: Optional[Tuple[float, float]] = None, config: LintConfig = LintConfig(),
               diagnose: bool = True) -> BdResult:
    """
    Average quality gap over the shared log10 rate range.

    roi, in kbps, narrows the integration interval further.
    """
    interval = compute_overlap(anchor, test, Axis.RATE)
    if roi is not None:
        interval = interval.intersect(OverlapInterval(Axis.RATE, math.log10(roi[0]), math.log10(roi[1])))
    if interval.is_empty:
        raise NoOverlap(Axis.RATE.value)

    fa = fit_quality_of_rate(anchor, method)
    ft = fit_quality_of_rate(test, method)
    lo, hi = interval.lo, interval.hi
    value = (integrate(ft, lo, hi) - integrate(fa, lo, hi)) / (hi - lo)

    result = BdResult(
        kind=BdKind.QUALITY,
        value=value,
        interval_used=interval,
        mode=BdMode.NONE,
        method=method,
        metric=anchor.metric,
        rate_span=interval,
        anchor_label=anchor.label,
        test_label=test.label,
    )
    logger.debug("BD-Quality %s vs %s (%s): %.6f", test.label, anchor.label, method.value, value)
    return _diagnosed(result, anchor, test, config) if diagnose else result


def bd_rate(anchor: RdCurve, test: RdCurve, method: FitMethod = FitMethod.PIECEWISE_CUBIC,
            config: LintConfig = LintConfig(), diagnose: bool = True) -> BdResult:
    """Average bitrate difference in percent over the shared quality range."""
    if compute_overlap(anchor, test, Axis.QUALITY).is_empty:
        raise NoOverlap(Axis.QUALITY.value)
    return bd_rate_with_mode(anchor, test, method, BdMode.NONE, config=config, diagnose=diagnose)


def bd_rate_with_mode(anchor: RdCurve, test: RdCurve, method: FitMethod = FitMethod.PIECEWISE_CUBIC,
                      mode: BdMode = BdMode.NONE, roi: Optional[Tuple[float, float]] = None,
                      config: LintConfig = LintConfig(), diagnose: bool = True) -> BdResult:
    """
    BD-Rate with linear extrapolation in the log-rate domain.

    Mode None returns -100 or +100 when the quality ranges do not overlap.
    Low, High and Both extend curves only when there is no overlap; the
    *-always variants extend regardless. roi, in metric units, narrows the
    integrated quality interval.
    """
    overlap = compute_overlap(anchor, test, Axis.QUALITY)
    fa = fit_rate_of_quality(anchor, method)
    ft = fit_rate_of_quality(test, method)

    if overlap.is_empty and mode is BdMode.NONE:
        value = _no_overlap_sentinel(fa, ft)
        logger.warning("No %s overlap between '%s' and '%s'; reporting %+.0f%%",
                       anchor.metric, anchor.label, test.label, value)
        result = BdResult(
            kind=BdKind.RATE,
            value=value,
            interval_used=overlap,
            mode=mode,
            method=method,
            metric=anchor.metric,
            anchor_label=anchor.label,
            test_label=test.label,
        )
        return _diagnosed(result, anchor, test, config) if diagnose else result

    low = high = False
    if mode is not BdMode.NONE and (mode.always or overlap.is_empty):
        fa, ft, low, high = _extend_for_mode(fa, ft, mode)
        interval = OverlapInterval(Axis.QUALITY, max(fa.domain[0], ft.domain[0]), min(fa.domain[1], ft.domain[1]))
    else:
        interval = overlap
    if roi is not None:
        interval = interval.intersect(OverlapInterval(Axis.QUALITY, roi[0], roi[1]))
    if interval.is_empty:
        raise NoOverlap(Axis.QUALITY.value)

    lo, hi = interval.lo, interval.hi
    delta = (integrate(ft, lo, hi) - integrate(fa, lo, hi)) / (hi - lo)
    value = 100.0 * (10.0 ** min(delta, MAX_LOG_RATE_GAP) - 1.0)

    rate_span = OverlapInterval(Axis.RATE, max(evaluate(fa, lo), evaluate(ft, lo)),
                                min(evaluate(fa, hi), evaluate(ft, hi)))
    if rate_span.is_empty:
        # curves share no bitrate over the interval, fall back to the anchor's
        rate_span = OverlapInterval(Axis.RATE, evaluate(fa, lo), evaluate(fa, hi))
    result = BdResult(
        kind=BdKind.RATE,
        value=value,
        interval_used=interval,
        mode=mode,
        method=method,
        metric=anchor.metric,
        extrapolated=Extrapolation.from_sides(low, high),
        rate_span=rate_span,
        anchor_label=anchor.label,
        test_label=test.label,
    )
    logger.debug("BD-Rate %s vs %s (%s, %s): %.6f%%", test.label, anchor.label, method.value, mode.value, value)
    return _diagnosed(result, anchor, test, config) if diagnose else result


def bd_quality_weighted(anchor: RdCurve, test: RdCurve, method: FitMethod, pdf: RatePdf,
                        extend: bool = False, config: LintConfig = LintConfig(),
                        diagnose: bool = True) -> BdResult:
    """
    BD-Quality averaged under a rate pdf instead of uniformly in log rate.

    The pdf must be normalized and its support must lie inside both curves'
    rate ranges, unless extend is set, in which case linear tails cover it.
    """
    if not pdf.normalized:
        raise UnnormalizedPdf()
    if anchor.metric != test.metric:
        raise MetricMismatch(str(anchor.metric), str(test.metric))

    support = pdf.support
    if support[0] <= 0:
        raise PdfOutsideCurveRange(support, anchor.label)
    s_lo, s_hi = math.log10(support[0]), math.log10(support[1])

    fitted = []
    low = high = False
    for curve in (anchor, test):
        f = fit_quality_of_rate(curve, method)
        lo, hi = f.domain
        tol = domain_tolerance(lo, hi)
        below, above = s_lo < lo - tol, s_hi > hi + tol
        if below or above:
            if not extend:
                raise PdfOutsideCurveRange(support, curve.label)
            f = attach_linear_tails(f, extend_lo=s_lo if below else None, extend_hi=s_hi if above else None)
            low, high = low or below, high or above
        fitted.append(f)

    q_anchor = _weighted_mean(fitted[0], pdf)
    q_test = _weighted_mean(fitted[1], pdf)
    result = BdResult(
        kind=BdKind.QUALITY,
        value=q_test - q_anchor,
        interval_used=OverlapInterval(Axis.RATE, s_lo, s_hi),
        mode=BdMode.NONE,
        method=method,
        metric=anchor.metric,
        extrapolated=Extrapolation.from_sides(low, high),
        rate_span=OverlapInterval(Axis.RATE, s_lo, s_hi),
        anchor_label=anchor.label,
        test_label=test.label,
    )
    return _diagnosed(result, anchor, test, config) if diagnose else result


def aggregate(results: Sequence[BdResult]) -> AggregateResult:
    """Unweighted mean over sequences, with the min/max spread."""
    if not results:
        raise EmptyInput("Cannot aggregate an empty list of results")
    keys = {(r.kind, r.method, r.mode) for r in results}
    if len(keys) > 1:
        raise MixedKinds(
            "Results to aggregate must share kind, method and mode, got "
            + ", ".join(sorted(f"{k.value}/{m.value}/{mode.value}" for k, m, mode in keys))
        )
    values = [r.value for r in results]
    first = results[0]
    return AggregateResult(
        kind=first.kind,
        method=first.method,
        mode=first.mode,
        mean=math.fsum(values) / len(values),
        minimum=min(values),
        maximum=max(values),
        count=len(values),
    )


def compare_methods(anchor: RdCurve, test: RdCurve, kind: BdKind = BdKind.RATE,
                    mode: BdMode = BdMode.NONE, roi: Optional[Tuple[float, float]] = None,
                    config: LintConfig = LintConfig(), diagnose: bool = True) -> MethodComparison:
    """
    Compute one BD value with both fits; the gap is a reliability hint.

    roi is in kbps for BD-Quality and in metric units for BD-Rate.
    """
    results: List[BdResult] = []
    for method in (FitMethod.CUBIC_FIT, FitMethod.PIECEWISE_CUBIC):
        if kind is BdKind.RATE:
            results.append(bd_rate_with_mode(anchor, test, method, mode, roi=roi, diagnose=False))
        else:
            results.append(bd_quality(anchor, test, method, roi=roi, diagnose=False))
    if diagnose:
        report = run_lints(anchor, test, results, method=FitMethod.PIECEWISE_CUBIC, config=config)
        results = [r.with_diagnostics(report) for r in results]
    comparison = MethodComparison(cubic=results[0], pchip=results[1])
    logger.debug("%s BD-%s cubic minus pchip: %.6f", anchor.metric, kind.value, comparison.difference)
    return comparison


def _diagnosed(result: BdResult, anchor: RdCurve, test: RdCurve, config: LintConfig) -> BdResult:
    return result.with_diagnostics(run_lints(anchor, test, [result], method=result.method, config=config))


def _extend_to(f: FittedCurve, target: float) -> FittedCurve:
    lo, hi = f.domain
    if target < lo:
        return attach_linear_tails(f, extend_lo=target)
    if target > hi:
        return attach_linear_tails(f, extend_hi=target)
    return f


def _extend_for_mode(fa: FittedCurve, ft: FittedCurve, mode: BdMode):
    """Returns (anchor fit, test fit, extended low, extended high)."""
    (a_lo, a_hi), (t_lo, t_hi) = fa.domain, ft.domain
    low = high = False
    if mode.extends_low:
        # the curve starting at higher quality is pulled down to the other's minimum
        if a_lo > t_lo:
            fa, low = attach_linear_tails(fa, extend_lo=t_lo), True
        elif t_lo > a_lo:
            ft, low = attach_linear_tails(ft, extend_lo=a_lo), True
    elif mode.extends_high:
        if a_hi < t_hi:
            fa, high = attach_linear_tails(fa, extend_hi=t_hi), True
        elif t_hi < a_hi:
            ft, high = attach_linear_tails(ft, extend_hi=a_hi), True
    else:
        lo, hi = min(a_lo, t_lo), max(a_hi, t_hi)
        low = a_lo > lo or t_lo > lo
        high = a_hi < hi or t_hi < hi
        fa = _extend_to(_extend_to(fa, lo), hi)
        ft = _extend_to(_extend_to(ft, lo), hi)
    return fa, ft, low, high


def _no_overlap_sentinel(fa: FittedCurve, ft: FittedCurve) -> float:
    """
    Sign of the BD-Rate reported when the quality ranges do not touch.

    Both fits are extended linearly to the midpoint of the quality gap and
    their log rates compared there, not at the curves' own endpoints: -100
    when the test needs less rate than the anchor at that quality, else +100.
    """
    (a_lo, a_hi), (t_lo, t_hi) = fa.domain, ft.domain
    mid = 0.5 * (a_hi + t_lo) if t_lo >= a_hi else 0.5 * (t_hi + a_lo)
    gap = evaluate(_extend_to(ft, mid), mid) - evaluate(_extend_to(fa, mid), mid)
    return -NO_OVERLAP_SENTINEL if gap < 0 else NO_OVERLAP_SENTINEL


def _weighted_mean(f: FittedCurve, pdf: RatePdf) -> float:
    total = 0.0
    for b in pdf.bins:
        if b.mass == 0:
            continue
        if pdf.spread is PdfSpread.LOG:
            width = math.log10(b.rate_hi) - math.log10(b.rate_lo)

            def density(r, width=width):
                return 1.0 / (r * math.log(10.0) * width)
        else:
            def density(r, width=b.rate_hi - b.rate_lo):
                return 1.0 / width

        def integrand(r, density=density):
            return evaluate(f, math.log10(r)) * density(r)

        value, _ = adaptive_simpson(integrand, b.rate_lo, b.rate_hi)
        total += b.mass * value
    return total
