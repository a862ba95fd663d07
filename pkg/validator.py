import logging
import math
from typing import List, Sequence

from errors import (
    DuplicateRate,
    EmptyInput,
    NonMonotoneQuality,
    NonPositiveRate,
    QualityOutOfMetricBounds,
    UnorderedRates,
)
from models import MetricKind, RdCurve, RdPoint

logger = logging.getLogger(__name__)


def validate_curve(points: Sequence[RdPoint], metric: MetricKind,
                   allow_non_monotone: bool = False, label: str = "") -> RdCurve:
    """
    Validates measured operating points and wraps them in an RdCurve.

    Points are never reordered. Rates must be positive and strictly
    increasing; quality must be finite, inside the metric's bounds and
    non-decreasing in rate. A quality decrease is rejected unless
    allow_non_monotone is set, in which case the offending point indices
    are recorded on the curve.
    """
    points = tuple(points)
    if len(points) < 2:
        raise EmptyInput(f"Curve '{label}' needs at least 2 points, got {len(points)}")

    for i, p in enumerate(points):
        if not math.isfinite(p.rate) or p.rate <= 0:
            raise NonPositiveRate(i, p.rate)
        if not math.isfinite(p.quality) or not _within_bounds(p.quality, metric):
            raise QualityOutOfMetricBounds(i, p.quality, metric.bounds)

    first_seen = {}
    for i, p in enumerate(points):
        if p.rate in first_seen:
            raise DuplicateRate(p.rate, (first_seen[p.rate], i))
        first_seen[p.rate] = i

    for i in range(1, len(points)):
        if points[i].rate < points[i - 1].rate:
            raise UnorderedRates(i)

    violations = get_monotone_violations(points)
    if violations:
        if not allow_non_monotone:
            raise NonMonotoneQuality(violations, label)
        logger.debug("Curve '%s' accepted with quality decreases at %s", label, violations)

    return RdCurve(
        label=label,
        metric=metric,
        points=points,
        non_monotone_allowed=allow_non_monotone,
        monotone_violations=tuple(violations),
    )


def get_monotone_violations(points: Sequence[RdPoint]) -> List[int]:
    """Indices of points whose quality is lower than the previous point's."""
    return [i for i in range(1, len(points)) if points[i].quality < points[i - 1].quality]


def _within_bounds(quality: float, metric: MetricKind) -> bool:
    if metric.bounds is None:
        return True
    lo, hi = metric.bounds
    return lo <= quality <= hi
