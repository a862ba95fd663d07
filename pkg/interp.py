"""Curve models used by the BD computations.

Two bodies are supported:

* CubicFit: one least-squares cubic polynomial through all points (the
  original 2001 formulation, extended to more than 4 points).
* PiecewiseCubic: monotonicity-preserving cubic Hermite interpolation
  (PCHIP), the method current standardization practice uses.

Both are integrated in closed form. A body can be continued past either
end by a linear tail whose slope is the body's one-sided derivative at
that end.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from errors import (
    FitError,
    InvertedInterval,
    NonIncreasingAbscissa,
    OutOfDomain,
    SingularSystem,
    TargetInsideDomain,
    TooFewPoints,
)
from models import FitMethod

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# normal equations beyond this condition number are not trusted
MAX_CONDITION = 1e13


class Orientation(str, Enum):
    QUALITY_OF_LOG_RATE = "quality_of_log_rate"
    LOG_RATE_OF_QUALITY = "log_rate_of_quality"


@dataclass(frozen=True)
class LinearTail:
    x0: float  # junction with the body
    y0: float
    slope: float
    end: float  # far end of the tail

    def evaluate(self, x):
        return self.y0 + self.slope * (x - self.x0)

    def integrate(self, a: float, b: float) -> float:
        return self.y0 * (b - a) + 0.5 * self.slope * ((b - self.x0) ** 2 - (a - self.x0) ** 2)


@dataclass(frozen=True)
class FittedCurve:
    method: FitMethod
    orientation: Orientation
    x_lo: float
    x_hi: float
    data_points: Tuple[Tuple[float, float], ...]
    # CubicFit body: coefficients of t = (x - center) / half_range
    scaled_coefficients: Optional[Tuple[float, ...]] = None
    center: float = 0.0
    half_range: float = 1.0
    # PiecewiseCubic body: (x, y, slope) per knot
    knots: Optional[Tuple[Tuple[float, float, float], ...]] = None
    low_tail: Optional[LinearTail] = None
    high_tail: Optional[LinearTail] = None

    @property
    def domain(self) -> Tuple[float, float]:
        lo = self.low_tail.end if self.low_tail else self.x_lo
        hi = self.high_tail.end if self.high_tail else self.x_hi
        return lo, hi

    @property
    def body_domain(self) -> Tuple[float, float]:
        return self.x_lo, self.x_hi

    @property
    def coefficients(self) -> Optional[Tuple[float, ...]]:
        """c0..c3 of the cubic in the raw abscissa (CubicFit only)."""
        if self.scaled_coefficients is None:
            return None
        coef = self._body.convert().coef
        return tuple(float(c) for c in np.pad(coef, (0, 4 - len(coef))))

    @cached_property
    def _body(self):
        if self.method is FitMethod.CUBIC_FIT:
            return Polynomial(
                self.scaled_coefficients,
                domain=[self.center - self.half_range, self.center + self.half_range],
                window=[-1.0, 1.0],
            )
        x, y, m = (np.array(col) for col in zip(*self.knots))
        return CubicHermiteSpline(x, y, m, extrapolate=False)

    @cached_property
    def _body_antiderivative(self):
        if self.method is FitMethod.CUBIC_FIT:
            return self._body.integ()
        return self._body.antiderivative()

    def body_value(self, x):
        return self._body(x)

    def endpoint_slope(self, side: str) -> float:
        """One-sided derivative of the body at its 'low' or 'high' end."""
        if self.method is FitMethod.PIECEWISE_CUBIC:
            return float(self.knots[0][2] if side == "low" else self.knots[-1][2])
        x = self.x_lo if side == "low" else self.x_hi
        return float(self._body.deriv()(x))

    def __call__(self, x: ArrayLike):
        return evaluate(self, x)


def fit_cubic(xs: Sequence[float], ys: Sequence[float],
              orientation: Orientation = Orientation.QUALITY_OF_LOG_RATE) -> FittedCurve:
    """
    Least-squares cubic y = c0 + c1 x + c2 x^2 + c3 x^3.

    The abscissa is shifted by its mean and scaled by its half-range before
    the normal equations are solved; log10 rates cluster around 2-5 and the
    raw system loses digits there. With exactly 4 points the fit interpolates.
    """
    x, y = _as_arrays(xs, ys)
    if len(x) < 4:
        raise TooFewPoints("CubicFit", 4, len(x))
    _require_increasing(x)

    center = float(x.mean())
    half_range = float(x[-1] - x[0]) / 2.0
    t = (x - center) / half_range
    vander = np.vander(t, 4, increasing=True)
    normal = vander.T @ vander
    rhs = vander.T @ y

    condition = np.linalg.cond(normal)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularSystem(f"Cubic normal equations are singular (condition number {condition:.3g})")
    try:
        scaled = np.linalg.solve(normal, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularSystem(f"Cubic normal equations could not be solved: {e}") from e

    return FittedCurve(
        method=FitMethod.CUBIC_FIT,
        orientation=orientation,
        x_lo=float(x[0]),
        x_hi=float(x[-1]),
        data_points=tuple(zip(x.tolist(), y.tolist())),
        scaled_coefficients=tuple(float(c) for c in scaled),
        center=center,
        half_range=half_range,
    )


def fit_pchip(xs: Sequence[float], ys: Sequence[float],
              orientation: Orientation = Orientation.QUALITY_OF_LOG_RATE) -> FittedCurve:
    """
    Piecewise cubic Hermite interpolation with Fritsch-Carlson slopes.

    Interior slopes are the weighted harmonic mean of the neighbouring
    secants (0 where they differ in sign), end slopes use the one-sided
    three-point formula clamped to keep the data's local monotonicity.
    Two points give the chord.
    """
    x, y = _as_arrays(xs, ys)
    if len(x) < 2:
        raise TooFewPoints("PiecewiseCubic", 2, len(x))
    _require_increasing(x)

    slopes = PchipInterpolator(x, y).derivative()(x)
    knots = tuple((float(xi), float(yi), float(mi)) for xi, yi, mi in zip(x, y, slopes))
    return FittedCurve(
        method=FitMethod.PIECEWISE_CUBIC,
        orientation=orientation,
        x_lo=float(x[0]),
        x_hi=float(x[-1]),
        data_points=tuple(zip(x.tolist(), y.tolist())),
        knots=knots,
    )


def fit_curve(method: FitMethod, xs: Sequence[float], ys: Sequence[float],
              orientation: Orientation = Orientation.QUALITY_OF_LOG_RATE) -> FittedCurve:
    if method is FitMethod.CUBIC_FIT:
        return fit_cubic(xs, ys, orientation)
    return fit_pchip(xs, ys, orientation)


def evaluate(f: FittedCurve, x: ArrayLike):
    """Evaluate the body, or a tail where one covers x. Scalars in, scalars out."""
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = f.domain
    tol = domain_tolerance(lo, hi)
    outside = (arr < lo - tol) | (arr > hi + tol) | ~np.isfinite(arr)
    if np.any(outside):
        raise OutOfDomain(float(arr[outside][0]), f.domain)
    arr = np.clip(arr, lo, hi)

    below = arr < f.x_lo
    above = arr > f.x_hi
    inside = ~(below | above)
    out = np.empty_like(arr)
    out[inside] = f.body_value(arr[inside])
    if f.low_tail is not None:
        out[below] = f.low_tail.evaluate(arr[below])
    if f.high_tail is not None:
        out[above] = f.high_tail.evaluate(arr[above])
    return float(out[0]) if scalar else out


def integrate(f: FittedCurve, lo: float, hi: float) -> float:
    """Exact integral of f over [lo, hi], summed over the pieces it crosses."""
    if lo > hi:
        raise InvertedInterval(lo, hi)
    d_lo, d_hi = f.domain
    tol = domain_tolerance(d_lo, d_hi)
    for bound in (lo, hi):
        if not (d_lo - tol <= bound <= d_hi + tol):
            raise OutOfDomain(bound, f.domain)
    lo, hi = max(lo, d_lo), min(hi, d_hi)

    total = 0.0
    if f.low_tail is not None and lo < f.x_lo:
        total += f.low_tail.integrate(lo, min(hi, f.x_lo))
    a, b = max(lo, f.x_lo), min(hi, f.x_hi)
    if a < b:
        antiderivative = f._body_antiderivative
        total += float(antiderivative(b) - antiderivative(a))
    if f.high_tail is not None and hi > f.x_hi:
        total += f.high_tail.integrate(max(lo, f.x_hi), hi)
    return total


def attach_linear_tails(f: FittedCurve, extend_lo: Optional[float] = None,
                        extend_hi: Optional[float] = None) -> FittedCurve:
    """
    Continue the body linearly down to extend_lo and/or up to extend_hi.

    The tail slope is the body's derivative at the junction, so the
    extension is C1-continuous. A target must lie strictly outside the
    current domain (tails included); a new tail replaces an existing one.
    """
    lo, hi = f.domain
    low_tail, high_tail = f.low_tail, f.high_tail
    if extend_lo is not None:
        if not extend_lo < lo:
            raise TargetInsideDomain(extend_lo, f.domain)
        low_tail = LinearTail(
            x0=f.x_lo, y0=float(f.body_value(f.x_lo)), slope=f.endpoint_slope("low"), end=float(extend_lo)
        )
    if extend_hi is not None:
        if not extend_hi > hi:
            raise TargetInsideDomain(extend_hi, f.domain)
        high_tail = LinearTail(
            x0=f.x_hi, y0=float(f.body_value(f.x_hi)), slope=f.endpoint_slope("high"), end=float(extend_hi)
        )
    logger.debug("Extended %s curve from [%g, %g] to [%g, %g]",
                 f.method.value, lo, hi,
                 low_tail.end if low_tail else f.x_lo, high_tail.end if high_tail else f.x_hi)
    return replace(f, low_tail=low_tail, high_tail=high_tail)


def sample(f: FittedCurve, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """n uniformly spaced samples over the whole domain."""
    lo, hi = f.domain
    xs = np.linspace(lo, hi, n)
    return xs, evaluate(f, xs)


def _as_arrays(xs: Sequence[float], ys: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise FitError(f"xs and ys must be 1-D with equal length, got {x.shape} and {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("xs and ys must be finite")
    return x, y


def _require_increasing(x: np.ndarray) -> None:
    if np.any(np.diff(x) <= 0):
        raise NonIncreasingAbscissa()


def domain_tolerance(lo: float, hi: float) -> float:
    return 1e-12 * max(1.0, abs(lo), abs(hi))
