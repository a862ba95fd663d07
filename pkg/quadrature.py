"""Adaptive Simpson quadrature for integrands without a closed form."""
from typing import Callable, Tuple

DEFAULT_REL_TOL = 1e-8
MAX_DEPTH = 50
INITIAL_PANELS = 8


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     rel_tol: float = DEFAULT_REL_TOL, max_depth: int = MAX_DEPTH) -> Tuple[float, float]:
    """
    Integrate f over [a, b] by recursive Simpson subdivision.

    A fixed composite pass over INITIAL_PANELS panels seeds the recursion,
    so a lucky agreement on one coarse panel cannot end it early. The
    absolute target is rel_tol times the magnitude of that first estimate.
    Returns (integral, error estimate).
    """
    if a == b:
        return 0.0, 0.0
    if a > b:
        value, error = adaptive_simpson(f, b, a, rel_tol, max_depth)
        return -value, error

    n = 2 * INITIAL_PANELS
    h = (b - a) / n
    xs = [a + i * h for i in range(n)] + [b]
    values = [f(x) for x in xs]

    panels = []
    for i in range(0, n, 2):
        whole = _simpson(values[i], values[i + 1], values[i + 2], xs[i + 2] - xs[i])
        panels.append((xs[i], xs[i + 2], values[i], values[i + 1], values[i + 2], whole))

    estimate = sum(p[-1] for p in panels)
    scale = max(abs(estimate), max(abs(v) for v in values) * (b - a) * 1e-3)
    tol = rel_tol * scale if scale > 0 else rel_tol

    total, total_error = 0.0, 0.0
    for lo, hi, flo, fmid, fhi, whole in panels:
        value, error = _adaptive(f, lo, hi, flo, fmid, fhi, whole, tol / INITIAL_PANELS, 0, max_depth)
        total += value
        total_error += error
    return total, total_error


def _simpson(fa: float, fm: float, fb: float, width: float) -> float:
    return width / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, b, fa, fm, fb, whole, tol, depth, max_depth) -> Tuple[float, float]:
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = _simpson(fa, flm, fm, m - a)
    right = _simpson(fm, frm, fb, b - m)
    error = (left + right - whole) / 15.0

    if depth >= max_depth or abs(error) <= tol:
        # Richardson extrapolation
        return left + right + error, abs(error)

    left_value, left_error = _adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1, max_depth)
    right_value, right_error = _adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1, max_depth)
    return left_value + right_value, left_error + right_error
