import numpy as np
import pytest

from models import PSNR, RdPoint
from validator import validate_curve


def make_curve(rates, qualities, metric=PSNR, label="curve", allow_non_monotone=False):
    points = [RdPoint(float(r), float(q)) for r, q in zip(rates, qualities)]
    return validate_curve(points, metric, allow_non_monotone=allow_non_monotone, label=label)


def random_curve(rng, label="curve", n=None, log_start=None):
    """Strictly increasing rate and quality, rates roughly 100 kbps - 30 Mbps."""
    n = int(rng.integers(4, 9)) if n is None else n
    log_start = rng.uniform(2.0, 2.5) if log_start is None else log_start
    log_rates = log_start + np.cumsum(rng.uniform(0.1, 0.4, n))
    qualities = 25.0 + np.cumsum(rng.uniform(0.2, 3.0, n))
    return make_curve(10.0 ** log_rates, qualities, label=label)


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture
def anchor():
    return make_curve([100, 200, 400, 800, 1600], [30.0, 33.1, 35.6, 37.4, 38.5], label="anchor")


@pytest.fixture
def crossing_pair():
    """Q = 20 + 10 r against Q = 30 + 5 r with r = log10(kbps); they cross at 100 kbps."""
    r = np.array([1.0, 5.0 / 3.0, 7.0 / 3.0, 3.0])
    a = make_curve(10.0 ** r, 20.0 + 10.0 * r, label="anchor")
    b = make_curve(10.0 ** r, 30.0 + 5.0 * r, label="test")
    return a, b


@pytest.fixture
def disjoint_pair():
    """Same rates, test quality entirely above the anchor's."""
    rates = [100, 200, 400, 800]
    a = make_curve(rates, [30.0, 32.0, 34.0, 36.0], label="anchor")
    b = make_curve(rates, [40.0, 42.0, 44.0, 46.0], label="test")
    return a, b


@pytest.fixture
def measurement_csv():
    return (
        "sequence,codec,metric,rate_kbps,quality\n"
        "# two codecs, one sequence\n"
        "foreman,x264,PSNR,100,30.0\n"
        "foreman,x264,PSNR,200,33.1\n"
        "foreman,x264,PSNR,400,35.6\n"
        "foreman,x264,PSNR,800,37.4\n"
        "foreman,x265,PSNR,200,30.0\n"
        "foreman,x265,PSNR,400,33.1\n"
        "foreman,x265,PSNR,800,35.6\n"
        "foreman,x265,PSNR,1600,37.4\n"
    ).encode("utf-8")
