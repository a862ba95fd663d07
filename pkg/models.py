import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import EmptyPdf, InvalidPdfBin, NegativeMass, OverlappingBins


class MetricName(str, Enum):
    PSNR = "PSNR"
    SSIM = "SSIM"
    VMAF = "VMAF"
    MOS = "MOS"
    OTHER = "OTHER"


METRIC_BOUNDS = {
    MetricName.PSNR: None,
    MetricName.SSIM: (0.0, 1.0),
    MetricName.VMAF: (0.0, 100.0),
    MetricName.MOS: (1.0, 5.0),
}


@dataclass(frozen=True)
class MetricKind:
    name: MetricName
    label: str
    bounds: Optional[Tuple[float, float]] = None
    higher_is_better: bool = True

    @classmethod
    def named(cls, name: MetricName) -> "MetricKind":
        return cls(name=name, label=name.value, bounds=METRIC_BOUNDS[name])

    @classmethod
    def other(cls, label: str, bounds: Optional[Tuple[float, float]] = None) -> "MetricKind":
        return cls(name=MetricName.OTHER, label=label, bounds=bounds)

    @classmethod
    def from_label(cls, label: str) -> "MetricKind":
        """Match a metric name case-insensitively; unknown names become OTHER."""
        key = label.strip().upper()
        for name in METRIC_BOUNDS:
            if name.value == key:
                return cls.named(name)
        return cls.other(label.strip())

    def __str__(self) -> str:
        return self.label


PSNR = MetricKind.named(MetricName.PSNR)
SSIM = MetricKind.named(MetricName.SSIM)
VMAF = MetricKind.named(MetricName.VMAF)
MOS = MetricKind.named(MetricName.MOS)


@dataclass(frozen=True)
class RdPoint:
    rate: float  # kbps
    quality: float


@dataclass(frozen=True)
class RdCurve:
    label: str
    metric: MetricKind
    points: Tuple[RdPoint, ...]
    non_monotone_allowed: bool = False
    monotone_violations: Tuple[int, ...] = ()

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points], dtype=float)

    @property
    def log_rates(self) -> np.ndarray:
        return np.log10(self.rates)

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.quality for p in self.points], dtype=float)

    @property
    def is_strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.qualities) > 0))

    def __len__(self) -> int:
        return len(self.points)


class Axis(str, Enum):
    RATE = "rate"
    QUALITY = "quality"


@dataclass(frozen=True)
class OverlapInterval:
    """Interval on one axis. Rate is stored as log10(kbps).

    lo > hi (or lo == hi) marks an empty overlap.
    """
    axis: Axis
    lo: float
    hi: float

    @property
    def is_empty(self) -> bool:
        return not self.lo < self.hi

    @property
    def length(self) -> float:
        return 0.0 if self.is_empty else self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def intersect(self, other: "OverlapInterval") -> "OverlapInterval":
        return OverlapInterval(self.axis, max(self.lo, other.lo), min(self.hi, other.hi))

    def union(self, other: "OverlapInterval") -> "OverlapInterval":
        return OverlapInterval(self.axis, min(self.lo, other.lo), max(self.hi, other.hi))

    def to_kbps(self) -> Tuple[float, float]:
        return 10.0 ** self.lo, 10.0 ** self.hi


class Severity(str, Enum):
    INFO = "info"
    WARN = "warn"
    ERROR = "error"

    @property
    def rank(self) -> int:
        return {"info": 0, "warn": 1, "error": 2}[self.value]


@dataclass(frozen=True)
class Lint:
    code: str
    severity: Severity
    message: str


@dataclass(frozen=True)
class DiagnosticsReport:
    crossovers: Tuple[float, ...] = ()
    overlap_fraction_rate: float = 0.0
    overlap_fraction_quality: float = 0.0
    monotone_violations: Tuple[Tuple[str, int], ...] = ()
    per_metric_ranges: Dict[MetricKind, OverlapInterval] = field(default_factory=dict)
    lints: Tuple[Lint, ...] = ()
    tangents: Tuple[float, ...] = ()

    @property
    def crossover_rates_kbps(self) -> Tuple[float, ...]:
        return tuple(10.0 ** x for x in self.crossovers)

    def codes(self) -> List[str]:
        return [lint.code for lint in self.lints]

    def worst_severity(self) -> Optional[Severity]:
        if not self.lints:
            return None
        return max((lint.severity for lint in self.lints), key=lambda s: s.rank)

    def with_metric_ranges(self, ranges: Dict[MetricKind, OverlapInterval],
                           lints: Tuple[Lint, ...] = ()) -> "DiagnosticsReport":
        """Copy carrying ranges gathered across metrics and the lints they raised."""
        merged = dict(self.per_metric_ranges)
        merged.update(ranges)
        return replace(self, per_metric_ranges=merged,
                       lints=self.lints + tuple(lint for lint in lints if lint not in self.lints))


class FitMethod(str, Enum):
    CUBIC_FIT = "cubic"
    PIECEWISE_CUBIC = "pchip"

    @property
    def min_points(self) -> int:
        return 4 if self is FitMethod.CUBIC_FIT else 2


class BdMode(str, Enum):
    NONE = "none"
    LOW = "low"
    HIGH = "high"
    BOTH = "both"
    LOW_ALWAYS = "low-always"
    HIGH_ALWAYS = "high-always"
    BOTH_ALWAYS = "both-always"

    @property
    def always(self) -> bool:
        return self.value.endswith("-always")

    @property
    def extends_low(self) -> bool:
        return self in (BdMode.LOW, BdMode.LOW_ALWAYS)

    @property
    def extends_high(self) -> bool:
        return self in (BdMode.HIGH, BdMode.HIGH_ALWAYS)

    @property
    def extends_both(self) -> bool:
        return self in (BdMode.BOTH, BdMode.BOTH_ALWAYS)


class BdKind(str, Enum):
    RATE = "rate"
    QUALITY = "quality"


class Extrapolation(str, Enum):
    NONE = "none"
    LOW = "low"
    HIGH = "high"
    BOTH = "both"

    @classmethod
    def from_sides(cls, low: bool, high: bool) -> "Extrapolation":
        if low and high:
            return cls.BOTH
        if low:
            return cls.LOW
        if high:
            return cls.HIGH
        return cls.NONE


@dataclass(frozen=True)
class BdResult:
    kind: BdKind
    value: float
    interval_used: OverlapInterval
    mode: BdMode
    method: FitMethod
    metric: MetricKind
    extrapolated: Extrapolation = Extrapolation.NONE
    diagnostics: Optional[DiagnosticsReport] = None
    # log-rate range covered by the integration, used for per-metric range checks
    rate_span: Optional[OverlapInterval] = None
    anchor_label: str = ""
    test_label: str = ""

    @property
    def display(self) -> str:
        text = f"{self.value:.1f}" if self.kind is BdKind.RATE else f"{self.value:.2f}"
        if text.startswith("-") and float(text) == 0:
            text = text[1:]
        return text + "%" if self.kind is BdKind.RATE else text

    def with_diagnostics(self, report: DiagnosticsReport) -> "BdResult":
        return replace(self, diagnostics=report)


@dataclass(frozen=True)
class AggregateResult:
    kind: BdKind
    method: FitMethod
    mode: BdMode
    mean: float
    minimum: float
    maximum: float
    count: int


class PdfSpread(str, Enum):
    LOG = "log"  # mass spread uniformly over log10(rate) within a bin
    LINEAR = "linear"  # mass spread uniformly over rate within a bin


@dataclass(frozen=True)
class PdfBin:
    rate_lo: float
    rate_hi: float
    mass: float


@dataclass(frozen=True)
class RatePdf:
    bins: Tuple[PdfBin, ...]
    normalized: bool = False
    raw_total: float = 0.0
    spread: PdfSpread = PdfSpread.LOG

    def __post_init__(self):
        if not self.bins:
            raise EmptyPdf("rate pdf has no bins")
        for i, b in enumerate(self.bins):
            if not (math.isfinite(b.rate_lo) and math.isfinite(b.rate_hi)) or b.rate_lo < 0 or b.rate_lo >= b.rate_hi:
                raise InvalidPdfBin(f"bin {i}: need 0 <= rate_lo < rate_hi, got [{b.rate_lo}, {b.rate_hi}]")
            if not math.isfinite(b.mass) or b.mass < 0:
                raise NegativeMass(f"bin {i}: mass must be a non-negative number, got {b.mass}")
            if i and b.rate_lo < self.bins[i - 1].rate_hi:
                raise OverlappingBins(
                    f"bin {i} [{b.rate_lo}, {b.rate_hi}] overlaps or precedes bin {i - 1} "
                    f"[{self.bins[i - 1].rate_lo}, {self.bins[i - 1].rate_hi}]"
                )
        if self.total_mass <= 0:
            raise EmptyPdf("rate pdf has zero total mass")

    @property
    def total_mass(self) -> float:
        return math.fsum(b.mass for b in self.bins)

    @property
    def support(self) -> Tuple[float, float]:
        """Rate range (kbps) of the bins carrying mass."""
        active = [b for b in self.bins if b.mass > 0]
        return active[0].rate_lo, active[-1].rate_hi

    def normalize(self) -> "RatePdf":
        total = self.total_mass
        if self.normalized and abs(total - 1.0) <= 1e-12:
            return self
        bins = tuple(PdfBin(b.rate_lo, b.rate_hi, b.mass / total) for b in self.bins)
        raw_total = self.raw_total if self.normalized else total
        return replace(self, bins=bins, normalized=True, raw_total=raw_total)

    @classmethod
    def uniform(cls, rate_lo: float, rate_hi: float, spread: PdfSpread = PdfSpread.LOG) -> "RatePdf":
        """Single-bin density over [rate_lo, rate_hi] kbps."""
        return cls(bins=(PdfBin(rate_lo, rate_hi, 1.0),), normalized=True, raw_total=1.0, spread=spread)


@dataclass
class MeasurementTable:
    # sequence -> codec -> metric -> points sorted by rate
    sequences: Dict[str, Dict[str, Dict[MetricKind, List[RdPoint]]]] = field(default_factory=dict)

    @property
    def sequence_names(self) -> List[str]:
        return list(self.sequences)

    def codecs(self, sequence: str) -> List[str]:
        return list(self.sequences.get(sequence, {}))

    def metrics(self, sequence: str, codec: str) -> List[MetricKind]:
        return list(self.sequences.get(sequence, {}).get(codec, {}))

    def points(self, sequence: str, codec: str, metric: MetricKind) -> List[RdPoint]:
        return self.sequences[sequence][codec][metric]

    def num_points(self) -> int:
        return sum(
            len(points)
            for codecs in self.sequences.values()
            for metrics in codecs.values()
            for points in metrics.values()
        )


@dataclass(frozen=True)
class LintConfig:
    low_overlap_threshold: float = 0.5
    range_divergence_threshold: float = 0.25
    ssim_span_threshold: float = 0.01
    min_points: int = 4
    method_disagreement_pp: float = 1.0  # percentage points, BD-Rate
    method_disagreement_quality: float = 0.1  # relative, BD-Quality
    crossover_samples: int = 1000

    @classmethod
    def from_env(cls, environ: Optional[Dict[str, str]] = None) -> "LintConfig":
        """Build a config from BD_DELTA_* environment variables."""
        env = os.environ if environ is None else environ
        overrides = {}
        for var, attr, cast in (
            ("BD_DELTA_LOW_OVERLAP", "low_overlap_threshold", float),
            ("BD_DELTA_RANGE_DIVERGENCE", "range_divergence_threshold", float),
            ("BD_DELTA_SSIM_SPAN", "ssim_span_threshold", float),
            ("BD_DELTA_MIN_POINTS", "min_points", int),
            ("BD_DELTA_METHOD_DISAGREEMENT_PP", "method_disagreement_pp", float),
        ):
            if env.get(var):
                overrides[attr] = cast(env[var])
        return cls(**overrides)
