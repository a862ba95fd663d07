"""Exception hierarchy for BD computations.

Everything derives from BdError, which is a ValueError, so callers that
only care about "bad input" can keep catching ValueError.
"""
from typing import Optional, Sequence, Tuple


class BdError(ValueError):
    """Root of all errors raised by this package."""


# Curve construction / validation

class CurveError(BdError):
    pass


class EmptyInput(CurveError):
    def __init__(self, message: str = "At least 2 points are required"):
        super().__init__(message)


class NonPositiveRate(CurveError):
    def __init__(self, index: int, rate: float):
        self.index = index
        self.rate = rate
        super().__init__(f"Point {index}: rate must be a positive finite number, got {rate}")


class DuplicateRate(CurveError):
    def __init__(self, rate: float, indices: Tuple[int, int]):
        self.rate = rate
        self.indices = indices
        super().__init__(f"Duplicate rate {rate} at points {indices[0]} and {indices[1]}")


class UnorderedRates(CurveError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"Point {index}: rates must be strictly increasing (points are never reordered)")


class NonMonotoneQuality(CurveError):
    def __init__(self, indices: Sequence[int], label: str = ""):
        self.indices = tuple(indices)
        self.label = label
        where = f" in curve '{label}'" if label else ""
        super().__init__(
            f"Quality decreases with rate{where} at points {list(self.indices)}; "
            "pass allow_non_monotone (--permissive) to accept it"
        )


class QualityOutOfMetricBounds(CurveError):
    def __init__(self, index: int, quality: float, bounds: Optional[Tuple[float, float]]):
        self.index = index
        self.quality = quality
        self.bounds = bounds
        expected = f"within {list(bounds)}" if bounds else "finite"
        super().__init__(f"Point {index}: quality {quality} must be {expected}")


class MetricMismatch(CurveError):
    def __init__(self, first: str, second: str):
        super().__init__(f"Cannot compare curves measured with different metrics: {first} vs {second}")


# Fitting

class FitError(BdError):
    pass


class TooFewPoints(FitError):
    def __init__(self, method: str, required: int, got: int):
        self.required = required
        self.got = got
        super().__init__(f"{method} needs at least {required} points, got {got}")


class SingularSystem(FitError):
    pass


class NonIncreasingAbscissa(FitError):
    def __init__(self):
        super().__init__("Abscissae must be strictly increasing")


# Evaluation domain

class DomainError(BdError):
    pass


class OutOfDomain(DomainError):
    def __init__(self, x: float, domain: Tuple[float, float]):
        self.x = x
        self.domain = domain
        super().__init__(f"x={x} lies outside the fitted domain [{domain[0]}, {domain[1]}]")


class InvertedInterval(DomainError):
    def __init__(self, lo: float, hi: float):
        super().__init__(f"Integration bounds are inverted: lo={lo} > hi={hi}")


class TargetInsideDomain(DomainError):
    def __init__(self, target: float, domain: Tuple[float, float]):
        self.target = target
        super().__init__(f"Extension target {target} is not outside the domain [{domain[0]}, {domain[1]}]")


# BD computations

class ComputationError(BdError):
    pass


class NoOverlap(ComputationError):
    def __init__(self, axis: str):
        self.axis = axis
        super().__init__(f"The curves do not overlap on the {axis} axis")


class NonInvertibleCurve(ComputationError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"Curve '{label}' cannot be inverted: quality must be strictly increasing for BD-Rate")


class PdfOutsideCurveRange(ComputationError):
    def __init__(self, support: Tuple[float, float], label: str):
        super().__init__(
            f"Rate pdf support [{support[0]}, {support[1]}] kbps is not covered by curve '{label}'"
        )


class UnnormalizedPdf(ComputationError):
    def __init__(self):
        super().__init__("Rate pdf must be normalized before weighting")


class MixedKinds(ComputationError):
    pass


# Parsing

class ParseError(BdError):
    def __init__(self, message: str, lines: Sequence[int] = ()):
        self.lines = tuple(lines)
        self.detail = message
        # file the lines refer to, set by the loaders
        self.source: Optional[str] = None
        prefix = f"line {', '.join(str(n) for n in self.lines)}: " if self.lines else ""
        super().__init__(prefix + message)


class MalformedRow(ParseError):
    pass


class UnknownHeader(ParseError):
    pass


class NonNumericField(ParseError):
    def __init__(self, line: int, field: str, value: str):
        self.field = field
        self.value = value
        super().__init__(f"field '{field}' is not a finite number: {value!r}", [line])


class OverlappingBins(ParseError):
    pass


class NegativeMass(ParseError):
    pass


class EmptyPdf(ParseError):
    pass


class InvalidPdfBin(ParseError):
    pass


class UsageError(BdError):
    pass
