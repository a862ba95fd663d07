"""Command-line entry point: compute, diagnose, batch and plotdata."""
import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import BinaryIO, Callable, Dict, List, Optional, Sequence, TextIO, Tuple

from dotenv import load_dotenv

from bd_engine import (
    aggregate,
    bd_quality,
    bd_quality_weighted,
    bd_rate_with_mode,
    compare_methods,
    fit_quality_of_rate,
    fit_rate_of_quality,
)
from data_loader import load_measurements, load_pdf
from diagnostics import compute_overlap, lint_metric_ranges, run_lints
from errors import BdError, ComputationError, NoOverlap, ParseError, UsageError
from models import (
    Axis,
    BdKind,
    BdMode,
    BdResult,
    DiagnosticsReport,
    FitMethod,
    LintConfig,
    MeasurementTable,
    MetricKind,
    PdfSpread,
    RatePdf,
    RdCurve,
    Severity,
)
from output import (
    AggregateEntry,
    DiagnosticsEntry,
    PlotSeries,
    ReportDocument,
    ReportEntry,
    emit_plot_data,
    emit_plot_series,
    emit_report,
)
from validator import validate_curve

logger = logging.getLogger("bd_delta")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LINTS = 2
EXIT_USAGE = 64

COMMANDS = ("compute", "diagnose", "batch", "plotdata")
FORMAT_ALIASES = {"json": "json", "md": "markdown", "markdown": "markdown", "csv": "csv"}

_COLORS = {
    logging.DEBUG: "\033[2m",
    logging.INFO: "\033[36m",
    logging.WARNING: "\033[33m",
    logging.ERROR: "\033[31m",
}
_RESET = "\033[0m"
_handler: Optional[logging.Handler] = None


@dataclass
class CliConfig:
    command: str
    input: Path
    anchor: str
    test: str
    metrics: List[str] = field(default_factory=list)  # empty means every metric present
    method: FitMethod = FitMethod.PIECEWISE_CUBIC
    mode: BdMode = BdMode.NONE
    pdf: Optional[Path] = None
    pdf_spread: PdfSpread = PdfSpread.LOG
    extend_pdf: bool = False
    fmt: str = "json"
    permissive: bool = False
    strict: bool = False
    samples: int = 200
    sequence: Optional[str] = None
    roi: Optional[Tuple[float, float]] = None  # kbps
    roi_quality: Optional[Tuple[float, float]] = None  # metric units
    rate_only: bool = False
    compare_methods: bool = False
    verbose: bool = False
    lint_config: LintConfig = field(default_factory=LintConfig)


class ColorFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        text = super().format(record)
        color = _COLORS.get(record.levelno)
        return f"{color}{text}{_RESET}" if color else text


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", required=True, type=Path, help="Measurement CSV (sequence,codec,metric,rate_kbps,quality)")
    common.add_argument("--anchor", required=True, help="Codec label of the reference curve")
    common.add_argument("--test", required=True, help="Codec label of the curve under test")
    common.add_argument("--metric", action="append", default=[],
                        help="Metric to evaluate (repeatable, default: every metric present)")
    common.add_argument("--method", choices=[m.value for m in FitMethod], default=FitMethod.PIECEWISE_CUBIC.value,
                        help="cubic: least-squares cubic; pchip: piecewise cubic (default)")
    common.add_argument("--mode", choices=[m.value for m in BdMode], default=BdMode.NONE.value,
                        help="Extrapolation mode for BD-Rate (default: none)")
    common.add_argument("--format", dest="fmt", choices=sorted(FORMAT_ALIASES), default="json")
    common.add_argument("--permissive", action="store_true", help="Accept quality that decreases with rate")
    common.add_argument("--strict", action="store_true", help="Exit 2 when any warning or error lint fires")
    common.add_argument("--sequence", help="Sequence to use when the input holds several")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    common.add_argument("--low-overlap", type=float, help="LOW_OVERLAP threshold (fraction)")
    common.add_argument("--range-divergence", type=float, help="METRIC_RANGE_DIVERGENCE threshold (fraction)")
    common.add_argument("--ssim-span", type=float, help="SSIM_SATURATION span threshold")
    common.add_argument("--min-points", type=int, help="FEW_POINTS threshold")
    common.add_argument("--method-disagreement", type=float,
                        help="METHOD_DISAGREEMENT threshold for BD-Rate (percentage points)")

    parser = _Parser(description="Bjontegaard delta (BD-Rate / BD-Quality) calculator")
    sub = parser.add_subparsers(dest="command", required=True)

    compute = sub.add_parser("compute", parents=[common], help="BD-Rate and BD-Quality for one sequence")
    compute.add_argument("--pdf", type=Path, help="Rate pdf CSV (rate_lo_kbps,rate_hi_kbps,mass) for weighted BD-Quality")
    compute.add_argument("--pdf-spread", choices=[s.value for s in PdfSpread], default=PdfSpread.LOG.value,
                         help="How a bin's mass spreads over its rate range (default: log)")
    compute.add_argument("--extend-pdf", action="store_true",
                         help="Extend curves linearly to cover the pdf instead of failing")
    compute.add_argument("--roi", nargs=2, type=float, metavar=("LO", "HI"),
                         help="Restrict BD-Quality to this bitrate range (kbps)")
    compute.add_argument("--roi-quality", nargs=2, type=float, metavar=("LO", "HI"),
                         help="Restrict BD-Rate to this quality range (metric units)")
    compute.add_argument("--rate-only", action="store_true", help="Report BD-Rate without BD-Quality")
    compute.add_argument("--compare-methods", action="store_true", help="Also report the other fit method")

    sub.add_parser("diagnose", parents=[common], help="Lints for one sequence, both fit methods")
    sub.add_parser("batch", parents=[common], help="Every sequence holding both codecs, plus means")
    plot = sub.add_parser("plotdata", parents=[common], help="Sampled fitted curves with overlap and crossover markers")
    plot.add_argument("--samples", type=int, default=200, help="Samples per curve (default: 200)")
    return parser


def parse_config(argv: Sequence[str], environ: Optional[Dict[str, str]] = None) -> CliConfig:
    args = build_parser().parse_args(list(argv))
    if args.anchor == args.test:
        raise UsageError("--anchor and --test must name different codecs")

    lint_config = LintConfig.from_env(environ)
    overrides = {
        "low_overlap_threshold": args.low_overlap,
        "range_divergence_threshold": args.range_divergence,
        "ssim_span_threshold": args.ssim_span,
        "min_points": args.min_points,
        "method_disagreement_pp": args.method_disagreement,
    }
    lint_config = replace(lint_config, **{k: v for k, v in overrides.items() if v is not None})

    config = CliConfig(
        command=args.command,
        input=args.input,
        anchor=args.anchor,
        test=args.test,
        metrics=args.metric,
        method=FitMethod(args.method),
        mode=BdMode(args.mode),
        fmt=FORMAT_ALIASES[args.fmt],
        permissive=args.permissive,
        strict=args.strict,
        sequence=args.sequence,
        verbose=args.verbose,
        lint_config=lint_config,
    )
    if args.command == "compute":
        config.pdf = args.pdf
        config.pdf_spread = PdfSpread(args.pdf_spread)
        config.extend_pdf = args.extend_pdf
        config.rate_only = args.rate_only
        config.compare_methods = args.compare_methods
        config.roi = _check_range("--roi", args.roi, positive=True)
        config.roi_quality = _check_range("--roi-quality", args.roi_quality)
        if config.pdf is not None and config.rate_only:
            raise UsageError("--pdf weights BD-Quality and cannot be combined with --rate-only")
    if args.command == "plotdata":
        config.samples = args.samples
        if config.samples < 2:
            raise UsageError(f"--samples must be at least 2, got {config.samples}")
        if config.fmt == "markdown":
            raise UsageError("plotdata supports --format json or csv")
    return config


def _check_range(name: str, values: Optional[Sequence[float]], positive: bool = False) -> Optional[Tuple[float, float]]:
    if values is None:
        return None
    lo, hi = values
    if not lo < hi:
        raise UsageError(f"{name} needs LO < HI, got {lo} {hi}")
    if positive and lo <= 0:
        raise UsageError(f"{name} bounds must be positive, got {lo}")
    return lo, hi


def setup_logging(stream: TextIO, verbose: bool = False) -> None:
    """Install a single stderr-style handler on the root logger."""
    global _handler
    root = logging.getLogger()
    if _handler is not None:
        root.removeHandler(_handler)
    _handler = logging.StreamHandler(stream)
    fmt = "%(levelname)s: %(message)s"
    use_color = not os.environ.get("BD_DELTA_NO_COLOR") and getattr(stream, "isatty", lambda: False)()
    _handler.setFormatter(ColorFormatter(fmt) if use_color else logging.Formatter(fmt))
    root.addHandler(_handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def run(config: CliConfig, stdout: BinaryIO, stderr: TextIO) -> int:
    """Run one command; the report goes to stdout, everything else to stderr."""
    setup_logging(stderr, config.verbose)
    try:
        table = load_measurements(config.input)
        doc_or_plot = _COMMAND_HANDLERS[config.command](config, table)
    except ParseError as e:
        lines = ",".join(str(n) for n in e.lines)
        logger.error("%s%s: %s", e.source or config.input, f":{lines}" if lines else "", e.detail)
        return EXIT_ERROR
    except UsageError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except BdError as e:
        logger.error("%s", e)
        return EXIT_ERROR
    except OSError as e:
        logger.error("Cannot read input: %s", e)
        return EXIT_ERROR

    if isinstance(doc_or_plot, ReportDocument):
        stdout.write(emit_report(doc_or_plot, config.fmt))
        severities = _lint_severities(doc_or_plot)
    else:
        stdout.write(emit_plot_series(doc_or_plot, config.fmt))
        severities = []
    stdout.flush()

    if config.strict and any(s.rank >= Severity.WARN.rank for s in severities):
        logger.error("Lints at warning level or above with --strict")
        return EXIT_LINTS
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return run(config, sys.stdout.buffer, sys.stderr)


def _compute(config: CliConfig, table: MeasurementTable) -> ReportDocument:
    sequence = _pick_sequence(config, table)
    pdf = load_pdf(config.pdf, config.pdf_spread) if config.pdf else None
    methods = list(FitMethod) if config.compare_methods else [config.method]
    results: List[BdResult] = []
    for metric in _pick_metrics(config, table, sequence):
        anchor, test = _curves(config, table, sequence, metric)
        results.extend(_compare_pair(config, anchor, test, methods, pdf))
    return ReportDocument(results=[ReportEntry(sequence, r) for r in _lint_across_metrics(config, results)])


def _diagnose(config: CliConfig, table: MeasurementTable) -> ReportDocument:
    sequence = _pick_sequence(config, table)
    doc = ReportDocument()
    everything: List[BdResult] = []
    for metric in _pick_metrics(config, table, sequence):
        anchor, test = _curves(config, table, sequence, metric)
        results = _compare_pair(config, anchor, test, list(FitMethod), None, require_quality=False)
        report = results[0].diagnostics if results else run_lints(
            anchor, test, [], method=config.method, config=config.lint_config)
        doc.diagnostics.append(DiagnosticsEntry(sequence, anchor.label, test.label, metric.label, report))
        everything.extend(results)

    ranges, lints = lint_metric_ranges(everything, config.lint_config)
    if len(ranges) > 1:
        doc.diagnostics = [replace(e, report=e.report.with_metric_ranges(ranges, tuple(lints)))
                           for e in doc.diagnostics]
    return doc


def _batch(config: CliConfig, table: MeasurementTable) -> ReportDocument:
    sequences = [
        s for s in table.sequence_names
        if config.anchor in table.codecs(s) and config.test in table.codecs(s)
    ]
    if not sequences:
        raise UsageError(f"No sequence holds both '{config.anchor}' and '{config.test}'")
    logger.info("Batch over %d sequences", len(sequences))

    def one_sequence(sequence: str) -> List[ReportEntry]:
        results: List[BdResult] = []
        try:
            for metric in _pick_metrics(config, table, sequence):
                anchor, test = _curves(config, table, sequence, metric)
                results.extend(_compare_pair(config, anchor, test, [config.method], None))
        except BdError as e:
            logger.error("Sequence '%s': %s", sequence, e)
            raise
        return [ReportEntry(sequence, r) for r in _lint_across_metrics(config, results)]

    with ThreadPoolExecutor() as pool:
        per_sequence = list(pool.map(one_sequence, sequences))

    doc = ReportDocument(results=[e for entries in per_sequence for e in entries])
    groups: Dict[Tuple, List[BdResult]] = {}
    for entry in doc.sorted_results():
        r = entry.result
        groups.setdefault((r.metric.label, r.kind, r.method, r.mode), []).append(r)
    for (metric, *_), results in groups.items():
        doc.aggregates.append(AggregateEntry(metric, aggregate(results)))
    return doc


def _plotdata(config: CliConfig, table: MeasurementTable) -> List[PlotSeries]:
    sequence = _pick_sequence(config, table)
    labels = (config.anchor, config.test)
    series = []
    for metric in _pick_metrics(config, table, sequence):
        anchor, test = _curves(config, table, sequence, metric)
        fa, ft = fit_quality_of_rate(anchor, config.method), fit_quality_of_rate(test, config.method)
        series.append(emit_plot_data(fa, ft, compute_overlap(anchor, test, Axis.RATE), config.samples, labels,
                                     title=f"{sequence}/{metric.label}/quality_of_log_rate"))
        if anchor.is_strictly_increasing and test.is_strictly_increasing:
            fa, ft = fit_rate_of_quality(anchor, config.method), fit_rate_of_quality(test, config.method)
            series.append(emit_plot_data(fa, ft, compute_overlap(anchor, test, Axis.QUALITY), config.samples,
                                         labels, title=f"{sequence}/{metric.label}/log_rate_of_quality"))
    return series


_COMMAND_HANDLERS: Dict[str, Callable] = {
    "compute": _compute,
    "diagnose": _diagnose,
    "batch": _batch,
    "plotdata": _plotdata,
}


def _compare_pair(config: CliConfig, anchor: RdCurve, test: RdCurve, methods: Sequence[FitMethod],
                  pdf: Optional[RatePdf], require_quality: bool = True) -> List[BdResult]:
    """
    BD-Quality and BD-Rate for every usable method, sharing one diagnostics report.

    Without require_quality a BD-Quality that has no bitrate overlap is left
    out; with it the pair fails so BD-Rate is never reported alone by accident.
    """
    kinds = [] if config.rate_only else [BdKind.QUALITY]
    if anchor.is_strictly_increasing and test.is_strictly_increasing:
        kinds.append(BdKind.RATE)

    # a lone method is fitted anyway so TooFewPoints surfaces as a hard error
    usable = [m for m in methods if len(methods) == 1 or min(len(anchor), len(test)) >= m.min_points]
    for method in methods:
        if method not in usable:
            logger.info("Skipping %s fit for %s: too few points", method.value, anchor.metric)

    results: List[BdResult] = []
    for kind in kinds:
        try:
            results.extend(_bd_values(config, anchor, test, kind, usable, pdf))
        except NoOverlap as e:
            if kind is BdKind.RATE:
                raise
            if require_quality:
                raise ComputationError(
                    f"BD-Quality for {anchor.metric} cannot be computed: {e}; "
                    "pass --rate-only to report BD-Rate alone"
                ) from e
            logger.info("No BD-Quality for %s: %s", anchor.metric, e)
    report = run_lints(anchor, test, results, method=config.method, config=config.lint_config)
    return [r.with_diagnostics(report) for r in results]


def _bd_values(config: CliConfig, anchor: RdCurve, test: RdCurve, kind: BdKind,
               methods: Sequence[FitMethod], pdf: Optional[RatePdf]) -> List[BdResult]:
    if kind is BdKind.QUALITY and pdf is not None:
        return [bd_quality_weighted(anchor, test, m, pdf, extend=config.extend_pdf, diagnose=False)
                for m in methods]
    roi = config.roi if kind is BdKind.QUALITY else config.roi_quality
    if len(methods) > 1:
        comparison = compare_methods(anchor, test, kind, config.mode, roi=roi, diagnose=False)
        return [comparison.cubic, comparison.pchip]
    if kind is BdKind.QUALITY:
        return [bd_quality(anchor, test, methods[0], roi=roi, diagnose=False)]
    return [bd_rate_with_mode(anchor, test, methods[0], config.mode, roi=roi, diagnose=False)]


def _lint_across_metrics(config: CliConfig, results: Sequence[BdResult]) -> List[BdResult]:
    """Check the per-metric bitrate bands once every metric of a curve pair is in."""
    ranges, lints = lint_metric_ranges(results, config.lint_config)
    if len(ranges) < 2:
        return list(results)
    updated: Dict[int, DiagnosticsReport] = {}
    out = []
    for r in results:
        if r.diagnostics is None:
            out.append(r)
            continue
        key = id(r.diagnostics)
        if key not in updated:
            updated[key] = r.diagnostics.with_metric_ranges(ranges, tuple(lints))
        out.append(r.with_diagnostics(updated[key]))
    return out


def _pick_sequence(config: CliConfig, table: MeasurementTable) -> str:
    names = table.sequence_names
    if config.sequence is not None:
        if config.sequence not in names:
            raise UsageError(f"Sequence '{config.sequence}' not found (have: {', '.join(names) or 'none'})")
        return config.sequence
    if len(names) != 1:
        raise UsageError(f"Input holds {len(names)} sequences; choose one with --sequence")
    return names[0]


def _pick_metrics(config: CliConfig, table: MeasurementTable, sequence: str) -> List[MetricKind]:
    for codec in (config.anchor, config.test):
        if codec not in table.codecs(sequence):
            raise UsageError(f"Codec '{codec}' not found in sequence '{sequence}'")
    anchor_metrics = table.metrics(sequence, config.anchor)
    shared = [m for m in anchor_metrics if m in table.metrics(sequence, config.test)]
    if not config.metrics:
        return shared
    chosen = []
    for label in config.metrics:
        metric = next((m for m in shared if m == MetricKind.from_label(label)), None)
        if metric is None:
            raise UsageError(f"Metric '{label}' is not measured for both codecs in sequence '{sequence}'")
        chosen.append(metric)
    return chosen


def _curves(config: CliConfig, table: MeasurementTable, sequence: str, metric: MetricKind) -> Tuple[RdCurve, RdCurve]:
    return tuple(
        validate_curve(table.points(sequence, codec, metric), metric,
                       allow_non_monotone=config.permissive, label=codec)
        for codec in (config.anchor, config.test)
    )


def _lint_severities(doc: ReportDocument) -> List[Severity]:
    reports = [e.result.diagnostics for e in doc.results if e.result.diagnostics is not None]
    reports += [e.report for e in doc.diagnostics]
    return [lint.severity for report in reports for lint in report.lints]


if __name__ == "__main__":
    sys.exit(main())
