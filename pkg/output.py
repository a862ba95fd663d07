"""Report and plot-data emission.

Every emitter returns bytes and is deterministic: the same document
always produces the same output.
"""
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from diagnostics import find_crossovers
from errors import UsageError
from interp import FittedCurve, sample
from models import (
    AggregateResult,
    BdKind,
    BdResult,
    DiagnosticsReport,
    FitMethod,
    OverlapInterval,
)

REPORT_VERSION = 1
DEFAULT_PLOT_SAMPLES = 200
FORMATS = ("json", "markdown", "csv")

RESULT_COLUMNS = [
    "sequence", "anchor", "test", "metric", "kind", "method", "mode", "value", "display",
    "axis", "interval_lo", "interval_hi", "extrapolated", "lints",
]
LINT_COLUMNS = ["sequence", "anchor", "test", "metric", "code", "severity", "message"]


@dataclass(frozen=True)
class ReportEntry:
    sequence: str
    result: BdResult

    @property
    def sort_key(self) -> Tuple:
        r = self.result
        return (self.sequence, r.metric.label, list(BdKind).index(r.kind), list(FitMethod).index(r.method),
                r.mode.value, r.anchor_label, r.test_label)


@dataclass(frozen=True)
class DiagnosticsEntry:
    sequence: str
    anchor: str
    test: str
    metric: str
    report: DiagnosticsReport


@dataclass(frozen=True)
class AggregateEntry:
    metric: str
    aggregate: AggregateResult


@dataclass
class PlotSeries:
    """Sampled fitted curves plus the markers a plot needs."""
    orientation: str
    # label -> (xs, ys)
    samples: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    # label -> ((x, y), ...)
    knots: Dict[str, Tuple[Tuple[float, float], ...]] = field(default_factory=dict)
    overlap: Optional[Tuple[float, float]] = None
    crossovers: Tuple[float, ...] = ()
    title: str = ""


@dataclass
class ReportDocument:
    results: List[ReportEntry] = field(default_factory=list)
    aggregates: List[AggregateEntry] = field(default_factory=list)
    diagnostics: List[DiagnosticsEntry] = field(default_factory=list)
    plot_series: List[PlotSeries] = field(default_factory=list)

    def sorted_results(self) -> List[ReportEntry]:
        return sorted(self.results, key=lambda e: e.sort_key)

    def sorted_aggregates(self) -> List[AggregateEntry]:
        return sorted(self.aggregates, key=lambda e: (e.metric, list(BdKind).index(e.aggregate.kind),
                                                      list(FitMethod).index(e.aggregate.method),
                                                      e.aggregate.mode.value))

    def sorted_diagnostics(self) -> List[DiagnosticsEntry]:
        return sorted(self.diagnostics, key=lambda e: (e.sequence, e.metric, e.anchor, e.test))


def emit_report(doc: ReportDocument, fmt: str = "json") -> bytes:
    if fmt == "json":
        return _emit_json(doc)
    if fmt in ("markdown", "md"):
        return _emit_markdown(doc)
    if fmt == "csv":
        return _emit_csv(doc)
    raise UsageError(f"Unknown report format '{fmt}', expected one of {', '.join(FORMATS)}")


def emit_plot_data(a: FittedCurve, b: FittedCurve, interval: OverlapInterval,
                   n: int = DEFAULT_PLOT_SAMPLES, labels: Tuple[str, str] = ("anchor", "test"),
                   title: str = "") -> PlotSeries:
    """
    Sample both fitted curves n times each across their domains (tails
    included) and collect knots, overlap bounds and crossover positions.
    """
    if n < 2:
        raise UsageError(f"Plot data needs at least 2 samples, got {n}")
    series = PlotSeries(orientation=a.orientation.value, title=title)
    for label, f in zip(labels, (a, b)):
        series.samples[label] = sample(f, n)
        series.knots[label] = f.data_points
    if not interval.is_empty:
        series.overlap = (interval.lo, interval.hi)
        series.crossovers = tuple(find_crossovers(a, b, interval))
    return series


def emit_plot_series(series: Sequence[PlotSeries], fmt: str = "csv") -> bytes:
    """Long-format CSV (one row per sample or marker) or JSON columns."""
    if fmt == "json":
        payload = {"bd_plot_version": REPORT_VERSION, "series": [_plot_to_dict(s) for s in series]}
        return _dump_json(payload)
    if fmt != "csv":
        raise UsageError(f"Unknown plot format '{fmt}', expected csv or json")

    rows = []
    for s in series:
        for label, (xs, ys) in s.samples.items():
            rows.extend((s.title, "sample", label, float(x), float(y)) for x, y in zip(xs, ys))
        for label, points in s.knots.items():
            rows.extend((s.title, "knot", label, x, y) for x, y in points)
        if s.overlap is not None:
            rows.append((s.title, "overlap_lo", "", s.overlap[0], None))
            rows.append((s.title, "overlap_hi", "", s.overlap[1], None))
        rows.extend((s.title, "crossover", "", x, None) for x in s.crossovers)
    df = pd.DataFrame(rows, columns=["series", "kind", "curve", "x", "y"])
    return df.to_csv(index=False, lineterminator="\n").encode("utf-8")


def _emit_json(doc: ReportDocument) -> bytes:
    payload = {
        "bd_report_version": REPORT_VERSION,
        "results": [_result_to_dict(e) for e in doc.sorted_results()],
        "aggregates": [_aggregate_to_dict(e) for e in doc.sorted_aggregates()],
        "diagnostics": [
            {"sequence": e.sequence, "anchor": e.anchor, "test": e.test, "metric": e.metric,
             **_diagnostics_to_dict(e.report)}
            for e in doc.sorted_diagnostics()
        ],
        "plot_series": [_plot_to_dict(s) for s in doc.plot_series],
    }
    return _dump_json(payload)


def _emit_markdown(doc: ReportDocument) -> bytes:
    lines = ["# BD report", ""]
    results = doc.sorted_results()
    aggregates = {
        (e.metric, e.aggregate.kind, e.aggregate.method, e.aggregate.mode): e.aggregate
        for e in doc.aggregates
    }

    metrics = sorted({e.result.metric.label for e in results})
    if not metrics:
        lines += ["_No results._", ""]
    for metric in metrics:
        entries = [e for e in results if e.result.metric.label == metric]
        sequences = sorted({e.sequence for e in entries})
        rows: Dict[Tuple, Dict[str, str]] = {}
        for e in entries:
            r = e.result
            row = rows.setdefault((r.anchor_label, r.test_label, r.kind, r.method, r.mode), {})
            row[e.sequence] = r.display

        has_mean = any((metric, k, m, mode) in aggregates for (_, _, k, m, mode) in rows)
        header = ["Anchor", "Test", "Kind", "Method", "Mode"] + sequences + (["Mean"] if has_mean else [])
        lines += [f"## {metric}", "", _md_row(header), _md_row(["---"] * len(header))]
        for (anchor, test, kind, method, mode), cells in rows.items():
            row = [anchor, test, f"BD-{kind.value.capitalize()}", method.value, mode.value]
            row += [cells.get(s, "-") for s in sequences]
            if has_mean:
                agg = aggregates.get((metric, kind, method, mode))
                row.append(_format_aggregate(agg) if agg else "-")
            lines.append(_md_row(row))
        lines.append("")

    lint_lines = []
    seen = set()
    for sequence, report in _all_reports(doc):
        for lint in report.lints:
            key = (sequence, lint.code, lint.message)
            if key not in seen:
                seen.add(key)
                lint_lines.append(f"- `{sequence}` **{lint.code}** ({lint.severity.value}): {lint.message}")
    if lint_lines:
        lines += ["## Lints", ""] + lint_lines + [""]
    return "\n".join(lines).encode("utf-8")


def _emit_csv(doc: ReportDocument) -> bytes:
    if doc.diagnostics and not doc.results:
        rows = [
            (e.sequence, e.anchor, e.test, e.metric, lint.code, lint.severity.value, lint.message)
            for e in doc.sorted_diagnostics()
            for lint in e.report.lints
        ]
        df = pd.DataFrame(rows, columns=LINT_COLUMNS)
    else:
        rows = []
        for e in doc.sorted_results():
            r = e.result
            codes = ";".join(r.diagnostics.codes()) if r.diagnostics else ""
            rows.append((e.sequence, r.anchor_label, r.test_label, r.metric.label, r.kind.value, r.method.value,
                         r.mode.value, r.value, r.display, r.interval_used.axis.value, r.interval_used.lo,
                         r.interval_used.hi, r.extrapolated.value, codes))
        df = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    return df.to_csv(index=False, lineterminator="\n").encode("utf-8")


def _all_reports(doc: ReportDocument):
    for e in doc.sorted_results():
        if e.result.diagnostics is not None:
            yield e.sequence, e.result.diagnostics
    for e in doc.sorted_diagnostics():
        yield e.sequence, e.report


def _md_row(cells: Sequence[str]) -> str:
    return "| " + " | ".join(cells) + " |"


def _format_aggregate(agg: AggregateResult) -> str:
    if agg.kind is BdKind.RATE:
        return f"{agg.mean:.1f}%"
    return f"{agg.mean:.2f}"


def _interval_to_dict(interval: OverlapInterval) -> Dict[str, Any]:
    return {"axis": interval.axis.value, "lo": interval.lo, "hi": interval.hi}


def _result_to_dict(entry: ReportEntry) -> Dict[str, Any]:
    r = entry.result
    return {
        "sequence": entry.sequence,
        "anchor": r.anchor_label,
        "test": r.test_label,
        "metric": r.metric.label,
        "kind": r.kind.value,
        "method": r.method.value,
        "mode": r.mode.value,
        "value": r.value,
        "display": r.display,
        "interval_used": _interval_to_dict(r.interval_used),
        "extrapolated": r.extrapolated.value,
        "diagnostics": _diagnostics_to_dict(r.diagnostics) if r.diagnostics else None,
    }


def _aggregate_to_dict(entry: AggregateEntry) -> Dict[str, Any]:
    agg = entry.aggregate
    return {
        "metric": entry.metric,
        "kind": agg.kind.value,
        "method": agg.method.value,
        "mode": agg.mode.value,
        "mean": agg.mean,
        "display": _format_aggregate(agg),
        "min": agg.minimum,
        "max": agg.maximum,
        "count": agg.count,
    }


def _diagnostics_to_dict(report: DiagnosticsReport) -> Dict[str, Any]:
    return {
        "crossovers_log10_kbps": list(report.crossovers),
        "crossovers_kbps": list(report.crossover_rates_kbps),
        "tangents_log10_kbps": list(report.tangents),
        "overlap_fraction_rate": report.overlap_fraction_rate,
        "overlap_fraction_quality": report.overlap_fraction_quality,
        "monotone_violations": [[label, index] for label, index in report.monotone_violations],
        "per_metric_ranges_kbps": {
            metric.label: list(interval.to_kbps())
            for metric, interval in sorted(report.per_metric_ranges.items(), key=lambda item: item[0].label)
        },
        "lints": [
            {"code": lint.code, "severity": lint.severity.value, "message": lint.message}
            for lint in report.lints
        ],
    }


def _plot_to_dict(series: PlotSeries) -> Dict[str, Any]:
    return {
        "title": series.title,
        "orientation": series.orientation,
        "samples": {
            label: {"x": [float(x) for x in xs], "y": [float(y) for y in ys]}
            for label, (xs, ys) in series.samples.items()
        },
        "knots": {label: [list(p) for p in points] for label, points in series.knots.items()},
        "overlap": list(series.overlap) if series.overlap is not None else None,
        "crossovers": list(series.crossovers),
    }


def _dump_json(payload: Dict[str, Any]) -> bytes:
    return (json.dumps(payload, indent=2, allow_nan=False) + "\n").encode("utf-8")
