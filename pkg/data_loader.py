import io
import logging
import math
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Tuple, Union

import numpy as np
import pandas as pd

from errors import (
    EmptyPdf,
    InvalidPdfBin,
    MalformedRow,
    NegativeMass,
    NonNumericField,
    OverlappingBins,
    ParseError,
    UnknownHeader,
)
from models import MeasurementTable, MetricKind, PdfBin, PdfSpread, RatePdf, RdPoint

logger = logging.getLogger(__name__)

MEASUREMENT_COLUMNS = ["sequence", "codec", "metric", "rate_kbps", "quality"]
PDF_COLUMNS = ["rate_lo_kbps", "rate_hi_kbps", "mass"]
FLOAT_FORMAT = "%.12g"


def parse_csv(data: bytes) -> MeasurementTable:
    """
    Parse the long measurement CSV into a MeasurementTable.

    Lines starting with '#' and blank lines are skipped; reported line
    numbers always refer to the original input. Points are sorted by rate
    within each (sequence, codec, metric) group, quality travels with its rate.
    """
    df = _read_table(data, MEASUREMENT_COLUMNS)
    for col in ("sequence", "codec", "metric"):
        df[col] = df[col].str.strip()
        empty = df[df[col] == ""]
        if not empty.empty:
            raise MalformedRow(f"empty '{col}' field", [int(empty["line"].iloc[0])])
    df["rate_kbps"] = _to_numbers(df, "rate_kbps")
    df["quality"] = _to_numbers(df, "quality")

    kinds = {label: MetricKind.from_label(label) for label in df["metric"].unique()}
    df["metric_key"] = df["metric"].map(lambda label: kinds[label].label)

    keys = ["sequence", "codec", "metric_key", "rate_kbps"]
    duplicated = df[df.duplicated(subset=keys, keep=False)]
    if not duplicated.empty:
        first = duplicated.iloc[0]
        same = duplicated[(duplicated[keys] == first[keys]).all(axis=1)]
        raise MalformedRow(
            f"duplicate measurement for {first['sequence']}/{first['codec']}/{first['metric_key']} "
            f"at {first['rate_kbps']:g} kbps",
            same["line"].astype(int).tolist(),
        )

    table = MeasurementTable()
    for (sequence, codec, _), group in df.groupby(["sequence", "codec", "metric_key"], sort=False):
        metric = kinds[group["metric"].iloc[0]]
        ordered = group.sort_values("rate_kbps", kind="stable")
        points = [RdPoint(float(r), float(q)) for r, q in zip(ordered["rate_kbps"], ordered["quality"])]
        table.sequences.setdefault(sequence, {}).setdefault(codec, {})[metric] = points
    return table


def parse_pdf_csv(data: bytes, spread: PdfSpread = PdfSpread.LOG) -> RatePdf:
    """Parse a rate pdf and normalize it so the masses sum to 1."""
    df = _read_table(data, PDF_COLUMNS)
    if df.empty:
        raise EmptyPdf("rate pdf has no bins")
    for col in PDF_COLUMNS:
        df[col] = _to_numbers(df, col)

    bins: List[PdfBin] = []
    previous = None
    for row in df.itertuples(index=False):
        line = int(row.line)
        if row.rate_lo_kbps < 0 or row.rate_lo_kbps >= row.rate_hi_kbps:
            raise InvalidPdfBin(f"need 0 <= rate_lo < rate_hi, got [{row.rate_lo_kbps:g}, {row.rate_hi_kbps:g}]", [line])
        if row.mass < 0:
            raise NegativeMass(f"mass must be non-negative, got {row.mass:g}", [line])
        if previous is not None and row.rate_lo_kbps < previous[1].rate_hi:
            raise OverlappingBins(
                f"bin [{row.rate_lo_kbps:g}, {row.rate_hi_kbps:g}] overlaps or precedes "
                f"[{previous[1].rate_lo:g}, {previous[1].rate_hi:g}]",
                [previous[0], line],
            )
        b = PdfBin(float(row.rate_lo_kbps), float(row.rate_hi_kbps), float(row.mass))
        bins.append(b)
        previous = (line, b)

    if math.fsum(b.mass for b in bins) <= 0:
        raise EmptyPdf("rate pdf has zero total mass")
    return RatePdf(bins=tuple(bins), spread=spread).normalize()


def table_to_csv(table: MeasurementTable) -> bytes:
    """Write a MeasurementTable back out in the long CSV format."""
    rows = [
        (sequence, codec, metric.label, p.rate, p.quality)
        for sequence, codecs in table.sequences.items()
        for codec, metrics in codecs.items()
        for metric, points in metrics.items()
        for p in points
    ]
    df = pd.DataFrame(rows, columns=MEASUREMENT_COLUMNS)
    return df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n").encode("utf-8")


def load_measurements(path: Union[str, Path]) -> MeasurementTable:
    with _source(path):
        table = parse_csv(Path(path).read_bytes())
    log_table_statistics(table, path)
    return table


def load_pdf(path: Union[str, Path], spread: PdfSpread = PdfSpread.LOG) -> RatePdf:
    with _source(path):
        pdf = parse_pdf_csv(Path(path).read_bytes(), spread)
    logger.info("Loaded rate pdf from %s: %d bins over %g-%g kbps (raw mass %g)",
                path, len(pdf.bins), pdf.bins[0].rate_lo, pdf.bins[-1].rate_hi, pdf.raw_total)
    return pdf


def log_table_statistics(table: MeasurementTable, source: Union[str, Path] = "<input>") -> None:
    """Log a summary of the loaded measurements."""
    codecs = sorted({c for s in table.sequence_names for c in table.codecs(s)})
    metrics = sorted({m.label for s in table.sequence_names for c in table.codecs(s) for m in table.metrics(s, c)})
    logger.info("Loaded %d points from %s", table.num_points(), source)
    logger.info("Sequences: %d", len(table.sequence_names))
    logger.info("Codecs: %s", ", ".join(codecs) or "-")
    logger.info("Metrics: %s", ", ".join(metrics) or "-")


@contextmanager
def _source(path: Union[str, Path]) -> Iterator[None]:
    """Tag parse errors raised inside the block with the file they came from."""
    try:
        yield
    except ParseError as e:
        e.source = str(path)
        raise


def _read_table(data: bytes, columns: List[str]) -> pd.DataFrame:
    """Read a headed CSV as strings, with a 'line' column of source line numbers."""
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise ParseError(f"input is not valid UTF-8: {e}") from e

    kept: List[Tuple[int, str]] = [
        (n, line) for n, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not kept:
        raise UnknownHeader(f"missing header, expected '{','.join(columns)}'")

    header_line, header = kept[0]
    found = [h.strip().lower() for h in header.split(",")]
    if found != columns:
        raise UnknownHeader(f"expected header '{','.join(columns)}', got '{header.strip()}'", [header_line])

    for n, line in kept[1:]:
        if len(line.split(",")) != len(columns):
            raise MalformedRow(f"expected {len(columns)} fields, got {len(line.split(','))}", [n])

    body = "\n".join(line for _, line in kept)
    df = pd.read_csv(io.StringIO(body), dtype=str, keep_default_na=False, skipinitialspace=True)
    df.columns = columns
    df["line"] = [n for n, _ in kept[1:]]
    return df


def _to_numbers(df: pd.DataFrame, col: str) -> pd.Series:
    values = pd.to_numeric(df[col].str.strip(), errors="coerce")
    bad = pd.Series(~np.isfinite(values.to_numpy(dtype=float)), index=df.index)
    if bad.any():
        row = df[bad].iloc[0]
        raise NonNumericField(int(row["line"]), col, row[col])
    return values.astype(float)
