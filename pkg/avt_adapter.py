"""Convert a wide per-encode score table into the long measurement CSV.

Score dumps such as the AVT-VQDB-UHD-1 per-stimulus tables have one row
per encode and one column per metric. This adapter melts them into
sequence,codec,metric,rate_kbps,quality rows.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from data_loader import FLOAT_FORMAT, MEASUREMENT_COLUMNS
from errors import UsageError

logger = logging.getLogger(__name__)

DEFAULT_METRICS = ["psnr", "ssim", "vmaf", "mos"]


def convert_wide_scores(df: pd.DataFrame, sequence_column: str = "video_name", codec_column: str = "codec",
                        rate_column: str = "bitrate", metric_columns: Optional[Sequence[str]] = None,
                        rate_scale: float = 1.0) -> pd.DataFrame:
    """
    Melt metric columns into long rows.

    rate_scale converts the rate column to kbps (1000 for Mbps input).
    Empty metric cells are dropped; repeated (sequence, codec, metric, rate)
    measurements are averaged.
    """
    metric_columns = list(metric_columns or [c for c in DEFAULT_METRICS if c in df.columns])
    missing = [c for c in [sequence_column, codec_column, rate_column, *metric_columns] if c not in df.columns]
    if missing:
        raise UsageError(f"Missing columns: {', '.join(missing)} (have: {', '.join(map(str, df.columns))})")
    if not metric_columns:
        raise UsageError("No metric columns to convert")

    long = df.melt(
        id_vars=[sequence_column, codec_column, rate_column],
        value_vars=metric_columns,
        var_name="metric",
        value_name="quality",
    ).rename(columns={sequence_column: "sequence", codec_column: "codec", rate_column: "rate_kbps"})

    long["rate_kbps"] = pd.to_numeric(long["rate_kbps"], errors="coerce") * rate_scale
    long["quality"] = pd.to_numeric(long["quality"], errors="coerce")
    dropped = long[["rate_kbps", "quality"]].isna().any(axis=1)
    if dropped.any():
        logger.warning("Dropping %d rows with empty or non-numeric values", int(dropped.sum()))
    long = long[~dropped].copy()
    long["metric"] = long["metric"].str.upper()

    keys = ["sequence", "codec", "metric", "rate_kbps"]
    repeated = long.duplicated(subset=keys).sum()
    if repeated:
        logger.warning("Averaging %d repeated measurements", int(repeated))
    long = long.groupby(keys, sort=False, as_index=False)["quality"].mean()
    return long.sort_values(keys, kind="stable")[MEASUREMENT_COLUMNS].reset_index(drop=True)


def convert_file(input_file: Path, output_file: Path, **kwargs) -> int:
    df = pd.read_csv(input_file)
    long = convert_wide_scores(df, **kwargs)
    long.to_csv(output_file, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %d measurements for %d sequences to %s",
                len(long), long["sequence"].nunique(), output_file)
    return len(long)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Convert a wide score table to the long measurement CSV")
    parser.add_argument("input", type=Path, help="Wide CSV, one row per encode")
    parser.add_argument("output", type=Path, help="Long CSV to write")
    parser.add_argument("--sequence-column", default="video_name")
    parser.add_argument("--codec-column", default="codec")
    parser.add_argument("--rate-column", default="bitrate")
    parser.add_argument("--metric", dest="metrics", action="append",
                        help=f"Metric column (repeatable, default: those of {DEFAULT_METRICS} present)")
    parser.add_argument("--rate-scale", type=float, default=1.0, help="Multiplier to kbps, e.g. 1000 for Mbps")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    try:
        convert_file(args.input, args.output, sequence_column=args.sequence_column,
                     codec_column=args.codec_column, rate_column=args.rate_column,
                     metric_columns=args.metrics, rate_scale=args.rate_scale)
    except UsageError as e:
        logger.error("%s", e)
        return 64
    return 0


if __name__ == "__main__":
    sys.exit(main())
