import logging

import pytest

from data_loader import load_measurements, load_pdf, parse_csv, parse_pdf_csv, table_to_csv
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
from models import PSNR, VMAF, MetricName, PdfSpread, RdPoint

HEADER = "sequence,codec,metric,rate_kbps,quality\n"


def test_parse_two_curves(measurement_csv):
    table = parse_csv(measurement_csv)
    assert table.sequence_names == ["foreman"]
    assert table.codecs("foreman") == ["x264", "x265"]
    assert table.metrics("foreman", "x264") == [PSNR]
    assert len(table.points("foreman", "x265", PSNR)) == 4
    assert table.num_points() == 8


def test_rows_sorted_by_rate_within_group():
    data = HEADER + "s,a,PSNR,400,35\ns,a,PSNR,100,30\ns,a,PSNR,200,33\n"
    points = parse_csv(data.encode()).points("s", "a", PSNR)
    assert points == [RdPoint(100.0, 30.0), RdPoint(200.0, 33.0), RdPoint(400.0, 35.0)]


def test_quality_order_is_never_altered():
    """Sorting moves whole rows, so a quality drop stays a quality drop"""
    data = HEADER + "s,a,MOS,400,3.0\ns,a,MOS,200,3.5\ns,a,MOS,100,2.0\n"
    table = parse_csv(data.encode())
    metric = table.metrics("s", "a")[0]
    assert [p.quality for p in table.points("s", "a", metric)] == [2.0, 3.5, 3.0]


def test_metric_names_are_case_insensitive():
    data = HEADER + "s,a,vmaf,100,50\ns,a,Vmaf,200,60\ns,a,butteraugli,100,5\n"
    table = parse_csv(data.encode())
    metrics = table.metrics("s", "a")
    assert metrics[0] == VMAF
    assert len(table.points("s", "a", VMAF)) == 2
    assert metrics[1].name is MetricName.OTHER
    assert metrics[1].label == "butteraugli"


def test_non_numeric_rate_reports_source_line():
    data = HEADER + "# comment\n\ns,a,PSNR,100,30\ns,a,PSNR,abc,31\n"
    with pytest.raises(NonNumericField) as exc:
        parse_csv(data.encode())
    assert exc.value.lines == (5,)
    assert exc.value.field == "rate_kbps"
    assert exc.value.value == "abc"
    assert str(exc.value).startswith("line 5:")


def test_duplicate_rows_cite_both_lines():
    data = HEADER + "s,a,PSNR,100,30\ns,a,PSNR,200,31\ns,a,psnr,100,30.5\n"
    with pytest.raises(MalformedRow) as exc:
        parse_csv(data.encode())
    assert exc.value.lines == (2, 4)


def test_wrong_field_count():
    with pytest.raises(MalformedRow) as exc:
        parse_csv((HEADER + "s,a,PSNR,100\n").encode())
    assert exc.value.lines == (2,)


def test_unknown_header():
    with pytest.raises(UnknownHeader):
        parse_csv(b"seq,codec,metric,rate,quality\ns,a,PSNR,100,30\n")
    with pytest.raises(UnknownHeader):
        parse_csv(b"# only a comment\n")


def test_invalid_utf8():
    with pytest.raises(ParseError):
        parse_csv(HEADER.encode() + b"s,\xff,PSNR,100,30\n")


def test_header_only_gives_empty_table():
    table = parse_csv(HEADER.encode())
    assert table.sequence_names == []
    assert table_to_csv(table) == HEADER.encode()


def test_csv_round_trip(measurement_csv):
    table = parse_csv(measurement_csv)
    written = table_to_csv(table)
    again = parse_csv(written)
    assert again.sequences == table.sequences
    assert table_to_csv(again) == written


def test_round_trip_keeps_twelve_digits():
    data = HEADER + "s,a,PSNR,1234.56789012,35.1234567891\ns,a,PSNR,2000,36\n"
    written = table_to_csv(parse_csv(data.encode())).decode()
    assert "1234.56789012" in written
    assert "35.1234567891" in written


def test_parse_pdf_normalizes():
    pdf = parse_pdf_csv(b"rate_lo_kbps,rate_hi_kbps,mass\n0,1000,2\n1000,2000,2\n")
    assert [b.mass for b in pdf.bins] == [0.5, 0.5]
    assert pdf.normalized
    assert pdf.raw_total == 4.0
    assert pdf.spread is PdfSpread.LOG


def test_parse_pdf_is_idempotent():
    pdf = parse_pdf_csv(b"rate_lo_kbps,rate_hi_kbps,mass\n0,1000,0.5\n1000,2000,0.5\n")
    assert pdf.total_mass == pytest.approx(1.0, abs=1e-12)
    assert pdf.normalize() is pdf


def test_overlapping_bins():
    with pytest.raises(OverlappingBins) as exc:
        parse_pdf_csv(b"rate_lo_kbps,rate_hi_kbps,mass\n0,1000,1\n500,1500,1\n")
    assert exc.value.lines == (2, 3)


def test_negative_mass():
    with pytest.raises(NegativeMass):
        parse_pdf_csv(b"rate_lo_kbps,rate_hi_kbps,mass\n0,1000,-1\n")


def test_inverted_bin():
    with pytest.raises(InvalidPdfBin):
        parse_pdf_csv(b"rate_lo_kbps,rate_hi_kbps,mass\n1000,500,1\n")


@pytest.mark.parametrize("body", [b"", b"0,1000,0\n"])
def test_empty_pdf(body):
    with pytest.raises(EmptyPdf):
        parse_pdf_csv(b"rate_lo_kbps,rate_hi_kbps,mass\n" + body)


def test_load_from_files(tmp_path, measurement_csv, caplog):
    path = tmp_path / "rd.csv"
    path.write_bytes(measurement_csv)
    pdf_path = tmp_path / "pdf.csv"
    pdf_path.write_bytes(b"rate_lo_kbps,rate_hi_kbps,mass\n100,400,1\n400,800,3\n")

    with caplog.at_level(logging.INFO):
        table = load_measurements(path)
        pdf = load_pdf(pdf_path, PdfSpread.LINEAR)
    assert table.num_points() == 8
    assert [b.mass for b in pdf.bins] == [0.25, 0.75]
    assert pdf.spread is PdfSpread.LINEAR
    assert "Loaded 8 points" in caplog.text


def test_load_errors_carry_their_file(tmp_path):
    path = tmp_path / "rd.csv"
    path.write_text(HEADER + "s,ref,PSNR,100,30\ns,ref,PSNR,abc,31\n")
    with pytest.raises(NonNumericField) as exc:
        load_measurements(path)
    assert exc.value.source == str(path)
    assert exc.value.lines == (3,)

    pdf_path = tmp_path / "pdf.csv"
    pdf_path.write_text("rate_lo_kbps,rate_hi_kbps,mass\n100,500,1\n300,700,1\n")
    with pytest.raises(OverlappingBins) as exc:
        load_pdf(pdf_path)
    assert exc.value.source == str(pdf_path)
    assert exc.value.lines == (2, 3)


def test_parsing_bytes_leaves_source_unset():
    with pytest.raises(ParseError) as exc:
        parse_pdf_csv(b"rate_lo_kbps,rate_hi_kbps,mass\n100,50,1\n")
    assert exc.value.source is None
