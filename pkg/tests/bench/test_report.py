import logging

import pytest

from src.bench.experiment import METRICS, ExperimentReport, RepRecord
from src.bench.report import (
    TABLE_COLUMNS,
    emit_records,
    emit_table,
    parse_table_csv,
    table_format_for,
)


def _report(config_id, pe_pairs, failures=0):
    records = [
        RepRecord(
            rep=i, mse_hat=0.01 * (i + 1), mse_S=0.02 * (i + 1), pe_full=1.0 + i,
            pe_sub=pe_sub, pe_ols=pe_ols, selected=(0, 3, 7), lambda_p=12.5, alpha_source="dantzig",
        )
        for i, (pe_sub, pe_ols) in enumerate(pe_pairs)
    ]
    records += [RepRecord(rep=len(records) + j, failure="PlmError: singular") for j in range(failures)]
    return ExperimentReport(config_id=config_id, reps=len(records), records=records)


@pytest.fixture
def reports():
    return [
        _report("I-0.5", [(1.2, 1.5), (1.7, 1.4), (1.1, 1.3)]),
        _report("II-0.9", [(0.4, 0.45), (0.5, 0.42)], failures=1),
    ]


class TestEmitTable:
    def test_empty_is_header_only(self):
        assert emit_table([]) == ",".join(TABLE_COLUMNS) + "\n"

    def test_csv_matches_aggregates(self, reports):
        frame = parse_table_csv(emit_table(reports))
        assert list(frame["id"]) == ["I-0.5", "II-0.9"]
        for row, report in zip(frame.itertuples(index=False), reports):
            for name, value in report.aggregates().items():
                assert getattr(row, name) == pytest.approx(round(value, 4), abs=1e-12)
            assert row.tau == report.tau
            assert row.reps == report.reps
            assert row.failures == report.failures

    def test_four_decimals(self, reports):
        line = emit_table(reports).splitlines()[1]
        assert line.startswith("I-0.5,0.0200,0.0100,")

    def test_markdown_one_row_per_report(self, reports):
        lines = emit_table(reports, "markdown").strip().splitlines()
        assert len(lines) == 2 + len(reports)
        assert lines[0].startswith("| id | MSE(theta_hat)")
        assert "| 2/3 |" in lines[2] + " |"
        assert "0.0200(0.0100)" in lines[2]

    def test_reports_without_success_are_left_out(self, reports, caplog):
        dead = _report("dead", [], failures=2)
        with caplog.at_level(logging.WARNING, logger="src.bench.report"):
            frame = parse_table_csv(emit_table([*reports, dead]))
        assert "dead" not in set(frame["id"])
        assert "no successful repetitions" in caplog.text

    def test_unknown_format(self, reports):
        with pytest.raises(ValueError, match="format"):
            emit_table(reports, "latex")


class TestEmitRecords:
    def test_one_line_per_repetition(self, reports):
        lines = emit_records(reports).strip().splitlines()
        assert lines[0] == "id,rep,failure," + ",".join(METRICS) + ",lambda_p,alpha_source,selected"
        assert len(lines) == 1 + 3 + 3
        assert lines[1].startswith("I-0.5,0,,")
        assert lines[1].endswith(",12.5,dantzig,1 4 8")

    def test_failure_row(self, reports):
        last = emit_records(reports).strip().splitlines()[-1]
        assert last.startswith("II-0.9,2,PlmError: singular,")
        assert last.endswith(",,")


class TestHelpers:
    def test_parse_rejects_other_columns(self):
        with pytest.raises(ValueError, match="columns"):
            parse_table_csv("a,b\n1,2\n")

    @pytest.mark.parametrize("path,fmt", [
        ("table.md", "markdown"),
        ("TABLE.MARKDOWN", "markdown"),
        ("table.csv", "csv"),
        ("table", "csv"),
    ])
    def test_format_from_suffix(self, path, fmt):
        assert table_format_for(path) == fmt
