"""Table and per-repetition output of experiment reports (CSV or markdown)."""
from __future__ import annotations

import io
import logging
from collections.abc import Sequence

import pandas as pd

from src.bench.experiment import METRICS, ExperimentReport

logger = logging.getLogger(__name__)

TABLE_COLUMNS = (
    ["id"]
    + [name for metric in METRICS for name in (metric, f"{metric}_std")]
    + ["tau", "reps", "failures"]
)

RECORD_COLUMNS = ["rep", "failure", *METRICS, "lambda_p", "alpha_source", "selected"]

_MARKDOWN_HEADERS = {
    "mse_hat": "MSE(theta_hat)",
    "mse_S": "MSE(theta_tilde_S)",
    "pe_full": "PE(Y_hat)",
    "pe_sub": "PE(Y_hat_S)",
    "pe_ols": "PE(Y_tilde_S)",
}

FORMATS = ("csv", "markdown")


def table_frame(reports: Sequence[ExperimentReport]) -> pd.DataFrame:
    """One row per report with at least one successful repetition."""
    rows = []
    for report in reports:
        if not report.successes:
            logger.warning("%s has no successful repetitions; left out of the table", report.config_id)
            continue
        row = {"id": report.config_id, **report.aggregates()}
        row.update(tau=report.tau, reps=report.reps, failures=report.failures)
        rows.append(row)
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def _markdown(frame: pd.DataFrame) -> str:
    headers = ["id"] + [_MARKDOWN_HEADERS[m] for m in METRICS] + ["tau"]
    lines = [
        "| " + " | ".join(headers) + " |",
        "|" + "|".join("---" for _ in headers) + "|",
    ]
    for row in frame.itertuples(index=False):
        cells = [str(row.id)]
        for metric in METRICS:
            cells.append(f"{getattr(row, metric):.4f}({getattr(row, metric + '_std'):.4f})")
        cells.append(f"{row.tau}/{row.reps}")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_table(reports: Sequence[ExperimentReport], fmt: str = "csv") -> str:
    """Render reports as the summary table; numbers carry 4 decimals.

    Args:
        reports: Experiment reports, one table row each.
        fmt: ``csv`` or ``markdown``.

    Returns:
        The table text (header only when no report has successful reps).
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    frame = table_frame(reports)
    if fmt == "markdown":
        return _markdown(frame)
    return frame.to_csv(index=False, float_format="%.4f", lineterminator="\n")


def emit_records(reports: Sequence[ExperimentReport]) -> str:
    """Per-repetition CSV; selected covariates are 1-based and space separated."""
    rows = []
    for report in reports:
        for r in report.records:
            rows.append({
                "id": report.config_id,
                "rep": r.rep,
                "failure": r.failure or "",
                **{metric: getattr(r, metric) for metric in METRICS},
                "lambda_p": r.lambda_p,
                "alpha_source": r.alpha_source or "",
                "selected": " ".join(str(j + 1) for j in r.selected),
            })
    frame = pd.DataFrame(rows, columns=["id", *RECORD_COLUMNS])
    return frame.to_csv(index=False, float_format="%.10g", lineterminator="\n")


def parse_table_csv(text: str) -> pd.DataFrame:
    """Read a table produced by ``emit_table(..., "csv")``.

    Raises:
        ValueError: If the columns are not the table columns.
    """
    frame = pd.read_csv(io.StringIO(text), dtype={"id": str})
    if list(frame.columns) != TABLE_COLUMNS:
        raise ValueError(f"unexpected table columns {list(frame.columns)}")
    return frame


def table_format_for(path: str) -> str:
    """``markdown`` for .md files, ``csv`` otherwise."""
    return "markdown" if path.lower().endswith((".md", ".markdown")) else "csv"
