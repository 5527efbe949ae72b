"""CSV import/export of datasets: header ``y,x1,...,xp``, one observation per row."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from src.datamodel.models import Dataset

logger = logging.getLogger(__name__)


class DatasetFormatError(ValueError):
    """Raised when a dataset CSV does not follow the ``y,x1,...,xp`` layout."""

    pass


def dataset_header(p: int) -> list[str]:
    return ["y"] + [f"x{j}" for j in range(1, p + 1)]


def write_dataset_csv(dataset: Dataset, path: str) -> None:
    """Write a dataset with full double precision."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([dataset.Y, dataset.X])
    np.savetxt(path, table, delimiter=",", fmt="%.17g", header=",".join(dataset_header(dataset.p)), comments="")
    logger.debug("Wrote dataset n=%d p=%d to %s", dataset.n, dataset.p, path)


def read_dataset_csv(path: str) -> Dataset:
    """Read a dataset written by ``write_dataset_csv`` (or any CSV in that layout).

    Raises:
        DatasetFormatError: If the file is missing, the header is not
            ``y,x1,...,xp`` or the body is not numeric.
    """
    csv_path = Path(path)
    if not csv_path.exists():
        raise DatasetFormatError(f"Data file not found: {path}")
    with open(csv_path) as f:
        header = [h.strip() for h in f.readline().strip().split(",")]
    if len(header) < 2 or header != dataset_header(len(header) - 1):
        raise DatasetFormatError(f"{path}: header must be y,x1,...,xp")
    try:
        table = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc
    if table.shape[1] != len(header):
        raise DatasetFormatError(f"{path}: expected {len(header)} columns, found {table.shape[1]}")
    try:
        dataset = Dataset(Y=table[:, 0], X=table[:, 1:])
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc
    logger.debug("Read dataset n=%d p=%d from %s", dataset.n, dataset.p, path)
    return dataset
