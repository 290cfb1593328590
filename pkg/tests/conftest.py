"""Shared fixtures."""

import csv
from pathlib import Path
from typing import Callable

import pytest

CsvRows = Callable[[Path], tuple[list[str], list[list[str]]]]


def _csv_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(encoding="utf-8", newline="") as handle:
        body = [line for line in handle if not line.startswith("#")]
    header, *rows = csv.reader(body)
    return header, rows


@pytest.fixture
def csv_rows() -> CsvRows:
    """Reader returning (column names, data rows) of a written CSV file."""
    return _csv_rows
