"""Parsers for the two CSV formats the plotting tools accept.

Error tables are the harness artifacts: header
``experiment,abscissa,error,stderr``, one row per particle count (or step
size), footer comment lines ``# slope=<v>`` and ``# intercept=<v>`` and
optionally ``# degenerate=1``.

Density curves are plain two-column files: header ``x,density``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

ERROR_HEADER = ["experiment", "abscissa", "error", "stderr"]
DENSITY_HEADER = ["x", "density"]


class CsvFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorTable:
    experiment_id: str
    abscissa: np.ndarray
    error: np.ndarray
    stderr: np.ndarray
    slope: float
    intercept: float
    degenerate: bool


@dataclass(frozen=True)
class DensityCurve:
    x: np.ndarray
    density: np.ndarray


def _check_header(got, expected, path):
    if got != expected:
        missing = [c for c in expected if c not in (got or [])]
        if missing:
            raise CsvFormatError(f"{path}: missing column(s) {', '.join(missing)}")
        raise CsvFormatError(f"{path}: expected header {','.join(expected)}, got {','.join(got)}")


def read_error_csv(path) -> ErrorTable:
    rows = []
    experiment = ""
    slope, intercept, degenerate = math.nan, math.nan, False
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        _check_header(header.split(",") if header else [], ERROR_HEADER, path)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                if key == "slope":
                    slope = float(value)
                elif key == "intercept":
                    intercept = float(value)
                elif key == "degenerate":
                    degenerate = bool(int(value))
                continue
            fields = line.split(",")
            if len(fields) != 4:
                raise CsvFormatError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            experiment = fields[0]
            try:
                rows.append([float(v) for v in fields[1:]])
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    return ErrorTable(
        experiment_id=experiment,
        abscissa=data[:, 0],
        error=data[:, 1],
        stderr=data[:, 2],
        slope=slope,
        intercept=intercept,
        degenerate=degenerate,
    )


def read_density_csv(path) -> DensityCurve:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, DENSITY_HEADER, path)
        rows = []
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 2:
                raise CsvFormatError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
            try:
                rows.append((float(fields[0]), float(fields[1])))
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    return DensityCurve(x=data[:, 0], density=data[:, 1])
