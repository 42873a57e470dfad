"""Batch figure rendering for convergence-experiment CSV artifacts.

This package consumes only the CSV files written by the simulation
harness; it contains no simulation logic and the simulation package runs
without it.
"""

from .csvio import CsvFormatError, DensityCurve, ErrorTable, read_density_csv, read_error_csv
from .render import PlotJob, render_density, render_loglog

__all__ = [
    "CsvFormatError",
    "DensityCurve",
    "ErrorTable",
    "PlotJob",
    "read_density_csv",
    "read_error_csv",
    "render_density",
    "render_loglog",
]
