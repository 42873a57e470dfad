"""Figure rendering. Everything is recomputed from the CSV contents and
cross-checked against the file's own footer, so a stale or hand-edited
footer is a hard error rather than a silently wrong annotation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .csvio import CsvFormatError, read_density_csv, read_error_csv

FOOTER_TOL = 1e-9


@dataclass(frozen=True)
class PlotJob:
    input_csv: Path
    output_image: Path
    reference_slope: float | None = None
    title: str = ""


def _fit_loglog(abscissa: np.ndarray, error: np.ndarray) -> tuple[float, float]:
    if np.any(abscissa <= 0) or np.any(error <= 0):
        raise CsvFormatError("log-log rendering requires strictly positive abscissa and error")
    slope, intercept = np.polyfit(np.log(abscissa), np.log(error), 1)
    return float(slope), float(intercept)


def render_loglog(job: PlotJob) -> float:
    """Scatter of (abscissa, error) on log-log axes with the fitted line.

    Returns the annotated slope, which is recomputed from the rows and
    must agree with the CSV footer to 1e-9.
    """
    table = read_error_csv(job.input_csv)
    if len(table.abscissa) < 2:
        raise CsvFormatError(f"{job.input_csv}: need at least 2 rows to fit a slope")
    slope, intercept = _fit_loglog(table.abscissa, table.error)
    if math.isfinite(table.slope) and abs(slope - table.slope) > FOOTER_TOL:
        raise CsvFormatError(
            f"{job.input_csv}: footer slope {table.slope} disagrees with refit {slope}"
        )

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.errorbar(
        table.abscissa,
        table.error,
        yerr=table.stderr,
        fmt="o",
        color="tab:blue",
        capsize=3,
        label="measured error",
    )
    xs = np.array([table.abscissa.min(), table.abscissa.max()], dtype=float)
    ax.plot(
        xs,
        np.exp(intercept) * xs**slope,
        "-",
        color="tab:red",
        label=f"fit (slope = {slope:.4f})",
    )
    if job.reference_slope is not None:
        anchor = table.error[0] / table.abscissa[0] ** job.reference_slope
        ax.plot(
            xs,
            anchor * xs**job.reference_slope,
            "--",
            color="gray",
            label=f"reference slope {job.reference_slope:g}",
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("error")
    ax.set_title(job.title or table.experiment_id)
    ax.legend()
    ax.annotate(
        f"slope = {slope:.9f}",
        xy=(0.05, 0.05),
        xycoords="axes fraction",
        fontsize=9,
    )
    fig.tight_layout()
    fig.savefig(job.output_image)
    plt.close(fig)
    return slope


def render_density(estimate_csv, truth_csv, output_image, title: str = "") -> float:
    """Overlay an estimated density curve on the true one.

    Returns the annotated sup gap max|estimate - truth| over the shared
    x-grid. The two files must carry identical grids.
    """
    est = read_density_csv(estimate_csv)
    truth = read_density_csv(truth_csv)
    if est.x.shape != truth.x.shape or not np.array_equal(est.x, truth.x):
        raise CsvFormatError(f"{estimate_csv} and {truth_csv} do not share an x-grid")
    sup_gap = float(np.max(np.abs(est.density - truth.density)))

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(truth.x, truth.density, "-", color="black", label="true density")
    ax.plot(est.x, est.density, "--", color="tab:blue", label="kernel estimate")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.annotate(
        f"sup gap = {sup_gap:.9e}",
        xy=(0.05, 0.92),
        xycoords="axes fraction",
        fontsize=9,
    )
    fig.tight_layout()
    fig.savefig(output_image)
    plt.close(fig)
    return sup_gap
