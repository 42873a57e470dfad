"""Script entry points: plot-loglog and plot-density."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .csvio import CsvFormatError
from .render import PlotJob, render_density, render_loglog


def main_loglog(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="plot-loglog",
        description="Render a log-log error-vs-N figure from a harness CSV.",
    )
    parser.add_argument("input_csv", type=Path)
    parser.add_argument("output_image", type=Path, help="written as SVG or PNG by extension")
    parser.add_argument("--ref-slope", type=float, default=None, help="draw a guide line")
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)
    try:
        slope = render_loglog(
            PlotJob(args.input_csv, args.output_image, args.ref_slope, args.title)
        )
    except (CsvFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)
    print(f"wrote {args.output_image} (slope={slope})")
    sys.exit(0)


def main_density(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="plot-density",
        description="Overlay an estimated density curve on the true one.",
    )
    parser.add_argument("estimate_csv", type=Path)
    parser.add_argument("truth_csv", type=Path)
    parser.add_argument("output_image", type=Path)
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)
    try:
        gap = render_density(args.estimate_csv, args.truth_csv, args.output_image, args.title)
    except (CsvFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)
    print(f"wrote {args.output_image} (sup_gap={gap})")
    sys.exit(0)
