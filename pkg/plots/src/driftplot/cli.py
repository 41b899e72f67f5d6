"""plot-drift: render drift curves from solver CSV files."""
from __future__ import annotations

import argparse
import sys

from .plot import plot_drift


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot-drift", description=__doc__)
    parser.add_argument("--csv", nargs="+", required=True, help="input CSV file(s)")
    parser.add_argument("--column", required=True, help="CSV column to plot")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--linear", action="store_true", help="linear instead of log y-axis")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = plot_drift(args.csv, args.column, args.out, log_scale=not args.linear)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
