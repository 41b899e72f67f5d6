"""CSV reading and figure rendering for conservation-drift series."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGSIZE = (8.0, 5.0)
DPI = 120


@dataclass(frozen=True)
class PlotSpec:
    """One figure: which CSVs, which column, log scale, output path."""

    csv_paths: tuple
    column: str
    out_path: str
    log_scale: bool = True

    def __post_init__(self):
        if not self.csv_paths:
            raise ValueError("need at least one CSV path")
        object.__setattr__(self, "csv_paths", tuple(str(p) for p in self.csv_paths))


def load_column(path: str, column: str) -> tuple[np.ndarray, np.ndarray]:
    """Steps and values of one column; rejects missing columns and empty files."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            have = ", ".join(reader.fieldnames or [])
            raise ValueError(f"column {column!r} not found in {path} (have: {have})")
        steps, values = [], []
        for row in reader:
            steps.append(float(row.get("step", len(steps))))
            values.append(float(row[column]))
    if not values:
        raise ValueError(f"no data rows in {path}")
    return np.asarray(steps), np.asarray(values)


def plot_drift(
    csv_paths: Sequence[str],
    column: str,
    out_path: str,
    log_scale: bool = True,
) -> str:
    """Render one curve per CSV: |column| against step, legend from file names."""
    spec = PlotSpec(csv_paths=tuple(csv_paths), column=column, out_path=str(out_path),
                    log_scale=log_scale)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    try:
        for path in spec.csv_paths:
            steps, values = load_column(path, spec.column)
            drift = np.abs(values)
            if spec.log_scale:
                # log axes cannot show zeros or the nan of undefined rows
                mask = np.isfinite(drift) & (drift > 0.0)
            else:
                mask = np.isfinite(drift)
            ax.plot(steps[mask], drift[mask], label=Path(path).name)
        if spec.log_scale:
            ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.set_ylabel(f"|{spec.column}|")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        fig.savefig(spec.out_path)
    finally:
        plt.close(fig)
    return spec.out_path
