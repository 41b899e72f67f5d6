"""Static drift figures from solver CSV output.

Reads the CSV files written by the solver CLI (one diagnostic column per
curve) and renders a log-scale absolute-drift-versus-step figure.  The
renderer is read-only over its inputs and produces identical image bytes
for identical inputs.
"""
from .plot import PlotSpec, load_column, plot_drift

__all__ = ["PlotSpec", "load_column", "plot_drift"]

__version__ = "1.0.0"
