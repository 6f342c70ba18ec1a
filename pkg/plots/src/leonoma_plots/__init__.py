"""Rendering of benchmark figures and summary tables from harness CSV files.

This package is deliberately decoupled from the simulator: its only input is
the published CSV schema.
"""

from .render import FigureSpec, PlotError, load_rows, render, summary_table

__all__ = ["FigureSpec", "PlotError", "load_rows", "render", "summary_table"]

__version__ = "0.1.0"
