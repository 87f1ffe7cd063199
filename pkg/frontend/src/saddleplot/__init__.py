"""Figures from solver trace CSVs and analysis reports.

Reads only the text artifacts the solver command line writes; the
solver library itself is never imported, so this package can plot
results produced anywhere.
"""

from .artifacts import (
    ANALYSIS_HEADER,
    SUMMARY_HEADER,
    TRACE_HEADER,
    PlotDataError,
    marker_iteration,
    read_report,
    read_summary,
    read_trace,
    summary_path_for,
)
from .render import PlotJob, RenderResult, render

__version__ = "0.1.0"

__all__ = [
    "ANALYSIS_HEADER",
    "SUMMARY_HEADER",
    "TRACE_HEADER",
    "PlotDataError",
    "PlotJob",
    "RenderResult",
    "marker_iteration",
    "read_report",
    "read_summary",
    "read_trace",
    "render",
    "summary_path_for",
]
