"""Figure rendering for solver trace CSVs and tuning tables."""

from .figures import FigureSpec, Series, build_series, render
from .traces import PlotInputError, read_trace, read_tune

__all__ = [
    "FigureSpec",
    "PlotInputError",
    "Series",
    "build_series",
    "read_trace",
    "read_tune",
    "render",
]
