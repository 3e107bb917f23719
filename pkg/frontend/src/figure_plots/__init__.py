"""Figure rendering for channel-shortening experiment CSV tables."""
from .figures import FigureSpec, PRESETS, PlotError, load_mean_rows, plot, spec_for

__version__ = "0.1.0"
