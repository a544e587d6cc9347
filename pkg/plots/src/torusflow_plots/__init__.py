"""Rendering of torusflow output files: decay curves and spectrum scatter.

Pure presentation: every number in a figure comes from the input files (plus
a least-squares slope of the plotted decay curve for the annotation); nothing
is recomputed from the underlying models.
"""

__version__ = "0.1.0"

from .io import PlotDataError
from .render import PlotJob, render

__all__ = ["PlotDataError", "PlotJob", "render", "__version__"]
