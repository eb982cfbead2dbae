"""Rendering for backupcbf CSV artifacts.

This package never computes memberships, margins, or trajectories itself; it
reads the documented CSV schemas and draws them.  Set boundaries come out of
zero-level contours over the grid margin columns, run summaries out of the
trajectory logs.
"""

from .io import SchemaError
from .jobs import JobError, PlotJob, load_job
from .render import render

__version__ = "0.1.0"

__all__ = ["JobError", "PlotJob", "SchemaError", "load_job", "render", "__version__"]
