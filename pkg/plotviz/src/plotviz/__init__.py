"""Panel renderer for solver convergence traces.

Consumes the trace CSV schema written by the dataenrich experiment
commands (iter,objective,err_rel_0..err_rel_G,weighted_err) and draws
per-block error curves, one panel per trace set.
"""

from .traces import PanelTrace, TraceFileSet, TraceFormatError, load_panels, read_trace
from .render import build_figure, default_grid, render_convergence

__version__ = "0.1.0"

__all__ = [
    "PanelTrace",
    "TraceFileSet",
    "TraceFormatError",
    "build_figure",
    "default_grid",
    "load_panels",
    "read_trace",
    "render_convergence",
]
