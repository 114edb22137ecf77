"""kamtori-figures: batch plots from kamtori run directories."""

from .render import KINDS, FigureSpec, SchemaError, build_figure, read_peaks, read_table, render

__version__ = "0.1.0"
__all__ = [
    "KINDS",
    "FigureSpec",
    "SchemaError",
    "build_figure",
    "read_peaks",
    "read_table",
    "render",
    "__version__",
]
