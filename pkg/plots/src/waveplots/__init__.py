"""Read-only figure rendering for the wave simulator's output files."""

from .figures import KINDS, FigureSpec, band_coverage, decay_slope, render
from .schema import REQUIRED, SchemaError, read_meanphase_json, read_table

__all__ = [
    "KINDS",
    "REQUIRED",
    "FigureSpec",
    "SchemaError",
    "band_coverage",
    "decay_slope",
    "read_meanphase_json",
    "read_table",
    "render",
]
