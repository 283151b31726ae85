"""Static figure rendering for simulation CSV/JSONL outputs.

Strictly downstream of the simulator: reads the CSVs the CLI writes, never
re-runs anything, and computes nothing beyond axis transforms and an
optional least-squares overlay. Rendering is a pure function of
(spec, input files); re-renders are byte-identical.
"""

from .render import least_squares, load_series, read_rows, render
from .spec import FigureSpec, bundled_spec_ids, load_spec

__version__ = "0.1.0"

__all__ = ["FigureSpec", "bundled_spec_ids", "least_squares", "load_series",
           "load_spec", "read_rows", "render", "__version__"]
