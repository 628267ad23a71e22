"""cgplots: figure rendering for connection-graph learning experiment CSVs."""

from .figures import (
    RESULTS_COLUMNS,
    FigureSpec,
    SchemaError,
    load_rows,
    plot_ratio_curves,
    plot_sphere_panel,
    render,
)

__all__ = [
    "RESULTS_COLUMNS",
    "FigureSpec",
    "SchemaError",
    "load_rows",
    "plot_ratio_curves",
    "plot_sphere_panel",
    "render",
]

__version__ = "0.1.0"
