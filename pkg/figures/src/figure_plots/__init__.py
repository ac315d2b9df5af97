"""Figure rendering for experiment results CSVs."""

__version__ = "0.1.0"

from .render import PanelSpec, FIGURE_LAYOUTS, load_results_csv, panel_series, render_figure

__all__ = ["PanelSpec", "FIGURE_LAYOUTS", "load_results_csv", "panel_series", "render_figure"]
