"""Render figures from competence-aware planning experiment CSV logs."""

from .figures import (PlotSpec, SchemaError, actions_table, load_metrics,
                      render)

__all__ = ["PlotSpec", "SchemaError", "actions_table", "load_metrics",
           "render"]
