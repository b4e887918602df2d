"""Figure rendering for kancal experiment artifacts."""

from .render import (
    SchemaError,
    plot_logit_hist,
    plot_reliability,
    plot_sweep,
    plot_tau_curve,
)

__version__ = "0.1.0"
