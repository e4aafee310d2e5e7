"""Mixed variational schemes for gradient flows in metric spaces."""

from ._mflow import (
    builtin_scheme_names,
    certify,
    consistency,
    convergence,
    energy_trace,
    exact_heat_solution,
    fit_order,
    initial_quantile,
    quantile_to_density,
    relative_l2_error,
    uniform_grid,
    w2_distance_squared,
    weights,
)

__all__ = [
    "builtin_scheme_names",
    "certify",
    "consistency",
    "convergence",
    "energy_trace",
    "exact_heat_solution",
    "fit_order",
    "initial_quantile",
    "quantile_to_density",
    "relative_l2_error",
    "uniform_grid",
    "w2_distance_squared",
    "weights",
]
