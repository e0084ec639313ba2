"""Fork-join multipath upload toolkit.

Thin re-export of the compiled core; service models are passed as tuples,
e.g. ("exp", 4.0), ("gamma", 2.0, 40.0), ("weibull", 0.9, 1.5),
("lognormal", 0.0, 0.25).
"""

from ._core import (
    GammaPosterior,
    chernoff_comparison_bound,
    em_fit,
    mean_upload_latency,
    optimal_nr,
    optimal_two_path_exponential,
    path_decay_rate,
    posterior_update,
    predictive_mean,
    project_simplex,
    proportional_allocation,
    psi_exponential,
    round_allocation,
    simulate_mean_wait,
    synchronization_cost,
    tail_bound,
    viterbi_map,
)

__all__ = [
    "GammaPosterior",
    "chernoff_comparison_bound",
    "em_fit",
    "mean_upload_latency",
    "optimal_nr",
    "optimal_two_path_exponential",
    "path_decay_rate",
    "posterior_update",
    "predictive_mean",
    "project_simplex",
    "proportional_allocation",
    "psi_exponential",
    "round_allocation",
    "simulate_mean_wait",
    "synchronization_cost",
    "tail_bound",
    "viterbi_map",
]
