"""Simultaneous inference for two-group survival parameters."""

import json

from ._core import (
    NphError,
    __version__,
    estimate,
    parameter_set,
    read_csv,
    run_study,
    simulate_trial,
    true_value,
)
from ._core import analyze_json as _analyze_json

__all__ = [
    "NphError",
    "__version__",
    "analyze",
    "estimate",
    "parameter_set",
    "read_csv",
    "run_study",
    "simulate_trial",
    "true_value",
]


def analyze(time, event, group, params, **kwargs):
    """Estimates, covariance, adjusted tests and intervals as a dict.

    params are strings like "S:2", "rmst:3.5" or "score:3.5:less". Keyword
    options: alpha, sided ("one"/"two"), cov ("asymptotic"/"perturbation"),
    resamples, adjust_ties, draws, seed, closed_test, bandwidth.
    """
    return json.loads(_analyze_json(list(time), list(event), list(group), list(params), **kwargs))
