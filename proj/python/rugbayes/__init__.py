"""Bayesian score-difference model for rugby seasons."""

from ._core import (
    FeatureSet,
    Fit,
    InputError,
    NumericError,
    __version__,
    effective_sample_size,
    fit,
    load_features,
    log_posterior,
    luck_decomposition,
    parameter_names,
    simulate,
    split_rhat,
)

__all__ = [
    "FeatureSet",
    "Fit",
    "InputError",
    "NumericError",
    "effective_sample_size",
    "fit",
    "load_features",
    "log_posterior",
    "luck_decomposition",
    "parameter_names",
    "simulate",
    "split_rhat",
]
