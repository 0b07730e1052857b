"""Exact-likelihood ARMA fitting with AIC order selection."""

from .model import (
    AicOrderSelector,
    ArmaEstimator,
    ArmaFit,
    ArmaSpec,
    aic,
    arma_loglik,
    candidate_set,
    fit_arma,
    fit_table_json,
    select_by_aic,
    simulate_arma,
)

__all__ = [
    "AicOrderSelector",
    "ArmaEstimator",
    "ArmaFit",
    "ArmaSpec",
    "aic",
    "arma_loglik",
    "candidate_set",
    "fit_arma",
    "fit_table_json",
    "select_by_aic",
    "simulate_arma",
]
