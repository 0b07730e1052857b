"""Generalized extreme-value modelling by maximum likelihood."""

from .distribution import (
    GevParams,
    domain_class,
    gev_cdf,
    gev_loglik,
    gev_logpdf,
    gev_pdf,
    gev_quantile,
    gev_rvs,
    in_support,
    return_level,
    return_level_gradient,
)
from .fit import (
    PARAM_NAMES,
    GEVEstimator,
    GevFit,
    ProfileCurve,
    block_maxima,
    default_profile_grid,
    fit_gev,
    observed_information,
    profile_loglik,
    wald_ci,
)
from .diagnostics import DiagnosticBundle, bundle_csv, bundle_svg, diagnostics, plotting_positions
