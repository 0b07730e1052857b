"""Generalized extreme-value distribution with shape ``gamma``.

With z = (x - mu) / sigma the distribution function is
exp(-(1 + gamma z)^(-1/gamma)) on 1 + gamma z > 0, and exp(-exp(-z)) at
gamma = 0.  gamma < 0 gives a bounded upper tail (Weibull class).

Everything is written in terms of the reduced variate
y = log1p(gamma z) / gamma, which tends to z as gamma -> 0, so the Gumbel
case is not a separate branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DomainError

SMALL_SHAPE = 1e-8
GUMBEL_BAND = 1e-6


@dataclass(frozen=True)
class GevParams:
    mu: float
    sigma: float
    gamma: float

    def __post_init__(self):
        for name in ("mu", "sigma", "gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise DomainError(f"scale must be positive, got {self.sigma}")

    def as_array(self):
        return np.array([self.mu, self.sigma, self.gamma])

    @property
    def domain_class(self):
        return domain_class(self.gamma)

    @property
    def lower_endpoint(self):
        return self.mu - self.sigma / self.gamma if self.gamma > 0 else -np.inf

    @property
    def upper_endpoint(self):
        return self.mu - self.sigma / self.gamma if self.gamma < 0 else np.inf


def domain_class(gamma):
    if abs(gamma) < GUMBEL_BAND:
        return "Gumbel"
    return "Frechet" if gamma > 0 else "Weibull"


def _reduced(z, gamma):
    """Return (y, t, support mask) with t = 1 + gamma z."""
    z = np.asarray(z, dtype=float)
    t = 1.0 + gamma * z
    if abs(gamma) < SMALL_SHAPE:
        y = z - 0.5 * gamma * z**2 + gamma**2 * z**3 / 3.0
        return y, t, np.isfinite(z)
    ok = t > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        y = np.where(ok, np.log1p(gamma * np.where(ok, z, 0.0)) / gamma, np.nan)
    return y, t, ok


def gev_cdf(params, x):
    z = (np.asarray(x, dtype=float) - params.mu) / params.sigma
    y, _, ok = _reduced(z, params.gamma)
    with np.errstate(over="ignore", invalid="ignore"):
        inside = np.exp(-np.exp(-np.where(ok, y, 0.0)))
    outside = 0.0 if params.gamma > 0 else 1.0
    out = np.where(ok, inside, outside)
    return out if out.ndim else float(out)


def gev_logpdf(params, x):
    z = (np.asarray(x, dtype=float) - params.mu) / params.sigma
    y, _, ok = _reduced(z, params.gamma)
    yy = np.where(ok, y, 0.0)
    with np.errstate(over="ignore"):
        lp = -np.log(params.sigma) - (1.0 + params.gamma) * yy - np.exp(-yy)
    out = np.where(ok, lp, -np.inf)
    return out if out.ndim else float(out)


def gev_pdf(params, x):
    out = np.exp(gev_logpdf(params, x))
    return out if np.ndim(out) else float(out)


def _expm1_over(gamma, w):
    """expm1(gamma w) / gamma, continuous at gamma = 0."""
    if abs(gamma) < SMALL_SHAPE:
        return w + 0.5 * gamma * w**2 + gamma**2 * w**3 / 6.0
    return np.expm1(gamma * w) / gamma


def _quantile_from_w(params, w):
    return params.mu + params.sigma * _expm1_over(params.gamma, w)


def gev_quantile(params, p):
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("quantile probabilities must lie in (0, 1)")
    w = -np.log(-np.log(p))
    out = _quantile_from_w(params, w)
    return out if np.ndim(out) else float(out)


def return_level(params, period):
    """Level exceeded on average once every ``period`` blocks: F^-1(1 - 1/period)."""
    period = np.asarray(period, dtype=float)
    if np.any(~(period > 1)):
        raise DomainError("return period must exceed 1")
    w = -np.log(-np.log1p(-1.0 / period))
    out = _quantile_from_w(params, w)
    return out if np.ndim(out) else float(out)


def return_level_gradient(params, period):
    """d(return level)/d(mu, sigma, gamma), shape (len(period), 3)."""
    period = np.atleast_1d(np.asarray(period, dtype=float))
    w = -np.log(-np.log1p(-1.0 / period))
    g = params.gamma
    d_sigma = _expm1_over(g, w)
    if abs(g) < SMALL_SHAPE:
        d_gamma = params.sigma * (0.5 * w**2 + g * w**3 / 3.0)
    else:
        d_gamma = params.sigma * (w * np.exp(g * w) / g - np.expm1(g * w) / g**2)
    return np.column_stack([np.ones_like(w), d_sigma, d_gamma])


def gev_rvs(params, size, random_state=None):
    rng = random_state if isinstance(random_state, np.random.Generator) else np.random.default_rng(random_state)
    u = rng.uniform(size=size)
    u = np.clip(u, np.finfo(float).tiny, 1 - np.finfo(float).eps)
    return gev_quantile(params, u)


def in_support(params, x):
    z = (np.asarray(x, dtype=float) - params.mu) / params.sigma
    return bool(np.all(_reduced(z, params.gamma)[2]))


def gev_loglik(params, data, gradient=False):
    """Sum of log densities, and optionally its gradient in (mu, sigma, gamma).

    Returns ``-inf`` (gradient all NaN) when any observation lies outside
    the support.
    """
    x = np.asarray(data, dtype=float).ravel()
    mu, sigma, g = params.mu, params.sigma, params.gamma
    z = (x - mu) / sigma
    y, t, ok = _reduced(z, g)
    if not np.all(ok):
        return (-np.inf, np.full(3, np.nan)) if gradient else -np.inf
    ey = np.exp(-y)
    ll = float(np.sum(-np.log(sigma) - (1.0 + g) * y - ey))
    if not gradient:
        return ll
    dl_dy = ey - (1.0 + g)
    dy_dz = 1.0 / t
    if abs(g) < SMALL_SHAPE:
        dy_dg = -0.5 * z**2 + 2.0 * g * z**3 / 3.0 - 0.75 * g**2 * z**4
    else:
        dy_dg = z / (g * t) - np.log1p(g * z) / g**2
    grad = np.array([
        np.sum(dl_dy * dy_dz * (-1.0 / sigma)),
        np.sum(-1.0 / sigma + dl_dy * dy_dz * (-z / sigma)),
        np.sum(-y + dl_dy * dy_dg),
    ])
    return ll, grad
