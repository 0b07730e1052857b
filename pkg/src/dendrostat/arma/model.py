from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..exceptions import DomainError, LengthError, ValidationError
from . import _kernels

FATOL = 1e-8
XATOL = 1e-5
MAXITER = 2000


def _as_coefs(values):
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class ArmaSpec:
    """ARMA(p, q) parameters.

    ``theta`` holds the AR coefficients and ``phi`` the MA coefficients:
    ``x[t] = sum theta[i] x[t-i] + e[t] + sum phi[j] e[t-j]``, ``e ~ N(0, sigma2)``.
    """

    theta: tuple = ()
    phi: tuple = ()
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta", _as_coefs(self.theta))
        object.__setattr__(self, "phi", _as_coefs(self.phi))
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def p(self):
        return len(self.theta)

    @property
    def q(self):
        return len(self.phi)

    @property
    def order(self):
        return (self.p, self.q)

    def is_stationary(self):
        return _kernels.coef_to_pacf(np.array(self.theta, dtype=float))[1]

    def is_invertible(self):
        return _kernels.coef_to_pacf(-np.array(self.phi, dtype=float))[1]

    def validate(self):
        if not (self.sigma2 > 0 and np.isfinite(self.sigma2)):
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.is_stationary():
            raise DomainError(f"AR coefficients {self.theta} are not stationary")
        if not self.is_invertible():
            raise DomainError(f"MA coefficients {self.phi} are not invertible")
        return self

    def arrays(self):
        return np.array(self.theta, dtype=float), np.array(self.phi, dtype=float)


@dataclass(frozen=True)
class ArmaFit:
    spec: ArmaSpec
    loglik: float
    n: int
    converged: bool = True
    iterations: int = 0
    aic: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "aic", aic(self.loglik, self.spec.p + self.spec.q + 1))

    @property
    def order(self):
        return self.spec.order

    def to_dict(self):
        return {
            "p": self.spec.p,
            "q": self.spec.q,
            "theta": list(self.spec.theta),
            "phi": list(self.spec.phi),
            "sigma2": self.spec.sigma2,
            "loglik": self.loglik,
            "aic": self.aic,
            "n": self.n,
            "converged": bool(self.converged),
        }


def aic(loglik, k):
    return -2.0 * loglik + 2.0 * k


def _check_data(data, min_length):
    x = np.ascontiguousarray(np.asarray(data, dtype=float).ravel())
    if x.shape[0] < min_length:
        raise LengthError(f"need at least {min_length} observations, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("data contains non-finite values")
    return x


def _stationary_sqrt(spec):
    theta, phi = spec.arrays()
    P = _kernels.state_covariance(theta, phi)
    w, V = np.linalg.eigh(P)
    return V * np.sqrt(np.clip(w, 0.0, None))


def simulate_arma(spec, n, seed):
    """Draw ``n`` points from the stationary process, starting in equilibrium.

    ``seed`` may be an int, a ``numpy.random.SeedSequence`` or a ``Generator``.
    """
    spec.validate()
    if n < 1:
        raise LengthError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta, phi = spec.arrays()
    root = _stationary_sqrt(spec)
    scale = np.sqrt(spec.sigma2)
    z0 = rng.standard_normal(root.shape[0])
    e = rng.standard_normal(int(n)) * scale
    return _kernels.simulate_kernel(theta, phi, np.ascontiguousarray(root * scale), z0, e)


def arma_loglik(spec, data):
    """Exact Gaussian log-likelihood via the Kalman prediction-error decomposition."""
    spec.validate()
    x = _check_data(data, spec.p + spec.q + 1)
    theta, phi = spec.arrays()
    ssq, sumlog = _kernels.kalman_sums(theta, phi, x)
    n = x.shape[0]
    return float(-0.5 * n * np.log(2 * np.pi * spec.sigma2) - 0.5 * sumlog - 0.5 * ssq / spec.sigma2)


def fit_arma(data, p, q):
    """Maximum-likelihood ARMA(p, q) fit with zero mean.

    The innovation variance is profiled out analytically; the remaining
    coefficients are searched with Nelder-Mead in partial-autocorrelation
    space from three starts (zeros, moment estimates, a perturbation of the
    moment estimates).
    """
    if not (0 <= p <= 5 and 0 <= q <= 5):
        raise ValidationError(f"orders must lie in 0..5, got ({p}, {q})")
    x = _check_data(data, 20)
    theta, phi, s2, ll, conv, it = _kernels.fit_order(x, int(p), int(q), FATOL, XATOL, MAXITER)
    spec = ArmaSpec(theta, phi, s2)
    return ArmaFit(spec, float(ll), x.shape[0], bool(conv), int(it))


def candidate_set():
    """AR(1..5), MA(1..5) and ARMA(1,1), in that order."""
    return [(p, 0) for p in range(1, 6)] + [(0, q) for q in range(1, 6)] + [(1, 1)]


def _rank_key(fit):
    p, q = fit.order
    return (fit.aic, p + q, p)


def select_by_aic(data, candidates=None):
    """Fit every candidate order, return ``(best order, {order: ArmaFit})``.

    Ties on AIC go to the smaller total order, then the smaller AR order.
    """
    if candidates is None:
        candidates = candidate_set()
    candidates = [tuple(int(v) for v in c) for c in candidates]
    if not candidates:
        raise ValidationError("candidate set is empty")
    x = _check_data(data, 20)
    table = {}
    for p, q in candidates:
        if (p, q) not in table:
            table[(p, q)] = fit_arma(x, p, q)
    best = min(table.values(), key=_rank_key)
    return best.order, table


def fit_table_json(table, indent=2):
    rows = [fit.to_dict() for fit in table.values()]
    return json.dumps(rows, indent=indent)


class ArmaEstimator(BaseEstimator):
    """Zero-mean ARMA(p, q) fitted by exact maximum likelihood.

    Parameters
    ----------
    p, q : int
        AR and MA orders.
    """

    def __init__(self, p=1, q=1):
        self.p = p
        self.q = q

    def fit(self, X, y=None):
        self.fit_ = fit_arma(X, self.p, self.q)
        self.spec_ = self.fit_.spec
        self.loglik_ = self.fit_.loglik
        self.aic_ = self.fit_.aic
        return self

    def score(self, X, y=None):
        """Log-likelihood of ``X`` under the fitted model."""
        check_is_fitted(self, "fit_")
        return arma_loglik(self.spec_, X)

    def sample(self, n, random_state=None):
        check_is_fitted(self, "fit_")
        return simulate_arma(self.spec_, n, random_state)


class AicOrderSelector(BaseEstimator):
    """Pick the ARMA order minimizing AIC among ``candidates``."""

    def __init__(self, candidates=None):
        self.candidates = candidates

    def fit(self, X, y=None):
        self.order_, self.table_ = select_by_aic(X, self.candidates)
        self.best_ = self.table_[self.order_]
        return self

    def table_as_dicts(self):
        check_is_fitted(self, "table_")
        return [f.to_dict() for f in self.table_.values()]
