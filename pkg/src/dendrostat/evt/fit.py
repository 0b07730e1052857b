"""Maximum-likelihood GEV fitting, Wald intervals and profile likelihoods."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..exceptions import FitError, LengthError, UnavailableError, ValidationError
from .distribution import GevParams, domain_class, gev_loglik, gev_rvs, in_support

PARAM_NAMES = ("mu", "sigma", "gamma")
GTOL = 1e-8
ACCEPT_GRAD = 1e-5
REGULARITY_LIMIT = -0.5


@dataclass(frozen=True, eq=False)
class GevFit:
    params: GevParams
    loglik: float
    n: int
    cov: np.ndarray | None
    std_errors: tuple | None
    domain_class: str
    warnings: tuple = field(default=())

    def to_dict(self, level=0.95):
        out = {
            "params": {k: getattr(self.params, k) for k in PARAM_NAMES},
            "loglik": self.loglik,
            "n": self.n,
            "domain_class": self.domain_class,
            "std_errors": None if self.std_errors is None else dict(zip(PARAM_NAMES, self.std_errors)),
            "cov": None if self.cov is None else self.cov.tolist(),
            "warnings": list(self.warnings),
        }
        if self.std_errors is not None:
            out["wald_ci"] = {
                "level": level,
                **{k: list(iv) for k, iv in zip(PARAM_NAMES, wald_ci(self, level))},
            }
        else:
            out["wald_ci"] = None
        return out


def block_maxima(data, block):
    """Maxima of consecutive blocks of length ``block``; a trailing partial block is dropped."""
    x = np.asarray(data, dtype=float).ravel()
    if block < 1:
        raise ValidationError("block length must be >= 1")
    m = len(x) // block
    if m == 0:
        raise LengthError(f"fewer than {block} observations")
    return x[: m * block].reshape(m, block).max(axis=1)


def pwm_start(x):
    """Probability-weighted-moment estimates (mu, sigma, gamma)."""
    x = np.sort(np.asarray(x, dtype=float))
    n = len(x)
    i = np.arange(n)
    b0 = x.mean()
    b1 = np.sum(i / (n - 1) * x) / n
    b2 = np.sum(i * (i - 1) / ((n - 1) * (n - 2)) * x) / n
    c = (2 * b1 - b0) / (3 * b2 - b0) - math.log(2) / math.log(3)
    k = 7.8590 * c + 2.9554 * c**2  # k = -gamma
    if abs(k) < 1e-8:
        sigma = (2 * b1 - b0) / math.log(2)
        mu = b0 - np.euler_gamma * sigma
        return mu, sigma, 0.0
    g1k = special.gamma(1 + k)
    sigma = (2 * b1 - b0) * k / (g1k * (1 - 2.0 ** (-k)))
    mu = b0 + sigma * (g1k - 1) / k
    return mu, sigma, -k


def gumbel_moment_start(x):
    x = np.asarray(x, dtype=float)
    sigma = math.sqrt(6.0) * np.std(x, ddof=1) / math.pi
    return float(np.mean(x) - np.euler_gamma * sigma), float(sigma), 0.0


def _feasible(start, x):
    mu, sigma, g = start
    if not (np.isfinite(mu) and np.isfinite(sigma) and np.isfinite(g) and sigma > 0):
        return False
    return in_support(GevParams(mu, sigma, g), x)


def _objective(x):
    def f(u):
        mu, ls, g = u
        ll, grad = gev_loglik(GevParams(mu, math.exp(ls), g), x, gradient=True)
        if not np.isfinite(ll):
            return np.inf, np.zeros(3)
        sigma = math.exp(ls)
        return -ll, -np.array([grad[0], grad[1] * sigma, grad[2]])

    return f


def observed_information(params, x):
    """Central differences of the analytic score, symmetrized."""
    theta = params.as_array()
    H = np.empty((3, 3))
    for j in range(3):
        h = 1e-5 * max(abs(theta[j]), 0.1)
        if j == 1:
            h = min(h, 0.5 * theta[1])
        up, dn = theta.copy(), theta.copy()
        up[j] += h
        dn[j] -= h
        g_up = gev_loglik(GevParams(*up), x, gradient=True)[1]
        g_dn = gev_loglik(GevParams(*dn), x, gradient=True)[1]
        H[:, j] = -(g_up - g_dn) / (2 * h)
    return 0.5 * (H + H.T)


def _minimize(fun, u0):
    res = optimize.minimize(fun, u0, jac=True, method="BFGS", options={"gtol": GTOL, "maxiter": 1000})
    return res


def fit_gev(data, start=None):
    """Fit GEV parameters to ``data`` by maximum likelihood.

    Starts from probability-weighted moments, falling back to Gumbel moments
    when that start puts data outside the support.  The search runs over
    (mu, log sigma, gamma) with BFGS on the analytic score.
    """
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 20:
        raise LengthError(f"GEV fit needs at least 20 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("data contains non-finite values")
    if np.ptp(x) == 0:
        raise ValidationError("data are constant")
    starts = [start] if start is not None else []
    with np.errstate(all="ignore"):
        starts += [pwm_start(x), gumbel_moment_start(x)]
    feasible = [s for s in starts if _feasible(s, x)]
    fun = _objective(x)
    best = None
    for s in feasible:
        u0 = np.array([s[0], math.log(s[1]), s[2]])
        res = _minimize(fun, u0)
        if best is None or res.fun < best.fun:
            best = res
        if res.success:
            break
    if best is None:
        raise FitError("no feasible starting point")
    params_best, gnorm = _newton_polish(GevParams(best.x[0], math.exp(best.x[1]), best.x[2]), x)
    if gnorm > ACCEPT_GRAD:
        raise FitError(f"GEV fit did not converge (max |score| = {gnorm:.3g})", best=params_best)
    ll = gev_loglik(params_best, x)
    notes = []
    if params_best.gamma <= REGULARITY_LIMIT:
        notes.append("shape <= -0.5: classical maximum-likelihood asymptotics do not hold")
    cov, se = _covariance(params_best, x, notes)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return GevFit(params_best, float(ll), int(x.size), cov, se, domain_class(params_best.gamma), tuple(notes))


def _newton_polish(params, x, max_steps=20):
    """Newton steps on the observed information from a near-optimal point.

    Returns (params, max |score| in (mu, log sigma, gamma) coordinates).
    """
    ll, grad = gev_loglik(params, x, gradient=True)
    for _ in range(max_steps):
        scaled = np.array([grad[0], grad[1] * params.sigma, grad[2]])
        if np.max(np.abs(scaled)) <= GTOL:
            break
        try:
            step = np.linalg.solve(observed_information(params, x), grad)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-4:
            cand = params.as_array() + t * step
            if cand[1] > 0:
                trial = GevParams(*cand)
                ll_new, g_new = gev_loglik(trial, x, gradient=True)
                if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * abs(ll):
                    break
            t *= 0.5
        else:
            break
        params, ll, grad = trial, ll_new, g_new
    scaled = np.array([grad[0], grad[1] * params.sigma, grad[2]])
    return params, float(np.max(np.abs(scaled)))


def _covariance(params, x, notes):
    try:
        info = observed_information(params, x)
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        notes.append("observed information is singular; standard errors unavailable")
        return None, None
    cov = 0.5 * (cov + cov.T)
    eig = np.linalg.eigvalsh(cov)
    if not np.all(np.isfinite(cov)) or eig.min() <= 0:
        notes.append("observed information is not positive definite; standard errors unavailable")
        return None, None
    return cov, tuple(float(v) for v in np.sqrt(np.diag(cov)))


def wald_ci(fit, level=0.95):
    """Estimate +/- z * standard error for (mu, sigma, gamma)."""
    if fit.std_errors is None:
        raise UnavailableError("fit has no standard errors")
    if not 0 <= level < 1:
        raise ValidationError("level must lie in [0, 1)")
    z = stats.norm.ppf(0.5 + level / 2.0)
    est = fit.params.as_array()
    return [(float(e - z * s), float(e + z * s)) for e, s in zip(est, fit.std_errors)]


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    parameter: str
    grid: np.ndarray
    profile_loglik: np.ndarray
    ci: tuple
    level: float
    mle: float
    max_loglik: float
    failed: np.ndarray

    def to_rows(self):
        return [
            (float(v), float(ll), bool(bad))
            for v, ll, bad in zip(self.grid, self.profile_loglik, self.failed)
        ]


def _repair(free_vals, fixed_name, fixed_val, x):
    """Nudge a warm start into the support of the data."""
    names = [n for n in PARAM_NAMES if n != fixed_name]
    vals = dict(zip(names, free_vals))
    vals[fixed_name] = fixed_val
    for _ in range(200):
        if _feasible((vals["mu"], vals["sigma"], vals["gamma"]), x):
            return np.array([vals[n] for n in names])
        if fixed_name == "sigma":
            vals["gamma"] *= 0.5
        else:
            vals["sigma"] *= 1.25
    return None


def _inner_fit(x, fixed_name, fixed_val, start):
    names = [n for n in PARAM_NAMES if n != fixed_name]
    idx = [PARAM_NAMES.index(n) for n in names]
    log_sigma = "sigma" in names

    def to_params(u):
        vals = {fixed_name: fixed_val}
        for n, v in zip(names, u):
            vals[n] = math.exp(v) if (n == "sigma") else v
        return GevParams(vals["mu"], vals["sigma"], vals["gamma"])

    def fun(u):
        params = to_params(u)
        ll, grad = gev_loglik(params, x, gradient=True)
        if not np.isfinite(ll):
            return np.inf, np.zeros(2)
        g = grad[idx]
        if log_sigma:
            g[names.index("sigma")] *= params.sigma
        return -ll, -g

    u0 = np.array([math.log(v) if n == "sigma" else v for n, v in zip(names, start)])
    res = optimize.minimize(fun, u0, jac=True, method="BFGS", options={"gtol": GTOL, "maxiter": 500})
    ok = np.isfinite(res.fun) and (res.success or np.max(np.abs(res.jac)) <= ACCEPT_GRAD)
    params = to_params(res.x)
    free = np.array([getattr(params, n) for n in names])
    return -float(res.fun), free, bool(ok)


def profile_loglik(data, fit, parameter, grid, level=0.95):
    """Profile log-likelihood of one parameter over ``grid``.

    Each grid point re-maximizes over the other two parameters, warm-started
    from its neighbour in a sweep outward from the grid point closest to the
    MLE.  The confidence set is where the profile stays within
    chi2_1(level) / 2 of the joint maximum; its endpoints are interpolated
    linearly between grid points and are ``None`` if the grid ends first.
    """
    if parameter not in PARAM_NAMES:
        raise ValidationError(f"parameter must be one of {PARAM_NAMES}")
    x = np.asarray(data, dtype=float).ravel()
    grid = np.sort(np.asarray(grid, dtype=float))
    mle = getattr(fit.params, parameter)
    if not (grid[0] <= mle <= grid[-1]):
        raise ValidationError(f"grid [{grid[0]}, {grid[-1]}] does not bracket the MLE {mle}")
    if parameter == "sigma" and grid[0] <= 0:
        raise ValidationError("scale grid must be positive")
    names = [n for n in PARAM_NAMES if n != parameter]
    mle_free = np.array([getattr(fit.params, n) for n in names])
    prof = np.full(grid.size, np.nan)
    failed = np.zeros(grid.size, dtype=bool)
    centre = int(np.argmin(np.abs(grid - mle)))

    def sweep(indices):
        warm = mle_free.copy()
        for k in indices:
            start = _repair(warm, parameter, grid[k], x)
            if start is None:
                failed[k] = True
                continue
            ll, free, ok = _inner_fit(x, parameter, grid[k], start)
            if not ok:
                failed[k] = True
                continue
            prof[k] = ll
            warm = free

    sweep(range(centre, grid.size))
    sweep(range(centre - 1, -1, -1))
    cutoff = fit.loglik - 0.5 * stats.chi2.ppf(level, 1)
    ci = _crossings(grid, prof, failed, cutoff, mle)
    return ProfileCurve(parameter, grid, prof, ci, level, float(mle), fit.loglik, failed)


def _crossings(grid, prof, failed, cutoff, mle):
    good = ~failed & np.isfinite(prof)
    g, p = grid[good], prof[good]
    if g.size == 0:
        return (None, None)
    top = int(np.argmax(p))

    def walk(step):
        k = top
        while 0 <= k + step < g.size:
            nxt = k + step
            if p[nxt] < cutoff:
                if p[k] < cutoff:
                    return None
                frac = (p[k] - cutoff) / (p[k] - p[nxt])
                return float(g[k] + frac * (g[nxt] - g[k]))
            k = nxt
        return None

    lo, hi = walk(-1), walk(1)
    return (lo, hi)


def default_profile_grid(fit, parameter, n_points=61, width=4.0):
    """Grid of ``n_points`` spanning the MLE +/- ``width`` standard errors."""
    j = PARAM_NAMES.index(parameter)
    est = fit.params.as_array()[j]
    se = fit.std_errors[j] if fit.std_errors is not None else 0.25 * max(abs(est), 0.1)
    lo, hi = est - width * se, est + width * se
    if parameter == "sigma":
        lo = max(lo, 0.05 * est)
    grid = np.linspace(lo, hi, n_points)
    return np.sort(np.append(grid, est)) if est not in grid else grid


class GEVEstimator(BaseEstimator):
    """Generalized extreme-value distribution fitted by maximum likelihood.

    Parameters
    ----------
    block : int or None
        If given, fit to maxima of consecutive blocks of this length rather
        than to the raw observations.
    """

    def __init__(self, block=None):
        self.block = block

    def _prepare(self, X):
        x = np.asarray(X, dtype=float).ravel()
        return block_maxima(x, self.block) if self.block else x

    def fit(self, X, y=None):
        self.fit_ = fit_gev(self._prepare(X))
        self.params_ = self.fit_.params
        self.std_errors_ = self.fit_.std_errors
        self.loglik_ = self.fit_.loglik
        return self

    def score(self, X, y=None):
        check_is_fitted(self, "fit_")
        return gev_loglik(self.params_, self._prepare(X))

    def sample(self, n, random_state=None):
        check_is_fitted(self, "fit_")
        return gev_rvs(self.params_, n, random_state)
