"""Linear-family regressors fitted in closed form or by coordinate descent."""

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ..exceptions import RankError


def _with_intercept(X):
    return np.column_stack([np.ones(X.shape[0]), X])


def lstsq_qr(A, b):
    """Solve min ||A x - b|| by column-pivoted QR, refusing rank-deficient designs."""
    n, d = A.shape
    if n < d:
        raise RankError(f"{n} rows cannot determine {d} coefficients")
    Q, R, perm = linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, d) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < d:
        raise RankError(f"design matrix has rank {rank} < {d} columns")
    z = linalg.solve_triangular(R, Q.T @ b)
    x = np.empty(d)
    x[perm] = z
    return x


class LinearRegression(RegressorMixin, BaseEstimator):
    """Ordinary least squares with intercept."""

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        beta = lstsq_qr(_with_intercept(X), y)
        self.intercept_, self.coef_ = beta[0], beta[1:]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return self.intercept_ + X @ self.coef_


class GaussianGLM(RegressorMixin, BaseEstimator):
    """Generalized linear model with Gaussian family and identity link, fitted by IRLS.

    With unit working weights every IRLS iteration is the same least-squares
    solve, so this reproduces :class:`LinearRegression` exactly.
    """

    def __init__(self, max_iter=25, tol=1e-10):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        A = _with_intercept(X)
        beta = np.zeros(A.shape[1])
        dev_old = np.inf
        for it in range(self.max_iter):
            eta = A @ beta
            mu = eta                      # identity link
            w = np.ones_like(mu)          # Gaussian variance function
            z = eta + (y - mu)            # working response; d(eta)/d(mu) = 1
            sw = np.sqrt(w)
            beta = lstsq_qr(A * sw[:, None], z * sw)
            dev = float(np.sum((y - A @ beta) ** 2))
            if abs(dev_old - dev) <= self.tol * (abs(dev) + self.tol):
                break
            dev_old = dev
        self.n_iter_ = it + 1
        self.intercept_, self.coef_ = beta[0], beta[1:]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return self.intercept_ + X @ self.coef_


def _soft(u, t):
    return np.sign(u) * max(abs(u) - t, 0.0)


class ElasticNet(RegressorMixin, BaseEstimator):
    """Elastic net by cyclic coordinate descent on standardized features.

    Minimizes ``(1/2n)||y - b0 - X b||^2 + lam * (alpha ||b||_1 + (1 - alpha)/2 ||b||^2)``
    where the penalty applies to coefficients of the standardized columns.

    Parameters
    ----------
    lam : float
        Overall penalty strength (>= 0).
    alpha : float
        Mixing weight between the L1 (1.0) and ridge (0.0) penalties.
    """

    def __init__(self, lam=0.05, alpha=0.5, tol=1e-7, max_iter=10000):
        self.lam = lam
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        n, d = X.shape
        self.x_mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.x_scale_ = np.where(sd > 0, sd, 1.0)
        Z = (X - self.x_mean_) / self.x_scale_
        y_mean = y.mean()
        r = y - y_mean
        b = np.zeros(d)
        col_sq = np.sum(Z**2, axis=0) / n
        l1 = self.lam * self.alpha
        l2 = self.lam * (1.0 - self.alpha)
        for it in range(self.max_iter):
            max_delta = 0.0
            for j in range(d):
                if col_sq[j] == 0:
                    continue
                old = b[j]
                rho = Z[:, j] @ r / n + col_sq[j] * old
                b[j] = _soft(rho, l1) / (col_sq[j] + l2)
                if b[j] != old:
                    r -= Z[:, j] * (b[j] - old)
                    max_delta = max(max_delta, abs(b[j] - old))
            if max_delta < self.tol:
                break
        self.n_iter_ = it + 1
        self.coef_ = b / self.x_scale_
        self.intercept_ = y_mean - self.x_mean_ @ self.coef_
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return self.intercept_ + X @ self.coef_


__all__ = ["ElasticNet", "GaussianGLM", "LinearRegression", "lstsq_qr"]
