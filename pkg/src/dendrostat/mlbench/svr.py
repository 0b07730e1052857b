import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data


@njit(cache=True, nogil=True)
def _dual_cd(Z, y, C, eps, tol, max_iter):
    """Single-variable dual updates for the L1-loss epsilon-insensitive SVR.

    Dual: min_b 0.5 b'Qb - y'b + eps |b|_1, -C <= b_i <= C, Q = Z Z'.
    The bias is folded into Z as a constant column, which removes the
    equality constraint, so each step solves one coordinate in closed form.
    """
    n, d = Z.shape
    beta = np.zeros(n)
    w = np.zeros(d)
    qdiag = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += Z[i, j] * Z[i, j]
        qdiag[i] = s
    it = 0
    for it in range(max_iter):
        max_change = 0.0
        for i in range(n):
            if qdiag[i] == 0.0:
                continue
            g = -y[i]
            for j in range(d):
                g += w[j] * Z[i, j]
            u = beta[i] - g / qdiag[i]
            t = eps / qdiag[i]
            if u > t:
                nb = u - t
            elif u < -t:
                nb = u + t
            else:
                nb = 0.0
            if nb > C:
                nb = C
            elif nb < -C:
                nb = -C
            delta = nb - beta[i]
            if delta != 0.0:
                for j in range(d):
                    w[j] += delta * Z[i, j]
                beta[i] = nb
                if abs(delta) > max_change:
                    max_change = abs(delta)
        if max_change < tol:
            break
    return w, beta, it + 1


class LinearSVR(RegressorMixin, BaseEstimator):
    """Linear epsilon-insensitive support-vector regression.

    Features are standardized and the target centered on the training fold.

    Parameters
    ----------
    C : float
        Box constraint on the dual variables.
    epsilon : float
        Half-width of the insensitive tube, in target units.
    """

    def __init__(self, C=1.0, epsilon=0.1, tol=1e-6, max_iter=5000):
        self.C = C
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        if self.C <= 0 or self.epsilon < 0:
            raise ValueError("need C > 0 and epsilon >= 0")
        self.x_mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.x_scale_ = np.where(sd > 0, sd, 1.0)
        self.y_mean_ = float(y.mean())
        Z = np.column_stack([(X - self.x_mean_) / self.x_scale_, np.ones(X.shape[0])])
        w, beta, self.n_iter_ = _dual_cd(
            np.ascontiguousarray(Z), y - self.y_mean_, float(self.C), float(self.epsilon),
            float(self.tol), int(self.max_iter),
        )
        self.dual_coef_ = beta
        self.coef_ = w[:-1] / self.x_scale_
        self.intercept_ = self.y_mean_ + w[-1] - self.x_mean_ @ self.coef_
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return self.intercept_ + X @ self.coef_
