"""Compiled inner loops for ARMA likelihood evaluation and simplex fitting.

Model convention: x[t] = sum_i theta[i] x[t-i] + e[t] + sum_j phi[j] e[t-j].
The state-space form is Harvey's, with state dimension r = max(p, q + 1):

    alpha[t] = T alpha[t-1] + R e[t],   x[t] = alpha[t][0]

where T has the padded AR coefficients in its first column and ones on the
superdiagonal, and R = (1, phi_1, ..., phi_{r-1}).  Everything here works in
units of the innovation variance (sigma2 = 1); callers rescale.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)
_STEADY_TOL = 1e-13


@njit(cache=True, nogil=True)
def pacf_to_coef(r):
    """Durbin-Levinson map from partial autocorrelations to AR coefficients."""
    k = r.shape[0]
    a = np.zeros(k)
    tmp = np.zeros(k)
    for m in range(k):
        a[m] = r[m]
        for j in range(m):
            tmp[j] = a[j] - r[m] * a[m - 1 - j]
        for j in range(m):
            a[j] = tmp[j]
    return a


@njit(cache=True, nogil=True)
def coef_to_pacf(a):
    """Inverse Durbin-Levinson.  Returns (pacf, ok); ok is False off the stationary region."""
    k = a.shape[0]
    cur = a.copy()
    r = np.zeros(k)
    tmp = np.zeros(k)
    for m in range(k - 1, -1, -1):
        rm = cur[m]
        r[m] = rm
        if not abs(rm) < 1.0:
            return r, False
        denom = 1.0 - rm * rm
        for j in range(m):
            tmp[j] = (cur[j] + rm * cur[m - 1 - j]) / denom
        for j in range(m):
            cur[j] = tmp[j]
    return r, True


@njit(cache=True, nogil=True)
def unconstrained_to_params(u, p, q):
    """Map R^(p+q) onto stationary AR and invertible MA coefficients."""
    theta = pacf_to_coef(np.tanh(u[:p]))
    phi = -pacf_to_coef(np.tanh(u[p:p + q]))
    return theta, phi


@njit(cache=True, nogil=True)
def _padded(theta, phi, r):
    th = np.zeros(r + 1)  # th[k] = theta_k, k = 1..r
    ph = np.zeros(r + 1)  # ph[k] = phi_k, ph[0] = 1
    ph[0] = 1.0
    for k in range(theta.shape[0]):
        th[k + 1] = theta[k]
    for k in range(phi.shape[0]):
        ph[k + 1] = phi[k]
    return th, ph


@njit(cache=True, nogil=True)
def psi_weights(theta, phi, m):
    """MA(infinity) weights psi_0..psi_m."""
    p = theta.shape[0]
    q = phi.shape[0]
    psi = np.zeros(m + 1)
    psi[0] = 1.0
    for j in range(1, m + 1):
        s = phi[j - 1] if j <= q else 0.0
        for k in range(1, min(j, p) + 1):
            s += theta[k - 1] * psi[j - k]
        psi[j] = s
    return psi


@njit(cache=True, nogil=True)
def autocovariance(theta, phi, m):
    """Theoretical autocovariances gamma(0..m) for unit innovation variance."""
    p = theta.shape[0]
    q = phi.shape[0]
    psi = psi_weights(theta, phi, max(m, q) + 1)
    rhs = np.zeros(max(m, p) + 1)
    for k in range(min(q, rhs.shape[0] - 1) + 1):
        s = 0.0
        for j in range(k, q + 1):
            phj = 1.0 if j == 0 else phi[j - 1]
            s += phj * psi[j - k]
        rhs[k] = s
    A = np.zeros((p + 1, p + 1))
    b = np.zeros(p + 1)
    for k in range(p + 1):
        A[k, k] += 1.0
        for j in range(1, p + 1):
            A[k, abs(k - j)] -= theta[j - 1]
        b[k] = rhs[k]
    g0 = np.linalg.solve(A, b)
    gamma = np.zeros(max(m, p) + 1)
    for k in range(p + 1):
        gamma[k] = g0[k]
    for k in range(p + 1, gamma.shape[0]):
        s = rhs[k]
        for j in range(1, p + 1):
            s += theta[j - 1] * gamma[k - j]
        gamma[k] = s
    return gamma[:m + 1]


@njit(cache=True, nogil=True)
def state_covariance(theta, phi):
    """Unconditional covariance of the Harvey state vector (sigma2 = 1).

    Element i of the state is sum_{l=1}^{r-i} theta_{i+l} x[t-l]
    + sum_{l=0}^{r-1-i} phi_{i+l} e[t-l]; covariances follow from the
    process autocovariances and psi weights.
    """
    p = theta.shape[0]
    q = phi.shape[0]
    r = max(p, q + 1)
    th, ph = _padded(theta, phi, r)
    gamma = autocovariance(theta, phi, r)
    psi = psi_weights(theta, phi, r)
    P = np.zeros((r, r))
    for i in range(r):
        for j in range(i, r):
            s = 0.0
            for l in range(1, r - i + 1):
                ci = th[i + l]
                if ci == 0.0:
                    continue
                for m in range(1, r - j + 1):
                    s += ci * th[j + m] * gamma[abs(l - m)]
                for m in range(l, r - j):
                    s += ci * ph[j + m] * psi[m - l]
            for l in range(0, r - i):
                di = ph[i + l]
                if di == 0.0:
                    continue
                for m in range(1, min(l, r - j) + 1):
                    s += di * th[j + m] * psi[l - m]
                if l < r - j:
                    s += di * ph[j + l]
            P[i, j] = s
            P[j, i] = s
    return P


@njit(cache=True, nogil=True)
def kalman_sums(theta, phi, x):
    """Prediction-error decomposition.

    Returns (sum v^2/F, sum ln F) for unit innovation variance, where v are
    one-step prediction errors and F their variances.
    """
    p = theta.shape[0]
    q = phi.shape[0]
    r = max(p, q + 1)
    th, ph = _padded(theta, phi, r)
    P = state_covariance(theta, phi)
    a = np.zeros(r)
    af = np.zeros(r)
    Pf = np.zeros((r, r))
    M = np.zeros((r, r))
    Pn = np.zeros((r, r))
    ssq = 0.0
    sumlog = 0.0
    steady = False
    n = x.shape[0]
    for t in range(n):
        F = P[0, 0]
        v = x[t] - a[0]
        ssq += v * v / F
        sumlog += math.log(F)
        for i in range(r):
            af[i] = a[i] + P[i, 0] * v / F
        for i in range(r):
            a[i] = th[i + 1] * af[0] + (af[i + 1] if i + 1 < r else 0.0)
        if steady:
            continue
        for i in range(r):
            for j in range(r):
                Pf[i, j] = P[i, j] - P[i, 0] * P[0, j] / F
        for i in range(r):
            for j in range(r):
                M[i, j] = th[i + 1] * Pf[0, j] + (Pf[i + 1, j] if i + 1 < r else 0.0)
        diff = 0.0
        for i in range(r):
            for j in range(r):
                val = M[i, 0] * th[j + 1] + (M[i, j + 1] if j + 1 < r else 0.0) + ph[i] * ph[j]
                d = abs(val - P[i, j])
                if d > diff:
                    diff = d
                Pn[i, j] = val
        for i in range(r):
            for j in range(r):
                P[i, j] = Pn[i, j]
        if diff < _STEADY_TOL:
            steady = True
    return ssq, sumlog


@njit(cache=True, nogil=True)
def concentrated_negloglik(u, p, q, x):
    theta, phi = unconstrained_to_params(u, p, q)
    ssq, sumlog = kalman_sums(theta, phi, x)
    n = x.shape[0]
    return 0.5 * n * (LOG_2PI + 1.0 + math.log(ssq / n)) + 0.5 * sumlog


@njit(cache=True, nogil=True)
def nelder_mead(u0, step, p, q, x, fatol, xatol, maxiter):
    """Plain Nelder-Mead on the concentrated negative log-likelihood.

    Returns (best point, best value, iterations, converged).
    """
    d = u0.shape[0]
    sim = np.empty((d + 1, d))
    fs = np.empty(d + 1)
    for k in range(d + 1):
        for j in range(d):
            sim[k, j] = u0[j]
        if k > 0:
            sim[k, k - 1] += step
        fs[k] = concentrated_negloglik(sim[k], p, q, x)
    centroid = np.empty(d)
    xr = np.empty(d)
    xe = np.empty(d)
    xc = np.empty(d)
    it = 0
    converged = False
    while it < maxiter:
        order = np.argsort(fs)
        sim = sim[order]
        fs = fs[order]
        fspread = fs[d] - fs[0]
        xspread = 0.0
        for k in range(1, d + 1):
            for j in range(d):
                dd = abs(sim[k, j] - sim[0, j])
                if dd > xspread:
                    xspread = dd
        if fspread <= fatol and xspread <= xatol:
            converged = True
            break
        it += 1
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += sim[k, j]
            centroid[j] = s / d
        for j in range(d):
            xr[j] = 2.0 * centroid[j] - sim[d, j]
        fr = concentrated_negloglik(xr, p, q, x)
        if fr < fs[0]:
            for j in range(d):
                xe[j] = 3.0 * centroid[j] - 2.0 * sim[d, j]
            fe = concentrated_negloglik(xe, p, q, x)
            if fe < fr:
                sim[d] = xe
                fs[d] = fe
            else:
                sim[d] = xr
                fs[d] = fr
        elif fr < fs[d - 1]:
            sim[d] = xr
            fs[d] = fr
        else:
            if fr < fs[d]:
                for j in range(d):
                    xc[j] = 1.5 * centroid[j] - 0.5 * sim[d, j]
            else:
                for j in range(d):
                    xc[j] = 0.5 * centroid[j] + 0.5 * sim[d, j]
            fc = concentrated_negloglik(xc, p, q, x)
            if fc < min(fr, fs[d]):
                sim[d] = xc
                fs[d] = fc
            else:
                for k in range(1, d + 1):
                    for j in range(d):
                        sim[k, j] = sim[0, j] + 0.5 * (sim[k, j] - sim[0, j])
                    fs[k] = concentrated_negloglik(sim[k], p, q, x)
    best = np.argmin(fs)
    return sim[best].copy(), fs[best], it, converged


@njit(cache=True, nogil=True)
def _sample_acov(x, m):
    n = x.shape[0]
    c = np.zeros(m + 1)
    for h in range(m + 1):
        s = 0.0
        for t in range(n - h):
            s += x[t] * x[t + h]
        c[h] = s / n
    return c


@njit(cache=True, nogil=True)
def _yule_walker(x, p):
    c = _sample_acov(x, p)
    G = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            G[i, j] = c[abs(i - j)]
    return np.linalg.solve(G, c[1:p + 1])


@njit(cache=True, nogil=True)
def moment_start(x, p, q):
    """Yule-Walker for pure AR, Hannan-Rissanen two-stage regression otherwise."""
    if q == 0:
        if p == 0:
            return np.zeros(0), np.zeros(0)
        if _sample_acov(x, 0)[0] <= 0.0:
            return np.zeros(p), np.zeros(0)
        return _yule_walker(x, p), np.zeros(0)
    n = x.shape[0]
    m = min(max(p + q + 4, 8), n // 4)
    a = _yule_walker(x, m)
    e = np.zeros(n)
    for t in range(m, n):
        s = x[t]
        for j in range(m):
            s -= a[j] * x[t - 1 - j]
        e[t] = s
    start = m + q
    rows = n - start
    d = p + q
    if rows <= d:
        return np.zeros(p), np.zeros(q)
    X = np.empty((rows, d))
    y = np.empty(rows)
    for t in range(start, n):
        i = t - start
        for j in range(p):
            X[i, j] = x[t - 1 - j]
        for j in range(q):
            X[i, p + j] = e[t - 1 - j]
        y[i] = x[t]
    beta = np.linalg.lstsq(X, y)[0]
    return beta[:p].copy(), beta[p:].copy()


@njit(cache=True, nogil=True)
def params_to_unconstrained(theta, phi, clip):
    """Inverse of unconstrained_to_params; off-region parts restart at zero."""
    p = theta.shape[0]
    q = phi.shape[0]
    u = np.zeros(p + q)
    r, ok = coef_to_pacf(theta)
    if ok:
        for k in range(p):
            u[k] = math.atanh(min(max(r[k], -clip), clip))
    r, ok = coef_to_pacf(-phi)
    if ok:
        for k in range(q):
            u[p + k] = math.atanh(min(max(r[k], -clip), clip))
    return u


@njit(cache=True, nogil=True)
def fit_order(x, p, q, fatol, xatol, maxiter):
    """Three-start simplex MLE for one (p, q) order.

    Returns (theta, phi, sigma2, loglik, converged, iterations of the winner).
    """
    n = x.shape[0]
    d = p + q
    if d == 0:
        ssq = 0.0
        for t in range(n):
            ssq += x[t] * x[t]
        s2 = ssq / n
        ll = -0.5 * n * (LOG_2PI + 1.0 + math.log(s2))
        return np.zeros(0), np.zeros(0), s2, ll, True, 0
    th0, ph0 = moment_start(x, p, q)
    u_mom = params_to_unconstrained(th0, ph0, 0.95)
    u_pert = u_mom.copy()
    for k in range(d):
        u_pert[k] += 0.3 if k % 2 == 0 else -0.3
    best_f = np.inf
    best_u = np.zeros(d)
    best_conv = False
    best_it = 0
    for s in range(3):
        if s == 0:
            u0 = np.zeros(d)
        elif s == 1:
            u0 = u_mom
        else:
            u0 = u_pert
        u, f, it, conv = nelder_mead(u0, 0.25, p, q, x, fatol, xatol, maxiter)
        if f < best_f:
            best_f = f
            best_u = u
            best_conv = conv
            best_it = it
    theta, phi = unconstrained_to_params(best_u, p, q)
    ssq, sumlog = kalman_sums(theta, phi, x)
    return theta, phi, ssq / n, -best_f, best_conv, best_it


@njit(cache=True, nogil=True)
def simulate_kernel(theta, phi, chol, z0, e):
    """Propagate the state from a stationary draw chol @ z0 using innovations e."""
    p = theta.shape[0]
    q = phi.shape[0]
    r = max(p, q + 1)
    th, ph = _padded(theta, phi, r)
    alpha = chol @ z0
    nxt = np.empty(r)
    n = e.shape[0]
    out = np.empty(n)
    for t in range(n):
        for i in range(r):
            nxt[i] = th[i + 1] * alpha[0] + (alpha[i + 1] if i + 1 < r else 0.0) + ph[i] * e[t]
        for i in range(r):
            alpha[i] = nxt[i]
        out[t] = alpha[0]
    return out
