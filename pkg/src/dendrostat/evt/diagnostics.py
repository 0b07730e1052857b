"""Goodness-of-fit diagnostics for a fitted GEV model."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .. import svg
from ..exceptions import ValidationError
from .distribution import gev_cdf, gev_pdf, gev_quantile, return_level, return_level_gradient


@dataclass(frozen=True, eq=False)
class DiagnosticBundle:
    pp: np.ndarray  # (n, 2): plotting position, fitted cdf at order statistic
    qq: np.ndarray  # (n, 2): fitted quantile, order statistic
    return_periods: np.ndarray
    return_levels: np.ndarray
    return_lower: np.ndarray | None
    return_upper: np.ndarray | None
    empirical_periods: np.ndarray
    sorted_data: np.ndarray
    hist_edges: np.ndarray
    hist_density: np.ndarray
    density_x: np.ndarray
    density_y: np.ndarray
    warnings: tuple = ()


def plotting_positions(n):
    return np.arange(1, n + 1) / (n + 1.0)


def diagnostics(fit, data, level=0.95, n_periods=51, n_density=200):
    """Build the four diagnostic panels' data for ``fit`` applied to ``data``."""
    x = np.sort(np.asarray(data, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise ValidationError("need at least two observations")
    params = fit.params
    pos = plotting_positions(n)
    pp = np.column_stack([pos, gev_cdf(params, x)])
    qq = np.column_stack([gev_quantile(params, pos), x])

    periods = np.logspace(np.log10(1.1), 3.0, n_periods)
    levels = return_level(params, periods)
    notes = []
    lo = hi = None
    if fit.cov is not None:
        J = return_level_gradient(params, periods)
        var = np.einsum("ij,jk,ik->i", J, fit.cov, J)
        half = stats.norm.ppf(0.5 + level / 2.0) * np.sqrt(np.clip(var, 0.0, None))
        lo, hi = levels - half, levels + half
    else:
        notes.append("fit has no covariance; return-level band omitted")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)

    edges = np.histogram_bin_edges(x, bins="fd")
    dens, _ = np.histogram(x, bins=edges, density=True)
    span = x[-1] - x[0]
    gx = np.linspace(x[0] - 0.1 * span, x[-1] + 0.1 * span, n_density)
    gy = gev_pdf(params, gx)
    return DiagnosticBundle(
        pp, qq, periods, levels, lo, hi,
        1.0 / (1.0 - pos), x, edges, dens, gx, gy, tuple(notes),
    )


def bundle_csv(bundle):
    """Long-format CSV: panel, x, y, with band bounds where defined."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["panel", "x", "y", "lower", "upper"])
    for a, b in bundle.pp:
        w.writerow(["probability", repr(float(a)), repr(float(b)), "", ""])
    for a, b in bundle.qq:
        w.writerow(["quantile", repr(float(a)), repr(float(b)), "", ""])
    for k, (t, r) in enumerate(zip(bundle.return_periods, bundle.return_levels)):
        lo = "" if bundle.return_lower is None else repr(float(bundle.return_lower[k]))
        hi = "" if bundle.return_upper is None else repr(float(bundle.return_upper[k]))
        w.writerow(["return_level", repr(float(t)), repr(float(r)), lo, hi])
    for t, v in zip(bundle.empirical_periods, bundle.sorted_data):
        w.writerow(["return_empirical", repr(float(t)), repr(float(v)), "", ""])
    for a, b, h in zip(bundle.hist_edges[:-1], bundle.hist_edges[1:], bundle.hist_density):
        w.writerow(["histogram", repr(float(a)), repr(float(h)), repr(float(a)), repr(float(b))])
    for a, b in zip(bundle.density_x, bundle.density_y):
        w.writerow(["density", repr(float(a)), repr(float(b)), "", ""])
    return buf.getvalue()


def bundle_svg(bundle, title=""):
    diag = [0.0, 1.0]
    pp = svg.Panel("Probability plot", "Empirical", "Model").line(diag, diag, "gray", "4,3")
    pp.points(bundle.pp[:, 0], bundle.pp[:, 1])
    lim = [float(bundle.qq.min()), float(bundle.qq.max())]
    qq = svg.Panel("Quantile plot", "Model", "Empirical").line(lim, lim, "gray", "4,3")
    qq.points(bundle.qq[:, 0], bundle.qq[:, 1])
    rl = svg.Panel("Return level plot", "Return period", "Return level", logx=True)
    if bundle.return_lower is not None:
        rl.band(bundle.return_periods, bundle.return_lower, bundle.return_upper)
    rl.line(bundle.return_periods, bundle.return_levels)
    rl.points(bundle.empirical_periods, bundle.sorted_data)
    de = svg.Panel("Density plot", "z", "f(z)").bars(bundle.hist_edges, bundle.hist_density)
    de.line(bundle.density_x, bundle.density_y)
    if title:
        pp.title = f"{title}: probability plot"
    return svg.figure([pp, qq, rl, de], ncols=2)
