"""Ring-width series containers and the operations that act on them."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import AlignmentError, DomainError, GapError, LengthError, ParseError, ValidationError

MISSING = {"", "NA", "na", "NaN", "nan"}
TRANSFORMS = ("logdiff", "standardize", "none")
_TRANSFORM_ALIASES = {"log-difference": "logdiff", "log_difference": "logdiff", "logdiff": "logdiff",
                      "standardize": "standardize", "none": "none"}

# (id, first ring, last ring) for the nine samples of a site chronology.
# Synthetic panels borrow these labels and spans.
SITE_SPANS = (
    ("THO-A01B", 1810, 1975),
    ("THO-A02A", 1819, 1975),
    ("THO-A03A", 1822, 1975),
    ("THO-B01A", 1820, 1976),
    ("THO-B02B", 1820, 1976),
    ("THO-B03B", 1822, 1976),
    ("THO-B04A", 1834, 1976),
    ("THO-B05A", 1835, 1976),
    ("THO-O01C", 1832, 1975),
)
SITE_IDS = tuple(s[0] for s in SITE_SPANS)


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RingSeries:
    sample_id: str
    first_year: int
    widths: np.ndarray

    def __post_init__(self):
        w = _frozen(self.widths).ravel()
        if w.size == 0:
            raise LengthError(f"series {self.sample_id!r} has no rings")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise DomainError(f"series {self.sample_id!r} has non-positive or non-finite widths")
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "first_year", int(self.first_year))

    @property
    def last_year(self):
        return self.first_year + len(self.widths) - 1

    @property
    def years(self):
        return np.arange(self.first_year, self.last_year + 1)

    def __len__(self):
        return len(self.widths)

    def __eq__(self, other):
        if not isinstance(other, RingSeries):
            return NotImplemented
        return (
            self.sample_id == other.sample_id
            and self.first_year == other.first_year
            and np.array_equal(self.widths, other.widths)
        )

    def window(self, start, end):
        if start < self.first_year or end > self.last_year or end < start:
            raise ValidationError(f"window {start}-{end} outside {self.sample_id} span")
        a = start - self.first_year
        return RingSeries(self.sample_id, start, self.widths[a:a + end - start + 1])


@dataclass(frozen=True, eq=False)
class AlignedPanel:
    start_year: int
    end_year: int
    series: tuple

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        ids = [s.sample_id for s in self.series]
        if len(set(ids)) != len(ids):
            raise ValidationError("sample ids must be unique within a panel")
        for s in self.series:
            if s.first_year != self.start_year or s.last_year != self.end_year:
                raise ValidationError(f"series {s.sample_id!r} does not span {self.start_year}-{self.end_year}")

    @property
    def ids(self):
        return [s.sample_id for s in self.series]

    @property
    def n_years(self):
        return self.end_year - self.start_year + 1

    def __len__(self):
        return len(self.series)

    def __eq__(self, other):
        if not isinstance(other, AlignedPanel):
            return NotImplemented
        return (self.start_year, self.end_year) == (other.start_year, other.end_year) and self.series == other.series

    def get(self, sample_id):
        for s in self.series:
            if s.sample_id == sample_id:
                return s
        raise KeyError(f"no series {sample_id!r} in panel (have {', '.join(self.ids)})")

    def matrix(self):
        """Widths as an (n_years, n_series) array."""
        return np.column_stack([s.widths for s in self.series])


@dataclass(frozen=True, eq=False)
class IndexSeries:
    source_id: str
    values: np.ndarray
    method: str

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


def parse_panel(text):
    """Parse ``year,<id1>,<id2>,...`` ring-width CSV into a list of series.

    Empty or ``NA`` cells mean no ring.  Each column is trimmed to its
    non-missing span; a missing value inside that span is a :class:`GapError`.
    """
    reader = csv.reader(io.StringIO(text))
    header = None
    header_line = 0
    for lineno, row in enumerate(reader, start=1):
        if any(cell.strip() for cell in row):
            header, header_line = [c.strip() for c in row], lineno
            break
    if header is None:
        raise ParseError("missing header row", 1)
    if len(header) < 2 or header[0].lower() != "year":
        raise ParseError("header must be 'year,<id1>,<id2>,...'", header_line)
    ids = header[1:]
    if any(not i for i in ids):
        raise ParseError("empty sample id in header", header_line)
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate sample id in header", header_line)

    years, cols, lines = [], [[] for _ in ids], []
    for lineno, row in enumerate(reader, start=header_line + 1):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            year = int(row[0].strip())
        except ValueError:
            raise ParseError(f"bad year {row[0]!r}", lineno) from None
        if years and year != years[-1] + 1:
            raise ParseError(f"year {year} does not follow {years[-1]}", lineno)
        years.append(year)
        lines.append(lineno)
        for k, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell in MISSING:
                cols[k].append(None)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"bad width {cell!r} for {ids[k]}", lineno) from None
            if not math.isfinite(v) or v <= 0:
                raise DomainError(f"line {lineno}: width {cell} for {ids[k]} must be positive")
            cols[k].append(v)

    out = []
    if not years:
        return out
    for sid, col in zip(ids, cols):
        present = [i for i, v in enumerate(col) if v is not None]
        if not present:
            raise ParseError(f"series {sid!r} has no rings")
        a, b = present[0], present[-1]
        for i in range(a, b + 1):
            if col[i] is None:
                raise GapError(sid, years[i], lines[i])
        out.append(RingSeries(sid, years[a], col[a:b + 1]))
    return out


def write_panel(series):
    """Serialize series (aligned or not) to the CSV format read by :func:`parse_panel`."""
    series = list(series.series if isinstance(series, AlignedPanel) else series)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["year"] + [s.sample_id for s in series])
    if not series:
        return buf.getvalue()
    y0 = min(s.first_year for s in series)
    y1 = max(s.last_year for s in series)
    for year in range(y0, y1 + 1):
        row = [str(year)]
        for s in series:
            if s.first_year <= year <= s.last_year:
                row.append(repr(float(s.widths[year - s.first_year])))
            else:
                row.append("NA")
        w.writerow(row)
    return buf.getvalue()


def align_common_interval(series):
    """Truncate every series to the years they all cover."""
    if isinstance(series, AlignedPanel):
        series = series.series
    series = list(series)
    if not series:
        raise ValidationError("cannot align an empty collection")
    latest_start = max(series, key=lambda s: s.first_year)
    earliest_end = min(series, key=lambda s: s.last_year)
    start, end = latest_start.first_year, earliest_end.last_year
    if start > end:
        raise AlignmentError(
            f"no common interval: {latest_start.sample_id} starts {start} "
            f"after {earliest_end.sample_id} ends {end}"
        )
    return AlignedPanel(start, end, tuple(s.window(start, end) for s in series))


def panel_summary(series):
    """JSON-ready per-series statistics plus the common interval."""
    series = list(series.series if isinstance(series, AlignedPanel) else series)
    entries = [
        {
            "id": s.sample_id,
            "first_year": s.first_year,
            "last_year": s.last_year,
            "n_rings": len(s),
            "mean": float(np.mean(s.widths)),
            "sd": float(np.std(s.widths, ddof=1)) if len(s) > 1 else 0.0,
        }
        for s in series
    ]
    common = None
    if series:
        try:
            p = align_common_interval(series)
            common = {"start_year": p.start_year, "end_year": p.end_year, "n_years": p.n_years}
        except AlignmentError:
            common = None
    return {"n_series": len(series), "series": entries, "common_interval": common}


def stationary_transform(series, method="logdiff"):
    """Turn raw widths into a stationary index series.

    ``logdiff`` gives ln w[t+1] - ln w[t]; ``standardize`` gives z-scores with
    the sample (n - 1) standard deviation; ``none`` copies.
    """
    try:
        method = _TRANSFORM_ALIASES[method]
    except KeyError:
        raise ValidationError(f"unknown transform {method!r}; choose from {', '.join(TRANSFORMS)}") from None
    w = np.asarray(series.widths, dtype=float)
    if method == "logdiff":
        if len(w) < 2:
            raise LengthError("log-difference needs at least 2 rings")
        values = np.diff(np.log(w))
    elif method == "standardize":
        if len(w) < 2:
            raise LengthError("standardize needs at least 2 rings")
        sd = np.std(w, ddof=1)
        if sd == 0:
            raise DomainError(f"series {series.sample_id!r} is constant")
        values = (w - w.mean()) / sd
    else:
        values = w.copy()
    return IndexSeries(series.sample_id, values, method)


def _positive(values, name="values"):
    y = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise DomainError(f"{name} must be strictly positive for Box-Cox")
    return y


def boxcox(values, lmbda):
    y = _positive(values)
    if lmbda == 0:
        return np.log(y)
    # expm1 keeps the small-lambda branch continuous with the log case
    return np.expm1(lmbda * np.log(y)) / lmbda


def inv_boxcox(values, lmbda):
    z = np.asarray(values, dtype=float)
    if lmbda == 0:
        return np.exp(z)
    return np.exp(np.log1p(lmbda * z) / lmbda)


def boxcox_loglik(values, lmbda):
    """Profile log-likelihood of lambda: normal fit to the transform plus the Jacobian."""
    y = _positive(values)
    z = boxcox(y, lmbda)
    n = y.size
    return -0.5 * n * np.log(np.var(z)) + (lmbda - 1.0) * np.sum(np.log(y))


def boxcox_grid():
    return np.arange(-200, 201) / 100.0


def boxcox_mle_lambda(values, grid=None):
    """Grid lambda maximizing :func:`boxcox_loglik`; ties go to the lambda nearest 1."""
    y = _positive(values)
    if y.size < 3:
        raise LengthError("Box-Cox lambda selection needs at least 3 values")
    grid = boxcox_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.all(y == y[0]):
        return 1.0
    ll = np.array([boxcox_loglik(y, lam) for lam in grid])
    best = np.max(ll)
    tied = grid[ll >= best - 1e-12 * max(1.0, abs(best))]
    return float(tied[np.argmin(np.abs(tied - 1.0))])


class BoxCoxTransformer(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Column-wise Box-Cox with lambda chosen per column by grid MLE.

    Parameters
    ----------
    lmbda : float or None
        Fixed lambda for every column; ``None`` selects it from the data.
    """

    def __init__(self, lmbda=None):
        self.lmbda = lmbda

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=3)
        for j in range(X.shape[1]):
            _positive(X[:, j], f"column {j}")
        if self.lmbda is None:
            self.lambdas_ = np.array([boxcox_mle_lambda(X[:, j]) for j in range(X.shape[1])])
        else:
            self.lambdas_ = np.full(X.shape[1], float(self.lmbda))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "lambdas_")
        X = check_array(X)
        return np.column_stack([boxcox(X[:, j], lam) for j, lam in enumerate(self.lambdas_)])

    def inverse_transform(self, X):
        check_is_fitted(self, "lambdas_")
        X = check_array(X)
        return np.column_stack([inv_boxcox(X[:, j], lam) for j, lam in enumerate(self.lambdas_)])


def synth_panel(seed, n_series=9, n_years=141, start_year=1835):
    """Synthetic stand-in for a site chronology panel.

    Log widths are a shared climate AR(1) signal plus a per-tree AR(1) level,
    a declining age trend and white noise.  The series stay positive and
    share the climate signal while their level drifts with age.
    """
    if n_series < 1 or n_years < 10:
        raise ValidationError("need n_series >= 1 and n_years >= 10")
    rng = np.random.default_rng(seed)
    climate = _ar1(rng, n_years, 0.4, 0.25)
    ids = list(SITE_IDS[:n_series]) + [f"SYN-{k:02d}" for k in range(len(SITE_IDS), n_series)]
    out = []
    for sid in ids:
        age0 = rng.uniform(5.0, 40.0)
        age = age0 + np.arange(n_years)
        log_w = (
            rng.normal(1.0, 0.2)
            - rng.uniform(0.3, 0.6) * np.log(age / age0)
            + climate
            + _ar1(rng, n_years, 0.7, 0.08)
            + rng.normal(0.0, 0.08, n_years)
        )
        out.append(RingSeries(sid, start_year, np.exp(log_w)))
    return AlignedPanel(start_year, start_year + n_years - 1, tuple(out))


def synth_site_series(seed):
    """Nine unaligned synthetic series carrying the ``SITE_SPANS`` ids and ring spans."""
    y0 = min(s[1] for s in SITE_SPANS)
    y1 = max(s[2] for s in SITE_SPANS)
    full = synth_panel(seed, len(SITE_SPANS), y1 - y0 + 1, start_year=y0)
    return [full.get(sid).window(a, b) for sid, a, b in SITE_SPANS]


def _ar1(rng, n, coef, sd):
    e = rng.normal(0.0, sd, n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1.0 - coef * coef)
    for t in range(1, n):
        x[t] = coef * x[t - 1] + e[t]
    return x
