"""Cross-validated RMSE benchmark of seven regressors over three dataset variants."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.dummy import DummyRegressor
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import BenchmarkError, DomainError, ValidationError
from ..ringdata import boxcox, boxcox_mle_lambda
from .linear import ElasticNet, GaussianGLM, LinearRegression
from .neighbors import KNNRegressor
from .svr import LinearSVR
from .tree import RandomForest, RegressionTree

KINDS = ("linear", "generalized-linear", "penalized-linear", "svr", "cart", "knn", "random-forest")
TABLE_KINDS = KINDS[:6]
VARIANTS = ("raw", "transformed", "modified")
LABELS = {
    "linear": "Linear Regression",
    "generalized-linear": "Generalized Linear Regression",
    "penalized-linear": "Penalized Linear Regression",
    "svr": "Support Vector Machine",
    "cart": "Classification and Regression Tree",
    "knn": "k-Nearest Neighbor",
    "random-forest": "Random Forest",
}
DEFAULTS = {
    "linear": {},
    "generalized-linear": {},
    "penalized-linear": {"lam": 0.05, "alpha": 0.5},
    "svr": {"C": 1.0, "epsilon": 0.1},
    "cart": {"max_depth": 6, "min_samples_leaf": 5},
    "knn": {"n_neighbors": 6},
    "random-forest": {"n_estimators": 500, "max_features": None, "min_samples_leaf": 5},
    "mean": {},
}
_FACTORIES = {
    "linear": LinearRegression,
    "generalized-linear": GaussianGLM,
    "penalized-linear": ElasticNet,
    "svr": LinearSVR,
    "cart": RegressionTree,
    "knn": KNNRegressor,
    "random-forest": RandomForest,
    "mean": lambda: DummyRegressor(strategy="mean"),
}


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    variant: str = "raw"
    target_name: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValidationError(f"feature rows {X.shape} do not match target length {y.shape[0]}")
        if X.shape[1] != len(self.feature_names):
            raise ValidationError("feature_names length does not match columns")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("dataset contains non-finite values")
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class RegressorSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _FACTORIES:
            raise ValidationError(f"unknown regressor kind {self.kind!r}")
        hp = self.hyperparameters
        if hp.get("n_neighbors", 1) < 1:
            raise ValidationError("K must be >= 1")
        if hp.get("lam", 0) < 0:
            raise ValidationError("penalty must be >= 0")
        if hp.get("n_estimators", 1) < 1:
            raise ValidationError("tree count must be >= 1")

    def resolved(self):
        return {**DEFAULTS[self.kind], **self.hyperparameters}


def make_estimator(spec, seed=0):
    est = _FACTORIES[spec.kind]()
    params = spec.resolved()
    if "random_state" in est.get_params():
        params.setdefault("random_state", seed)
    return est.set_params(**params)


def fit_regressor(spec, train, seed=0):
    """Fit the estimator described by ``spec`` on a :class:`Dataset`."""
    return make_estimator(spec, seed).fit(train.X, train.y)


def build_regression_task(panel, target_id):
    """Predict ``target_id``'s widths from the other series in the same years."""
    if len(panel) < 2:
        raise ValidationError("need at least two series")
    target = panel.get(target_id)
    others = [s for s in panel.series if s.sample_id != target_id]
    X = np.column_stack([s.widths for s in others])
    return Dataset(X, target.widths.copy(), tuple(s.sample_id for s in others), "raw", target_id)


def _filter_columns(X, threshold):
    keep = list(range(X.shape[1]))
    with np.errstate(invalid="ignore", divide="ignore"):
        C = np.abs(np.corrcoef(X, rowvar=False)) if X.shape[1] > 1 else np.ones((1, 1))
    C = np.nan_to_num(C, nan=0.0)
    while len(keep) > 1:
        sub = C[np.ix_(keep, keep)]
        off = sub.copy()
        np.fill_diagonal(off, -np.inf)
        worst = float(off.max())
        if not worst > threshold:
            break
        a, b = divmod(int(np.argmax(off)), len(keep))  # first pair in row-major order
        np.fill_diagonal(sub, 0.0)
        mean_abs = sub.sum(axis=1) / (len(keep) - 1)
        drop = a if mean_abs[a] > mean_abs[b] else (b if mean_abs[b] > mean_abs[a] else max(a, b))
        keep.pop(drop)
    return keep


def correlation_filter(dataset, threshold=0.75):
    """Greedily drop features until no pair has |Pearson r| above ``threshold``.

    From the most correlated pair, the member with the larger mean absolute
    correlation to the remaining features goes; on a tie the later column goes.
    """
    keep = _filter_columns(dataset.X, threshold)
    return Dataset(
        dataset.X[:, keep], dataset.y, tuple(dataset.feature_names[k] for k in keep),
        "modified", dataset.target_name,
    )


def apply_boxcox_variant(dataset):
    """Box-Cox every feature with its own grid-MLE lambda; the target is untouched."""
    cols, lambdas = [], []
    for j, name in enumerate(dataset.feature_names):
        col = dataset.X[:, j]
        if np.any(col <= 0):
            raise DomainError(f"column {name!r} has non-positive values")
        lam = boxcox_mle_lambda(col)
        lambdas.append(lam)
        cols.append(boxcox(col, lam))
    if np.any(dataset.y <= 0):
        raise DomainError(f"target {dataset.target_name!r} has non-positive values")
    out = Dataset(np.column_stack(cols), dataset.y, dataset.feature_names, "transformed", dataset.target_name)
    return out, tuple(lambdas)


class CorrelationFilter(TransformerMixin, BaseEstimator):
    def __init__(self, threshold=0.75):
        self.threshold = threshold

    def fit(self, X, y=None):
        X = check_array(X)
        self.support_ = np.array(_filter_columns(X, self.threshold), dtype=int)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "support_")
        return check_array(X)[:, self.support_]


def fold_indices(n, k, seed):
    """One seeded shuffle of ``range(n)`` split into ``k`` near-equal folds."""
    if k < 2 or n < k:
        raise ValidationError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def _fold_seed(seed, fold):
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(fold),)).generate_state(1, dtype=np.uint32)[0])


def kfold_rmse(spec, dataset, k=10, seed=0, folds=None, threads=1):
    """Pooled k-fold RMSE: sqrt of the mean of all n held-out squared errors."""
    if folds is None:
        folds = fold_indices(dataset.n, k, seed)
    n = dataset.n

    def run(item):
        f, test = item
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        try:
            model = make_estimator(spec, _fold_seed(seed, f)).fit(dataset.X[train], dataset.y[train])
            pred = model.predict(dataset.X[test])
        except Exception as exc:
            raise BenchmarkError(f"{spec.kind} failed on fold {f}: {exc}") from exc
        return float(np.sum((dataset.y[test] - pred) ** 2))

    items = list(enumerate(folds))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sse = list(pool.map(run, items))
    else:
        sse = [run(it) for it in items]
    return math.sqrt(math.fsum(sse) / n)


def tune_knn(dataset, k_grid=range(2, 11), cv_k=10, seed=0, threads=1):
    """Return (best K, [(K, RMSE), ...]); ties go to the smaller K."""
    grid = [int(v) for v in k_grid]
    if not grid:
        raise ValidationError("K grid is empty")
    trace = [(K, kfold_rmse(RegressorSpec("knn", {"n_neighbors": K}), dataset, cv_k, seed, threads=threads))
             for K in grid]
    best = min(trace, key=lambda kv: (kv[1], kv[0]))[0]
    return best, trace


def rf_feature_grid(d):
    return sorted({1, math.ceil(d / 3), math.ceil(d / 2), d})


def tune_random_forest(dataset, cv_k=10, seed=0, threads=1, **hyper):
    trace = []
    for m in rf_feature_grid(dataset.d):
        spec = RegressorSpec("random-forest", {**hyper, "max_features": m})
        trace.append((m, kfold_rmse(spec, dataset, cv_k, seed, threads=threads)))
    best = min(trace, key=lambda kv: (kv[1], kv[0]))[0]
    return best, trace


@dataclass
class BenchmarkReport:
    rmse: dict
    cv_folds: int
    seed: int
    tuning_traces: dict
    baseline_rmse: dict = field(default_factory=dict)
    tuned: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    features: dict = field(default_factory=dict)
    boxcox_lambdas: tuple = ()
    target: str = ""

    def table(self, kinds=TABLE_KINDS):
        return [[self.rmse.get((k, v)) for v in VARIANTS] for k in kinds]

    def table_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["algorithm"] + list(VARIANTS))
        for k, row in zip(TABLE_KINDS, self.table()):
            w.writerow([LABELS[k]] + ["" if v is None else repr(v) for v in row])
        return buf.getvalue()

    def trace_csv(self, name, column):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([column, "rmse"])
        for h, r in self.tuning_traces[name]:
            w.writerow([h, repr(r)])
        return buf.getvalue()

    def to_dict(self):
        return {
            "target": self.target,
            "cv_folds": self.cv_folds,
            "seed": self.seed,
            "rmse": {k: {v: self.rmse.get((k, v)) for v in VARIANTS} for k in KINDS},
            "baseline_mean_rmse": dict(self.baseline_rmse),
            "tuned": self.tuned,
            "tuning_traces": {k: [list(t) for t in v] for k, v in self.tuning_traces.items()},
            "features": self.features,
            "boxcox_lambdas": list(self.boxcox_lambdas),
            "errors": {f"{k}/{v}": msg for (k, v), msg in self.errors.items()},
        }


def run_benchmark(panel, target_id, seed=0, folds=10, threshold=0.75, threads=1, overrides=None):
    """Every kind on every variant, plus KNN and random-forest tuning on the raw data.

    ``overrides`` maps kind -> hyperparameters merged over the defaults.
    """
    overrides = overrides or {}
    raw = build_regression_task(panel, target_id)
    transformed, lambdas = apply_boxcox_variant(raw)
    modified = correlation_filter(raw, threshold)
    data = {"raw": raw, "transformed": transformed, "modified": modified}
    rmse, errors, baseline = {}, {}, {}
    for v, ds in data.items():
        baseline[v] = kfold_rmse(RegressorSpec("mean"), ds, folds, seed)
        for kind in KINDS:
            spec = RegressorSpec(kind, dict(overrides.get(kind, {})))
            try:
                rmse[(kind, v)] = kfold_rmse(spec, ds, folds, seed, threads=threads)
            except BenchmarkError as exc:
                rmse[(kind, v)] = None
                errors[(kind, v)] = str(exc)
    best_k, knn_trace = tune_knn(raw, range(2, 11), folds, seed, threads)
    rf_hyper = {k: v for k, v in overrides.get("random-forest", {}).items() if k != "max_features"}
    best_m, rf_trace = tune_random_forest(raw, folds, seed, threads, **rf_hyper)
    tuned = {
        "knn": {"n_neighbors": best_k, "rmse": dict(knn_trace)[best_k]},
        "random-forest": {"max_features": best_m, "rmse": dict(rf_trace)[best_m]},
    }
    return BenchmarkReport(
        rmse, folds, seed, {"knn": knn_trace, "random-forest": rf_trace},
        baseline, tuned, errors,
        {v: list(ds.feature_names) for v, ds in data.items()}, lambdas, target_id,
    )


__all__ = [
    "BenchmarkReport", "CorrelationFilter", "Dataset", "KINDS", "LABELS", "RegressorSpec",
    "TABLE_KINDS", "VARIANTS", "apply_boxcox_variant", "build_regression_task",
    "correlation_filter", "fit_regressor", "fold_indices", "kfold_rmse", "make_estimator",
    "rf_feature_grid", "run_benchmark", "tune_knn", "tune_random_forest",
]
