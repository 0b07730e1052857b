import itertools
import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from dendrostat.exceptions import BenchmarkError, DomainError, RankError, ValidationError
from dendrostat.mlbench import (
    KINDS,
    TABLE_KINDS,
    VARIANTS,
    CorrelationFilter,
    Dataset,
    ElasticNet,
    GaussianGLM,
    KNNRegressor,
    LinearRegression,
    LinearSVR,
    RandomForest,
    RegressionTree,
    RegressorSpec,
    apply_boxcox_variant,
    build_regression_task,
    correlation_filter,
    fit_regressor,
    fold_indices,
    kfold_rmse,
    rf_feature_grid,
    run_benchmark,
    tune_knn,
)
from dendrostat.ringdata import synth_panel

from conftest import load_schema
from oracles import knn_bruteforce


def dataset(X, y, variant="raw"):
    X = np.asarray(X, dtype=float)
    return Dataset(X, y, tuple(f"x{j}" for j in range(X.shape[1])), variant)


@pytest.fixture(scope="module")
def task():
    return build_regression_task(synth_panel(0, 9, 141), "THO-A01B")


def test_task_shape(task):
    assert (task.n, task.d) == (141, 8)
    assert "THO-A01B" not in task.feature_names
    small = build_regression_task(synth_panel(1, 2, 30), "THO-A02A")
    assert small.d == 1 and small.feature_names == ("THO-A01B",)
    with pytest.raises(KeyError):
        build_regression_task(synth_panel(1, 3, 30), "NOPE")


def test_dataset_validation():
    with pytest.raises(ValidationError):
        dataset(np.ones((3, 2)), np.ones(4))
    with pytest.raises(ValidationError):
        dataset([[np.nan], [1.0]], [1.0, 2.0])
    with pytest.raises(ValidationError):
        RegressorSpec("knn", {"n_neighbors": 0})
    with pytest.raises(ValidationError):
        RegressorSpec("boosting")


def test_filter_drops_one_of_identical_columns():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=50), rng.normal(size=50)
    out = correlation_filter(dataset(np.column_stack([a, a, b]), rng.normal(size=50)))
    assert out.d == 2 and out.variant == "modified"
    assert out.feature_names == ("x0", "x2")


def test_filter_keeps_orthogonal_columns():
    Q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(40, 4)))
    out = correlation_filter(dataset(Q - Q.mean(axis=0), np.zeros(40)))
    assert out.feature_names == ("x0", "x1", "x2", "x3")


def _reference_filter(X, threshold):
    keep = list(range(X.shape[1]))
    C = np.abs(np.corrcoef(X, rowvar=False))
    while len(keep) > 1:
        pairs = [(C[i, j], -ii, -jj) for (ii, i), (jj, j) in itertools.combinations(enumerate(keep), 2)]
        worst, na, nb = max(pairs)
        if worst <= threshold:
            break
        a, b = -na, -nb
        mean_abs = [sum(C[keep[r], keep[c]] for c in range(len(keep)) if c != r) / (len(keep) - 1) for r in (a, b)]
        keep.pop(a if mean_abs[0] > mean_abs[1] else b)
    return keep


def test_filter_four_column_case():
    rng = np.random.default_rng(2)
    z = rng.normal(size=(500, 2))
    X = np.column_stack([
        z[:, 0],
        z[:, 0] + 0.3 * rng.normal(size=500),
        z[:, 0] + 0.5 * z[:, 1] + 0.2 * rng.normal(size=500),
        z[:, 1],
    ])
    out = correlation_filter(dataset(X, np.zeros(500)))
    kept = [int(n[1:]) for n in out.feature_names]
    C = np.abs(np.corrcoef(X[:, kept], rowvar=False))
    assert all(C[i, j] <= 0.75 for i, j in itertools.combinations(range(len(kept)), 2))
    assert kept == _reference_filter(X, 0.75)
    full = np.abs(np.corrcoef(X, rowvar=False))
    assert any(full[i, j] > 0.75 for i, j in itertools.combinations(range(4), 2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6), st.floats(0.3, 0.95))
def test_filter_output_has_no_pair_above_threshold(seed, d, threshold):
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(60, 2))
    X = base @ rng.normal(size=(2, d)) + 0.3 * rng.normal(size=(60, d))
    out = correlation_filter(dataset(X, np.zeros(60)), threshold)
    kept = [int(n[1:]) for n in out.feature_names]
    assert kept == _reference_filter(X, threshold)
    if len(kept) > 1:
        C = np.abs(np.corrcoef(X[:, kept], rowvar=False))
        assert np.max(C[np.triu_indices(len(kept), 1)]) <= threshold
    tr = CorrelationFilter(threshold).fit(X)
    assert list(tr.support_) == kept


def test_boxcox_variant(task):
    out, lambdas = apply_boxcox_variant(task)
    assert out.X.shape == task.X.shape and np.all(np.isfinite(out.X))
    assert out.variant == "transformed" and np.array_equal(out.y, task.y)
    assert len(lambdas) == task.d
    rng = np.random.default_rng(4)
    ln = dataset(np.column_stack([rng.lognormal(size=3000), rng.uniform(1, 2, 3000)]), np.ones(3000))
    assert abs(apply_boxcox_variant(ln)[1][0]) <= 0.15
    bad = dataset([[1.0, 2.0], [0.0, 1.0], [2.0, 3.0]], [1.0, 1.0, 1.0])
    with pytest.raises(DomainError, match="x0"):
        apply_boxcox_variant(bad)


def test_fold_indices_partition():
    folds = fold_indices(141, 10, 3)
    assert len(folds) == 10 and {len(f) for f in folds} == {14, 15}
    assert sorted(np.concatenate(folds)) == list(range(141))
    with pytest.raises(ValidationError):
        fold_indices(5, 6, 0)
    with pytest.raises(ValidationError):
        fold_indices(5, 1, 0)


def test_perfect_predictor_has_zero_rmse():
    X = np.random.default_rng(0).normal(size=(60, 2))
    y = 2 * X[:, 0] - X[:, 1] + 3
    assert kfold_rmse(RegressorSpec("linear"), dataset(X, y)) < 1e-12


def test_mean_predictor_on_standardized_target(task):
    y = (task.y - task.y.mean()) / task.y.std()
    r = kfold_rmse(RegressorSpec("mean"), Dataset(task.X, y, task.feature_names))
    assert abs(r - 1) < 0.1


def test_kfold_is_deterministic(task):
    spec = RegressorSpec("random-forest", {"n_estimators": 20})
    assert kfold_rmse(spec, task, 5, 9) == kfold_rmse(spec, task, 5, 9)
    assert kfold_rmse(spec, task, 5, 9, threads=3) == kfold_rmse(spec, task, 5, 9)


def test_kfold_permutation_contract(task):
    perm = np.random.default_rng(5).permutation(task.n)
    inv = np.argsort(perm)
    folds = fold_indices(task.n, 10, 0)
    moved = Dataset(task.X[perm], task.y[perm], task.feature_names)
    spec = RegressorSpec("linear")
    a = kfold_rmse(spec, task, folds=folds)
    b = kfold_rmse(spec, moved, folds=[inv[f] for f in folds])
    assert a == pytest.approx(b, rel=1e-12)


def test_fold_failure_names_fold_and_kind():
    X = np.random.default_rng(0).normal(size=(30, 1))
    with pytest.raises(BenchmarkError, match=r"linear failed on fold \d"):
        kfold_rmse(RegressorSpec("linear"), dataset(np.column_stack([X, X]), X[:, 0]), 3)


def test_ols_recovers_weights_and_refuses_rank_deficiency():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 3))
    w = np.array([1.5, -2.0, 0.25])
    m = LinearRegression().fit(X, X @ w + 0.7)
    assert np.max(np.abs(m.coef_ - w)) < 1e-8 and abs(m.intercept_ - 0.7) < 1e-8
    with pytest.raises(RankError):
        LinearRegression().fit(np.column_stack([X, X[:, 0] * 2]), X @ w)
    with pytest.raises(RankError):
        LinearRegression().fit(X[:3], w)


def test_glm_equals_ols_bitwise(task):
    a = LinearRegression().fit(task.X, task.y)
    b = GaussianGLM().fit(task.X, task.y)
    assert np.array_equal(a.predict(task.X), b.predict(task.X))


def test_elastic_net_without_penalty_is_ols():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(200, 4))
    y = X @ [1, -1, 0.5, 2] + rng.normal(size=200)
    en = ElasticNet(lam=0.0, tol=1e-12).fit(X, y)
    ols = LinearRegression().fit(X, y)
    assert np.max(np.abs(en.coef_ - ols.coef_)) < 1e-6
    shrunk = ElasticNet(lam=0.5, alpha=1.0).fit(X, y)
    assert np.sum(np.abs(shrunk.coef_)) < np.sum(np.abs(ols.coef_))


def test_svr_fits_linear_signal():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(150, 2))
    y = 3 * X[:, 0] - X[:, 1] + 10 + 0.01 * rng.normal(size=150)
    m = LinearSVR(C=10.0, epsilon=0.01).fit(X, y)
    assert np.max(np.abs(m.coef_ - [3, -1])) < 0.05
    assert abs(m.intercept_ - 10) < 0.05
    assert np.all(np.abs(m.dual_coef_) <= 10.0 + 1e-12)


def test_knn_full_neighbourhood_is_mean():
    rng = np.random.default_rng(9)
    X, y = rng.normal(size=(25, 3)), rng.normal(size=25)
    pred = KNNRegressor(n_neighbors=25).fit(X, y).predict(rng.normal(size=(5, 3)))
    assert np.allclose(pred, y.mean(), rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        KNNRegressor(n_neighbors=26).fit(X, y)


def test_knn_matches_bruteforce_oracle(task):
    rng = np.random.default_rng(10)
    Q = task.X[rng.integers(0, task.n, 50)] * rng.uniform(0.9, 1.1, (50, task.d))
    for k in (1, 6, 10):
        got = KNNRegressor(n_neighbors=k).fit(task.X, task.y).predict(Q)
        assert np.array_equal(got, knn_bruteforce(task.X, task.y, Q, k))


def test_knn_distance_ties_go_to_lower_row():
    X = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    _, idx = KNNRegressor(n_neighbors=2).fit(X, np.arange(4.0)).kneighbors([[0.0]])
    assert list(idx[0]) == [0, 1]


def test_tune_knn_trace(task):
    best, trace = tune_knn(task)
    assert [k for k, _ in trace] == list(range(2, 11))
    assert dict(trace)[best] == min(r for _, r in trace)


def test_small_k_wins_on_nearest_cluster_labels():
    rng = np.random.default_rng(11)
    centres = rng.uniform(-10, 10, size=(40, 2))
    X = np.repeat(centres, 3, axis=0) + 0.01 * rng.normal(size=(120, 2))
    y = np.repeat(rng.normal(0, 5, 40), 3)
    best, _ = tune_knn(dataset(X, y), range(2, 11), 10, 0)
    assert best == 2


def test_forest_with_one_full_tree_is_the_tree(task):
    rf = RandomForest(n_estimators=1, max_features=task.d, bootstrap=False, max_depth=6).fit(task.X, task.y)
    tree = RegressionTree(max_depth=6, min_samples_leaf=5).fit(task.X, task.y)
    assert np.array_equal(rf.predict(task.X), tree.predict(task.X))


def test_forest_is_seeded(task):
    a = RandomForest(n_estimators=30, random_state=4).fit(task.X, task.y).predict(task.X)
    b = RandomForest(n_estimators=30, random_state=4).fit(task.X, task.y).predict(task.X)
    c = RandomForest(n_estimators=30, random_state=5).fit(task.X, task.y).predict(task.X)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_cart_is_piecewise_constant(task):
    tree = RegressionTree(max_depth=4).fit(task.X, task.y)
    feature, threshold = tree.tree_[0], tree.tree_[1]
    x = task.X[:5].copy()
    base = tree.predict(x)
    for j in range(task.d):
        cuts = np.sort(threshold[feature == j])
        for row in x:
            lo = cuts[cuts < row[j]].max(initial=row[j] - 2.0)
            row[j] = 0.5 * (lo + row[j])
    assert np.array_equal(tree.predict(x), base)


def test_estimators_clone_and_expose_params():
    for est in (LinearRegression(), GaussianGLM(), ElasticNet(), LinearSVR(), RegressionTree(),
                KNNRegressor(), RandomForest()):
        assert clone(est).get_params() == est.get_params()
    assert fit_regressor(RegressorSpec("knn", {"n_neighbors": 3}), dataset(np.eye(4), np.arange(4.0))).n_neighbors == 3


def test_rf_feature_grid():
    assert rf_feature_grid(8) == [1, 3, 4, 8]
    assert rf_feature_grid(1) == [1]


@pytest.fixture(scope="module")
def report():
    return run_benchmark(synth_panel(0, 9, 141), "THO-A01B", seed=0)


def test_report_shape(report):
    table = report.table()
    assert len(table) == 6 and all(len(r) == 3 for r in table)
    assert all(np.isfinite(v) and v >= 0 for r in table for v in r)
    assert set(report.rmse) == {(k, v) for k in KINDS for v in VARIANTS}
    assert len(report.tuning_traces["knn"]) == 9
    assert [m for m, _ in report.tuning_traces["random-forest"]] == [1, 3, 4, 8]
    assert report.table_csv().splitlines()[0] == "algorithm,raw,transformed,modified"
    assert len(report.table_csv().splitlines()) == 1 + len(TABLE_KINDS)


def test_report_linear_equals_glm_and_forest_beats_mean(report):
    for v in VARIANTS:
        assert abs(report.rmse[("linear", v)] - report.rmse[("generalized-linear", v)]) <= 1e-12
        assert report.rmse[("random-forest", v)] < report.baseline_rmse[v]


def test_report_json_schema(report):
    data = json.loads(json.dumps(report.to_dict()))
    jsonschema.validate(data, load_schema("report"))
    assert data["tuned"]["knn"]["n_neighbors"] in range(2, 11)


def test_single_failing_kind_leaves_partial_report():
    panel = synth_panel(3, 3, 40)
    duplicated = type(panel)(panel.start_year, panel.end_year, (
        panel.series[0], panel.series[1], type(panel.series[1])("COPY", panel.start_year, panel.series[1].widths),
    ))
    rep = run_benchmark(duplicated, "THO-A01B", folds=4,
                        overrides={"random-forest": {"n_estimators": 10}})
    assert rep.rmse[("linear", "raw")] is None
    assert ("linear", "raw") in rep.errors
    assert rep.rmse[("knn", "raw")] is not None
    assert rep.rmse[("linear", "modified")] is not None
