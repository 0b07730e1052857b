"""Cross-validated regression benchmark with self-contained estimators."""

from .benchmark import *  # noqa: F401,F403
from .benchmark import __all__ as _bench_all
from .linear import ElasticNet, GaussianGLM, LinearRegression, lstsq_qr
from .neighbors import KNNRegressor
from .svr import LinearSVR
from .tree import RandomForest, RegressionTree

__all__ = list(_bench_all) + [
    "ElasticNet", "GaussianGLM", "KNNRegressor", "LinearRegression", "LinearSVR",
    "RandomForest", "RegressionTree", "lstsq_qr",
]
