import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data


class KNNRegressor(RegressorMixin, BaseEstimator):
    """Unweighted mean of the ``n_neighbors`` nearest training targets.

    Columns are standardized with training means and standard deviations
    before Euclidean distances are taken.  Distance ties go to the lower
    training row index.
    """

    def __init__(self, n_neighbors=6):
        self.n_neighbors = n_neighbors

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        if self.n_neighbors > X.shape[0]:
            raise ValueError(f"n_neighbors={self.n_neighbors} exceeds {X.shape[0]} training rows")
        self.x_mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.x_scale_ = np.where(sd > 0, sd, 1.0)
        self.train_ = (X - self.x_mean_) / self.x_scale_
        self.y_ = y.copy()
        return self

    def kneighbors(self, X):
        check_is_fitted(self, "train_")
        X = validate_data(self, X, reset=False)
        Q = (X - self.x_mean_) / self.x_scale_
        d2 = np.sum((Q[:, None, :] - self.train_[None, :, :]) ** 2, axis=2)
        idx = np.argsort(d2, axis=1, kind="stable")[:, : self.n_neighbors]
        return np.sqrt(np.take_along_axis(d2, idx, axis=1)), idx

    def predict(self, X):
        _, idx = self.kneighbors(X)
        return self.y_[idx].mean(axis=1)
