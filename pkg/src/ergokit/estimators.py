"""scikit-learn style wrappers for the array-shaped steps of the pipeline.

Levels are passed as a 1-D array or a single-column 2-D array.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import spectral
from .errors import NoIntersection
from .numerics import loglog_slope


def _levels(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    X = check_array(X, ensure_min_samples=3)
    if X.shape[1] != 1:
        raise ValueError(f"expected one column of levels, got {X.shape[1]}")
    return X[:, 0]


class SpectralUnfolder(TransformerMixin, BaseEstimator):
    """Learn the smooth cumulative level count and map levels through it.

    Parameters
    ----------
    degree : int
        Polynomial degree of the cumulative-count fit.
    """

    def __init__(self, degree=10):
        self.degree = degree

    def fit(self, X, y=None):
        e = _levels(X)
        u = spectral.unfold(e, self.degree)
        self.fit_ = u.fit
        self.bounds_ = u.bounds
        raw = np.sort(u.fit(2.0 * (np.sort(e) - u.bounds[0]) / (u.bounds[1] - u.bounds[0]) - 1.0))
        self.spacing_ = float(np.mean(np.diff(raw)))
        self.r_ = spectral.r_statistic(e)
        return self

    def transform(self, X):
        check_is_fitted(self, "fit_")
        e = _levels(X)
        lo, hi = self.bounds_
        x = 2.0 * (e - lo) / (hi - lo) - 1.0
        return np.sort(self.fit_(x)) / self.spacing_


class SpectralFormFactor(TransformerMixin, BaseEstimator):
    """Filtered form factor of unfolded levels and the derived Thouless time.

    ``transform`` returns the smoothed curve on ``t_grid``.
    """

    def __init__(self, t_grid=None, eta=0.5, window=51, theta=spectral.THOULESS_THETA):
        self.t_grid = t_grid
        self.eta = eta
        self.window = window
        self.theta = theta

    def _grid(self):
        if self.t_grid is None:
            return np.linspace(1e-6, 100.0, 100000)
        return np.asarray(self.t_grid, dtype=float)

    def fit(self, X, y=None):
        eps = _levels(X)
        self.curve_ = spectral.sff(eps, self._grid(), self.eta, self.window)
        try:
            self.t_thouless_ = spectral.thouless_time(self.curve_, self.theta)
            self.g_ = spectral.g_metric(self.t_thouless_)
        except NoIntersection:
            self.t_thouless_ = np.nan
            self.g_ = np.nan
        return self

    def transform(self, X):
        check_is_fitted(self, "curve_")
        return spectral.sff(_levels(X), self._grid(), self.eta, self.window).values


class PowerLawFit(RegressorMixin, BaseEstimator):
    """Straight line in log-log coordinates, ``y = A * x**slope``.

    For off-diagonal weights against J_r, ``alpha_ = -slope_``.
    """

    def fit(self, X, y):
        x = check_array(np.asarray(X, dtype=float).reshape(len(y), -1))[:, 0]
        res = loglog_slope(x, np.asarray(y, dtype=float))
        self.intercept_ = float(res.coefficients[0])
        self.slope_ = float(res.coefficients[1])
        self.alpha_ = -self.slope_
        self.residual_ = res.residual
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        x = np.asarray(X, dtype=float).reshape(-1)
        return 10**self.intercept_ * x**self.slope_
