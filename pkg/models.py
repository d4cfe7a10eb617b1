"""Multi-output ridge predictor and train/calibration/test splitting"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from config import RIDGE_LAMBDA

logger = logging.getLogger(__name__)


class SingularDesignError(RuntimeError):
    """The unregularized normal equations have no unique solution"""


@dataclass(frozen=True)
class RidgeModel:
    """Linear predictor in raw feature space: weights[0] is the intercept row"""
    weights: np.ndarray
    ridge_lambda: float

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.weights[0] + X @ self.weights[1:]


def fit_ridge(X, Y, ridge_lambda=RIDGE_LAMBDA):
    """Closed-form ridge on standardized features with an unpenalized intercept"""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if len(X) != len(Y):
        raise ValueError(f"X has {len(X)} rows but Y has {len(Y)}")
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be non-negative")

    # Training-split statistics only
    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale == 0.0] = 1.0
    y_mean = Y.mean(axis=0)
    Z = (X - x_mean) / x_scale

    p = Z.shape[1]
    if ridge_lambda == 0.0 and np.linalg.matrix_rank(Z) < p:
        raise SingularDesignError("singular design at lambda=0; use ridge_lambda > 0")

    A = Z.T @ Z
    A.flat[:: p + 1] += ridge_lambda
    try:
        coef = linalg.solve(A, Z.T @ (Y - y_mean), assume_a="pos")
    except linalg.LinAlgError as e:
        raise SingularDesignError(f"ridge system could not be solved ({e}); use ridge_lambda > 0")

    slopes = coef / x_scale[:, None]
    intercept = y_mean - x_mean @ slopes
    weights = np.vstack([intercept, slopes])
    if not np.all(np.isfinite(weights)):
        raise SingularDesignError("non-finite ridge weights; use a larger ridge_lambda")
    return RidgeModel(weights=weights, ridge_lambda=float(ridge_lambda))


@dataclass
class SplitData:
    X_train: np.ndarray
    Y_train: np.ndarray
    X_cal: np.ndarray
    Y_cal: np.ndarray
    X_test: np.ndarray
    Y_test: np.ndarray


def _check_sizes(sizes):
    for name, size in zip(("train", "cal", "test"), sizes):
        if size <= 0:
            raise ValueError(f"empty {name} split")


def _partition(n_total, sizes, seed):
    order = np.random.default_rng(seed).permutation(n_total)
    n_train, n_cal, n_test = sizes
    return (
        np.sort(order[:n_train]),
        np.sort(order[n_train:n_train + n_cal]),
        np.sort(order[n_train + n_cal:n_train + n_cal + n_test]),
    )


def split_data(n_total, fractions, seed):
    """Disjoint train/cal/test index arrays; sizes floor(fraction*n), rounding remainder to train"""
    if any(f <= 0 for f in fractions.values()):
        raise ValueError("fractions must be positive")
    total = sum(fractions.values())
    if total > 1.0 + 1e-12:
        raise ValueError("fractions must sum to at most 1")
    n_cal = int(math.floor(fractions["cal"] * n_total + 1e-9))
    n_test = int(math.floor(fractions["test"] * n_total + 1e-9))
    n_used = int(math.floor(total * n_total + 1e-9))
    sizes = (n_used - n_cal - n_test, n_cal, n_test)
    _check_sizes(sizes)
    return _partition(n_total, sizes, seed)


def split_indices(n_total, n_cal, n_test, seed):
    """Explicit calibration and test sizes; every remaining row trains the model"""
    sizes = (n_total - n_cal - n_test, n_cal, n_test)
    _check_sizes(sizes)
    return _partition(n_total, sizes, seed)


def take_split(X, Y, indices):
    train, cal, test = indices
    return SplitData(X[train], Y[train], X[cal], Y[cal], X[test], Y[test])
