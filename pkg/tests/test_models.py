import numpy as np
import pytest

from models import (
    RidgeModel,
    SingularDesignError,
    fit_ridge,
    split_data,
    split_indices,
    take_split,
)


def test_ridge_recovers_linear_targets():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(500, 3))
    Y = np.column_stack([1.0 + 2.0 * X[:, 0] - X[:, 2], 3.0 * X[:, 1] + 5.0])
    model = fit_ridge(X, Y, ridge_lambda=1e-6)
    assert isinstance(model, RidgeModel)
    assert model.weights.shape == (4, 2)
    assert np.allclose(model.weights[:, 0], [1.0, 2.0, 0.0, -1.0], atol=1e-4)
    assert np.allclose(model.predict(X), Y, atol=1e-4)


def test_ridge_accepts_one_target_vector():
    X = np.arange(20.0)[:, None]
    model = fit_ridge(X, 2.0 * X[:, 0])
    assert model.predict([[3.0]]).shape == (1, 1)


def test_penalty_shrinks_slopes():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 2))
    Y = X @ np.array([[2.0], [-1.0]])
    loose = fit_ridge(X, Y, 1e-6).weights[1:]
    tight = fit_ridge(X, Y, 1e3).weights[1:]
    assert np.all(np.abs(tight) < np.abs(loose))


def test_singular_design_needs_regularization():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 1))
    X = np.hstack([x, x])
    Y = 3.0 * x
    with pytest.raises(SingularDesignError):
        fit_ridge(X, Y, ridge_lambda=0.0)
    assert np.allclose(fit_ridge(X, Y, ridge_lambda=1e-3).predict(X), Y, atol=1e-2)


def test_ridge_input_errors():
    with pytest.raises(ValueError):
        fit_ridge(np.ones((5, 2)), np.ones((4, 1)))
    with pytest.raises(ValueError):
        fit_ridge(np.ones((5, 2)), np.ones((5, 1)), ridge_lambda=-1.0)


def test_split_data_sizes_and_disjointness():
    train, cal, test = split_data(100, {"train": 0.5, "cal": 0.25, "test": 0.25}, seed=3)
    assert (len(train), len(cal), len(test)) == (50, 25, 25)
    assert len(set(train) | set(cal) | set(test)) == 100
    assert np.all(np.diff(cal) > 0)


def test_split_data_is_seeded():
    fractions = {"train": 0.4, "cal": 0.3, "test": 0.3}
    first = split_data(60, fractions, seed=5)
    again = split_data(60, fractions, seed=5)
    other = split_data(60, fractions, seed=6)
    assert all(np.array_equal(a, b) for a, b in zip(first, again))
    assert not all(np.array_equal(a, b) for a, b in zip(first, other))


def test_split_errors():
    with pytest.raises(ValueError, match="empty cal split"):
        split_data(3, {"train": 0.5, "cal": 0.2, "test": 0.3}, seed=0)
    with pytest.raises(ValueError):
        split_data(10, {"train": 0.6, "cal": 0.3, "test": 0.3}, seed=0)
    with pytest.raises(ValueError, match="empty train split"):
        split_indices(10, 5, 5, seed=0)


def test_take_split():
    X = np.arange(20.0).reshape(10, 2)
    Y = np.arange(10.0)[:, None]
    data = take_split(X, Y, split_indices(10, 3, 2, seed=1))
    assert data.X_train.shape == (5, 2)
    assert data.Y_cal.shape == (3, 1)
    assert np.array_equal(data.X_test[:, 0] / 2, data.Y_test[:, 0])
