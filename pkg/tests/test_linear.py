import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from icureadmit.dataset import Dataset
from icureadmit.errors import ContractError, TrainingError
from icureadmit.models.linear import (
    hinge_objective,
    logistic_gradient,
    logistic_objective,
    train_linear_svm,
    train_logistic_regression,
)

from conftest import dense_dataset, random_sparse_dataset
from oracles import central_difference_gradient, relative_error


def accuracy(model, data):
    return np.mean((model.decision(data.matrix) > 0) == data.labels)


def test_logistic_separable(separable4):
    m = train_logistic_regression(separable4, l2_lambda=0.01, epochs=5000)
    assert accuracy(m, separable4) == 1.0


def test_logistic_single_class_rejected():
    with pytest.raises(TrainingError):
        train_logistic_regression(dense_dataset([[1.0], [2.0]], [1, 1]))


def test_logistic_bias_is_not_regularized():
    # No features: the optimum is the log-odds of the base rate whatever lambda is.
    data = Dataset(sp.csr_matrix((4, 1)), [1, 0, 0, 0])
    m = train_logistic_regression(data, l2_lambda=10.0, epochs=20000, tolerance=1e-12)
    assert m.bias == pytest.approx(np.log(1 / 3), abs=1e-6)


def test_logistic_zero_learning_rate_stays_at_zero(separable4):
    m = train_logistic_regression(separable4, learning_rate=0.0, epochs=5)
    assert not m.weights.any() and m.bias == 0.0


def test_logistic_preconditions(separable4):
    with pytest.raises(ContractError):
        train_logistic_regression(separable4, l2_lambda=-1)
    with pytest.raises(ContractError):
        train_logistic_regression(separable4, epochs=0)


def test_logistic_divergence_is_reported():
    data = dense_dataset([[1e300], [-1e300]], [1, 0])
    with pytest.raises(TrainingError, match="epoch"):
        train_logistic_regression(data, learning_rate=1e10, epochs=5)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_central_differences(seed):
    data = random_sparse_dataset(30, 10, seed=seed)
    y = data.labels.astype(float)
    rng = np.random.default_rng(100 + seed)
    w, b, lam = rng.normal(size=10), float(rng.normal()), 0.1
    gw, gb = logistic_gradient(w, b, data.matrix, y, lam)
    fw, fb = central_difference_gradient(lambda w_, b_: logistic_objective(w_, b_, data.matrix, y, lam), w, b)
    assert relative_error(np.r_[gw, gb], np.r_[fw, fb]) < 1e-4


def test_gradient_vanishes_at_returned_optimum(separable4):
    m = train_logistic_regression(separable4, l2_lambda=0.1, epochs=100000, tolerance=1e-9)
    gw, gb = logistic_gradient(m.weights, m.bias, separable4.matrix, separable4.labels.astype(float), 0.1)
    assert max(np.abs(gw).max(), abs(gb)) < 1e-9


def test_svm_separable_zero_hinge(separable4):
    m = train_linear_svm(separable4, l2_lambda=1e-3, epochs=200)
    s = np.where(separable4.labels, 1.0, -1.0)
    margins = s * m.decision(separable4.matrix)
    assert np.all(margins >= 1.0)
    hinge = hinge_objective(m.weights, m.bias, separable4.matrix, separable4.labels, 0.0)
    assert hinge == 0.0


def test_svm_scaling_keeps_signs(separable4):
    a = train_linear_svm(separable4, l2_lambda=1e-2, epochs=50, seed=3)
    scaled = Dataset(separable4.matrix * 2.0, separable4.labels)
    b = train_linear_svm(scaled, l2_lambda=5e-3, epochs=50, seed=3)
    assert np.array_equal(a.decision(separable4.matrix) > 0, b.decision(scaled.matrix) > 0)


def test_svm_is_deterministic():
    data = random_sparse_dataset(40, 8, seed=1)
    a = train_linear_svm(data, l2_lambda=1e-2, epochs=5, seed=9)
    b = train_linear_svm(data, l2_lambda=1e-2, epochs=5, seed=9)
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


def test_svm_preconditions(separable4):
    with pytest.raises(ContractError):
        train_linear_svm(separable4, l2_lambda=0.0)
    with pytest.raises(TrainingError):
        train_linear_svm(dense_dataset([[1.0], [0.0]], [0, 0]))


def reference_pegasos(X, s, lam, epochs, seed):
    # Dense textbook Pegasos with an appended constant feature.
    rng = np.random.default_rng(seed)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    w = np.zeros(Xa.shape[1])
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(X.shape[0]):
            t += 1
            eta = 1.0 / (lam * t)
            hit = s[i] * (w @ Xa[i]) < 1.0
            w = (1 - eta * lam) * w
            if hit:
                w = w + eta * s[i] * Xa[i]
            w = w * min(1.0, (1 / np.sqrt(lam)) / max(np.linalg.norm(w), 1e-300))
    return w


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1e-3, 1e-2, 1e-1, 1.0]))
def test_svm_matches_dense_reference(seed, lam):
    data = random_sparse_dataset(15, 4, density=0.5, seed=seed)
    s = np.where(data.labels, 1.0, -1.0)
    ref = reference_pegasos(data.matrix.toarray(), s, lam, 3, seed)
    m = train_linear_svm(data, l2_lambda=lam, epochs=3, seed=seed)
    assert np.allclose(np.r_[m.weights, m.bias], ref, rtol=1e-9, atol=1e-12)
