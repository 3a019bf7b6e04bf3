"""L2-regularized linear classifiers: logistic regression and Pegasos SVM."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import ContractError, TrainingError
from ..dataset import Dataset

LOGISTIC = "logistic_regression"
SVM = "linear_svm"


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    family: str

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def decision(self, X: sp.csr_matrix) -> np.ndarray:
        return X @ self.weights + self.bias

    def to_params(self) -> dict:
        return {"weights": [float(w) for w in self.weights], "bias": float(self.bias)}

    @classmethod
    def from_params(cls, family: str, params: dict) -> "LinearModel":
        return cls(np.array(params["weights"], dtype=np.float64), float(params["bias"]), family)


def _require_both_classes(y: np.ndarray) -> None:
    if y.size == 0 or y.all() or not y.any():
        raise TrainingError("training data must contain both classes")


def logistic_objective(w, b, X, y, l2_lambda) -> float:
    """Mean log-loss plus ``l2_lambda/2 * ||w||^2``; ``y`` in {0, 1}."""
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(loss + 0.5 * l2_lambda * np.dot(w, w))


def logistic_gradient(w, b, X, y, l2_lambda):
    """Gradient of :func:`logistic_objective` as ``(grad_w, grad_b)``."""
    n = X.shape[0]
    z = X @ w + b
    residual = _sigmoid(z) - y
    grad_w = X.T @ residual / n + l2_lambda * w
    grad_b = float(residual.sum() / n)
    return grad_w, grad_b


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_logistic_regression(
    data: Dataset,
    l2_lambda: float = 1e-3,
    epochs: int = 1000,
    learning_rate: float = 1.0,
    tolerance: float = 1e-6,
    seed: int = 0,
) -> LinearModel:
    """Full-batch gradient descent from zero weights. The bias is not
    regularized. Stops early once the gradient's max-norm drops below
    ``tolerance``. ``seed`` is accepted for a uniform trainer signature.
    """
    if l2_lambda < 0:
        raise ContractError(f"l2_lambda must be >= 0, got {l2_lambda}")
    if epochs < 1:
        raise ContractError(f"epochs must be >= 1, got {epochs}")
    if learning_rate < 0:
        raise ContractError(f"learning_rate must be >= 0, got {learning_rate}")
    y = data.labels.astype(np.float64)
    _require_both_classes(data.labels)
    X = data.matrix
    w = np.zeros(data.dimension)
    b = 0.0
    # Overflow is detected below and reported with its epoch.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, epochs + 1):
            grad_w, grad_b = logistic_gradient(w, b, X, y, l2_lambda)
            gnorm = max(float(np.max(np.abs(grad_w), initial=0.0)), abs(grad_b))
            if not math.isfinite(gnorm):
                raise TrainingError(f"non-finite gradient at epoch {epoch}")
            if gnorm < tolerance:
                break
            w = w - learning_rate * grad_w
            b = b - learning_rate * grad_b
        loss = logistic_objective(w, b, X, y, l2_lambda)
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite loss at epoch {epoch}")
    return LinearModel(w, b, LOGISTIC)


def hinge_objective(w, b, X, y, l2_lambda) -> float:
    """Mean hinge loss plus ``l2_lambda/2 * ||w||^2``; ``y`` in {0, 1}."""
    s = 2.0 * y - 1.0
    margins = s * (X @ w + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * l2_lambda * np.dot(w, w))


def train_linear_svm(
    data: Dataset,
    l2_lambda: float = 1e-3,
    epochs: int = 20,
    seed: int = 0,
) -> LinearModel:
    """Pegasos stochastic subgradient descent on the hinge loss.

    Step size at iteration t is ``1/(l2_lambda * t)``, followed by projection
    onto the ball of radius ``1/sqrt(l2_lambda)``. The bias is handled as a
    constant input feature of value 1 and is regularized with the weights.
    Each epoch visits every example once in a seeded random order.
    """
    if l2_lambda <= 0:
        raise ContractError(f"l2_lambda must be > 0, got {l2_lambda}")
    if epochs < 1:
        raise ContractError(f"epochs must be >= 1, got {epochs}")
    _require_both_classes(data.labels)
    rng = np.random.default_rng(seed)
    X = data.matrix
    indptr, indices, values = X.indptr, X.indices, X.data
    s = np.where(data.labels, 1.0, -1.0)
    n, d = X.shape

    # w = scale * v keeps the per-step shrink O(1); v[d] is the bias weight.
    v = np.zeros(d + 1)
    scale = 1.0
    sq_norm_v = 0.0
    radius_sq = 1.0 / l2_lambda
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            lo, hi = indptr[i], indptr[i + 1]
            idx = indices[lo:hi]
            vals = values[lo:hi]
            margin = s[i] * scale * (np.dot(v[idx], vals) + v[d])
            eta = 1.0 / (l2_lambda * t)
            shrink = 1.0 - eta * l2_lambda
            if shrink <= 0.0:
                v[:] = 0.0
                scale, sq_norm_v = 1.0, 0.0
            else:
                scale *= shrink
            if margin < 1.0:
                step = eta * s[i] / scale
                old = v[idx]
                sq_norm_v += float(2.0 * step * np.dot(old, vals) + step * step * np.dot(vals, vals))
                v[idx] = old + step * vals
                sq_norm_v += 2.0 * step * v[d] + step * step
                v[d] += step
            norm_sq = scale * scale * sq_norm_v
            if norm_sq > radius_sq:
                scale *= math.sqrt(radius_sq / norm_sq)
            if scale < 1e-100:
                v *= scale
                scale = 1.0
                sq_norm_v = float(v @ v)
        sq_norm_v = float(v @ v)
    w = scale * v
    if not np.all(np.isfinite(w)):
        raise TrainingError(f"non-finite weights after {t} steps")
    return LinearModel(w[:d].copy(), float(w[d]), SVM)
