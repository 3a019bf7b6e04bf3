"""Multinomial naive Bayes over tf-idf mass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..dataset import Dataset
from ..errors import ContractError, TrainingError


@dataclass
class NBModel:
    """Class index 0 is the negative class, 1 the positive class."""

    log_prior: np.ndarray  # shape (2,)
    log_likelihood: np.ndarray  # shape (2, D)
    alpha: float

    @property
    def dimension(self) -> int:
        return self.log_likelihood.shape[1]

    def decision(self, X: sp.csr_matrix) -> np.ndarray:
        """Log-posterior difference ``log P(+|x) - log P(-|x)``."""
        diff = self.log_likelihood[1] - self.log_likelihood[0]
        return X @ diff + (self.log_prior[1] - self.log_prior[0])

    def joint_log_likelihood(self, X: sp.csr_matrix) -> np.ndarray:
        return np.asarray(X @ self.log_likelihood.T) + self.log_prior

    def to_params(self) -> dict:
        return {
            "log_prior": [float(v) for v in self.log_prior],
            "log_likelihood": [[float(v) for v in row] for row in self.log_likelihood],
            "alpha": float(self.alpha),
        }

    @classmethod
    def from_params(cls, params: dict) -> "NBModel":
        return cls(
            np.array(params["log_prior"], dtype=np.float64),
            np.array(params["log_likelihood"], dtype=np.float64),
            float(params["alpha"]),
        )


def train_naive_bayes(data: Dataset, alpha: float = 1.0, seed: int = 0) -> NBModel:
    """Feature values act as fractional counts.

    ``log_likelihood[c, j] = ln((alpha + mass_cj) / (alpha * D + mass_c))``.
    """
    if alpha <= 0:
        raise ContractError(f"alpha must be > 0, got {alpha}")
    y = data.labels
    if y.size == 0 or y.all() or not y.any():
        raise TrainingError("naive Bayes needs both classes")
    X = data.matrix
    d = data.dimension
    counts = np.array([np.sum(~y), np.sum(y)], dtype=np.float64)
    log_prior = np.log(counts / counts.sum())
    mass = np.vstack(
        [np.asarray(X[~y].sum(axis=0)).ravel(), np.asarray(X[y].sum(axis=0)).ravel()]
    )
    totals = mass.sum(axis=1, keepdims=True)
    log_likelihood = np.log(alpha + mass) - np.log(alpha * d + totals)
    return NBModel(log_prior, log_likelihood, float(alpha))
