"""The five classifier families behind one scoring and persistence API."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np
import scipy.sparse as sp

from ..errors import ContractError, ParseError, UnsupportedModelError
from ..text import SparseVector, Vocabulary
from .linear import (
    LOGISTIC,
    SVM,
    LinearModel,
    logistic_gradient,
    logistic_objective,
    train_linear_svm,
    train_logistic_regression,
)
from .naive_bayes import NBModel, train_naive_bayes
from .trees import ForestModel, GbdtModel, Tree, train_gbdt, train_random_forest

NAIVE_BAYES = "naive_bayes"
RANDOM_FOREST = "random_forest"
GBDT = "gbdt"
FAMILIES = (NAIVE_BAYES, SVM, LOGISTIC, RANDOM_FOREST, GBDT)
FORMAT_VERSION = 1

TRAINERS = {
    NAIVE_BAYES: train_naive_bayes,
    LOGISTIC: train_logistic_regression,
    SVM: train_linear_svm,
    RANDOM_FOREST: train_random_forest,
    GBDT: train_gbdt,
}

Model = Union[LinearModel, NBModel, ForestModel, GbdtModel]


@dataclass
class TrainedModel:
    family: str
    model: Model
    feature_set: str = ""
    settings: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractError(f"unknown model family {self.family!r}")

    @property
    def dimension(self) -> int:
        return self.model.dimension

    def to_dict(self) -> dict:
        params = self.model.to_params()
        return {
            "format_version": FORMAT_VERSION,
            "family": self.family,
            "metadata": {
                "feature_set": self.feature_set,
                "settings": self.settings,
                "seed": self.seed,
                "dimension": self.dimension,
            },
            "parameters": params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ContractError(f"unsupported model format_version {d.get('format_version')!r}")
        family = d["family"]
        p = d["parameters"]
        if family in (LOGISTIC, SVM):
            model: Model = LinearModel.from_params(family, p)
        elif family == NAIVE_BAYES:
            model = NBModel.from_params(p)
        elif family == RANDOM_FOREST:
            model = ForestModel.from_params(p)
        elif family == GBDT:
            model = GbdtModel.from_params(p)
        else:
            raise ContractError(f"unknown model family {family!r}")
        meta = d["metadata"]
        out = cls(family, model, meta.get("feature_set", ""), meta.get("settings", {}), int(meta.get("seed", 0)))
        if int(meta["dimension"]) != out.dimension:
            raise ContractError("metadata dimension disagrees with parameters")
        return out

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))


def train(family: str, data, params: dict, seed: int = 0, feature_set: str = "") -> TrainedModel:
    trainer = TRAINERS[family]
    model = trainer(data, seed=seed, **params)
    return TrainedModel(family, model, feature_set, dict(params), seed)


def predict_scores(model: TrainedModel, X: sp.csr_matrix) -> np.ndarray:
    """Ranking scores for every row of ``X``; larger means higher risk.

    Linear models give ``w.x + b``, naive Bayes the log-posterior
    difference, forests the mean leaf positive fraction and GBDT the
    accumulated log-odds.
    """
    if X.shape[1] != model.dimension:
        raise ContractError(f"input dimension {X.shape[1]} != model dimension {model.dimension}")
    return np.asarray(model.model.decision(sp.csr_matrix(X)), dtype=np.float64)


def predict_score(model: TrainedModel, x: SparseVector) -> float:
    if x.dimension != model.dimension:
        raise ContractError(f"vector dimension {x.dimension} != model dimension {model.dimension}")
    X = sp.csr_matrix(
        (np.array(x.values, dtype=np.float64), np.array(x.indices, dtype=np.int64), [0, len(x.indices)]),
        shape=(1, x.dimension),
    )
    return float(predict_scores(model, X)[0])


class FeatureImportance(NamedTuple):
    term: str
    importance: float
    sign: Optional[int]  # +1/-1 for linear weights, None for trees


def feature_importance(model: TrainedModel, vocab: Vocabulary, k: int = 20) -> list[FeatureImportance]:
    """Top-``k`` features by importance, zero-importance features omitted.

    Linear models use ``|weight|`` with its sign; forests and GBDT use the
    total split gain credited to each feature. Ties go to the
    lexicographically smaller term.
    """
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    if len(vocab) != model.dimension:
        raise ContractError(f"vocabulary size {len(vocab)} != model dimension {model.dimension}")
    m = model.model
    if isinstance(m, LinearModel):
        scores = np.abs(m.weights)
        signs = np.sign(m.weights).astype(int)
    elif isinstance(m, (ForestModel, GbdtModel)):
        scores = m.importances()
        signs = None
    else:
        raise UnsupportedModelError(f"feature importance is not defined for {model.family}")
    nonzero = np.flatnonzero(scores > 0)
    ranked = sorted(nonzero, key=lambda j: (-scores[j], vocab.terms[j]))[:k]
    return [
        FeatureImportance(vocab.terms[j], float(scores[j]), None if signs is None else int(signs[j]))
        for j in ranked
    ]


def read_model(path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            return TrainedModel.from_json(fh.read())
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad model file: {exc}", source=path) from None


__all__ = [
    "FAMILIES",
    "GBDT",
    "LOGISTIC",
    "NAIVE_BAYES",
    "RANDOM_FOREST",
    "SVM",
    "FeatureImportance",
    "ForestModel",
    "GbdtModel",
    "LinearModel",
    "NBModel",
    "TrainedModel",
    "Tree",
    "feature_importance",
    "logistic_gradient",
    "logistic_objective",
    "predict_score",
    "predict_scores",
    "read_model",
    "train",
    "train_gbdt",
    "train_linear_svm",
    "train_logistic_regression",
    "train_naive_bayes",
    "train_random_forest",
]
