"""Stratified splitting, cross-validated tuning and ROC/AUC evaluation."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import models
from .dataset import Dataset
from .errors import ContractError, EvaluationError, TrainingError

logger = logging.getLogger(__name__)


@dataclass
class SplitPlan:
    train_indices: list[int]
    test_indices: list[int]
    seed: int
    ratio: float


@dataclass
class FoldPlan:
    folds: list[list[int]]
    seed: int

    def train_and_validation(self, i: int) -> tuple[list[int], list[int]]:
        train = sorted(j for f, fold in enumerate(self.folds) if f != i for j in fold)
        return train, self.folds[i]


def _class_members(labels) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(labels, dtype=bool)
    return np.flatnonzero(~y), np.flatnonzero(y)


def stratified_split(labels, ratio: float = 0.7, seed: int = 0) -> SplitPlan:
    """Per-class seeded shuffle; the first ``round(ratio * count)`` go to train.

    Rounding is half-up, so ``round(2.5) == 3``.
    """
    if not 0 < ratio < 1:
        raise ContractError(f"ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for name, members in zip(("negative", "positive"), _class_members(labels)):
        if len(members) < 2:
            raise ContractError(f"{name} class has {len(members)} members; at least 2 needed to split")
        shuffled = rng.permutation(members)
        cut = int(math.floor(ratio * len(members) + 0.5))
        train.extend(int(i) for i in shuffled[:cut])
        test.extend(int(i) for i in shuffled[cut:])
    return SplitPlan(sorted(train), sorted(test), seed, ratio)


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> FoldPlan:
    """Folds over positions ``0..len(labels)-1``.

    Each class is shuffled with the seeded generator and dealt round-robin.
    """
    if k < 2:
        raise ContractError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for name, members in zip(("negative", "positive"), _class_members(labels)):
        if len(members) < k:
            raise ContractError(f"{name} class has {len(members)} members, fewer than k={k} folds")
        for pos, i in enumerate(rng.permutation(members)):
            folds[pos % k].append(int(i))
    return FoldPlan([sorted(f) for f in folds], seed)


def _check_scores(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape:
        raise ContractError("scores and labels differ in length")
    if not np.all(np.isfinite(s)):
        raise ContractError("scores must be finite")
    if y.all() or not y.any():
        raise ContractError("AUC is undefined unless both classes are present")
    return s, y


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: ``(wins + ties/2) / (P * N)``, in O(n log n)."""
    s, y = _check_scores(scores, labels)
    order = np.argsort(s, kind="mergesort")
    s, y = s[order], y[order]
    boundaries = np.flatnonzero(np.r_[True, s[1:] != s[:-1], True])
    pos_in = np.add.reduceat(y.astype(np.int64), boundaries[:-1])
    size = np.diff(boundaries)
    neg_in = size - pos_in
    neg_below = np.cumsum(neg_in) - neg_in
    # Twice the win count, kept integral so the ratio is exact.
    twice = int(np.sum(pos_in * (2 * neg_below + neg_in)))
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    return twice / (2 * n_pos * n_neg)


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    """``(fpr, tpr)`` at every distinct threshold, from (0, 0) to (1, 1)."""
    s, y = _check_scores(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    fp = np.cumsum(~y)[ends]
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    points = [(0.0, 0.0)]
    points.extend((int(f) / n_neg, int(t) / n_pos) for f, t in zip(fp, tp))
    return points


def trapezoid_area(points) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


# ---------------------------------------------------------------------------
# Grid search


@dataclass
class ClassifierSpec:
    name: str
    family: str
    grid: list[dict]
    fixed: dict = field(default_factory=dict)


def default_roster(dimension: Optional[int] = None) -> list[ClassifierSpec]:
    """Default tuning grids, in the row order of the results table."""
    lambdas = [1e-4, 1e-3, 1e-2, 1e-1]
    forest_fixed = {"n_trees": 100, "min_leaf": 1}
    if dimension is not None:
        forest_fixed["mtry"] = models.trees.default_mtry(dimension)
    return [
        ClassifierSpec("naive_bayes", models.NAIVE_BAYES, [{"alpha": a} for a in (1.0, 0.1, 0.01)]),
        ClassifierSpec("linear_svm", models.SVM, [{"l2_lambda": v} for v in lambdas], {"epochs": 20}),
        ClassifierSpec(
            "logistic_regression",
            models.LOGISTIC,
            [{"l2_lambda": v} for v in lambdas],
            {"epochs": 1000, "learning_rate": 1.0, "tolerance": 1e-6},
        ),
        ClassifierSpec("random_forest", models.RANDOM_FOREST, [{"max_depth": d} for d in (8, 16)], forest_fixed),
        ClassifierSpec(
            "gbdt",
            models.GBDT,
            [{"shrinkage": v} for v in (0.05, 0.1)],
            {"n_stages": 100, "max_depth": 3, "min_leaf": 1},
        ),
    ]


@dataclass
class CVRecord:
    params: list[dict]
    fold_aucs: list[Optional[list[float]]]
    failures: list[Optional[str]]
    best_index: int

    @property
    def best_params(self) -> dict:
        return self.params[self.best_index]

    def mean(self, i: int) -> float:
        return float(np.mean(self.fold_aucs[i]))

    def sd(self, i: int) -> float:
        a = self.fold_aucs[i]
        return float(np.std(a, ddof=1)) if len(a) > 1 else 0.0


def _fit_and_score(family, train_data, valid_data, params, seed):
    """One work unit: returns the validation AUC or an error string."""
    try:
        model = models.train(family, train_data, params, seed=seed)
        scores = models.predict_scores(model, valid_data.matrix)
        return roc_auc(scores, valid_data.labels), None
    except (TrainingError, ContractError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _run_units(units, executor: Optional[Executor]):
    if executor is None:
        return [_fit_and_score(*u) for u in units]
    futures = [executor.submit(_fit_and_score, *u) for u in units]
    return [f.result() for f in futures]


def grid_search(
    train: Dataset,
    spec: ClassifierSpec,
    k: int = 5,
    seed: int = 0,
    executor: Optional[Executor] = None,
) -> tuple[dict, CVRecord]:
    """Pick the grid point with the best mean validation AUC over k folds.

    Ties go to the earliest grid point. A grid point whose training fails
    on any fold is skipped. Unit ``u`` (grid point ``g``, fold ``f``, with
    ``u = g * k + f``) trains with seed ``seed + u``.
    """
    if not spec.grid:
        raise ContractError("empty parameter grid")
    plan = stratified_kfold(train.labels, k, seed)
    folds = [plan.train_and_validation(f) for f in range(k)]
    fold_data = [(train.subset(tr), train.subset(va)) for tr, va in folds]
    params = [{**spec.fixed, **point} for point in spec.grid]
    units = []
    for g, p in enumerate(params):
        for f, (tr, va) in enumerate(fold_data):
            units.append((spec.family, tr, va, p, seed + g * k + f))
    results = _run_units(units, executor)

    fold_aucs: list[Optional[list[float]]] = []
    failures: list[Optional[str]] = []
    for g in range(len(params)):
        chunk = results[g * k : (g + 1) * k]
        errors = [e for _, e in chunk if e is not None]
        if errors:
            fold_aucs.append(None)
            failures.append(errors[0])
            logger.info("%s grid point %s failed: %s", spec.name, params[g], errors[0])
        else:
            fold_aucs.append([a for a, _ in chunk])
            failures.append(None)
    scored = [g for g, a in enumerate(fold_aucs) if a is not None]
    if not scored:
        raise EvaluationError(f"{spec.name}: every grid point failed ({failures[0]})")
    best = max(scored, key=lambda g: (float(np.mean(fold_aucs[g])), -g))
    return params[best], CVRecord(params, fold_aucs, failures, best)


# ---------------------------------------------------------------------------
# Full configuration matrix


@dataclass
class ConfigResult:
    classifier: str
    feature_set: str
    status: str
    best_params: Optional[dict] = None
    cv_auc_mean: Optional[float] = None
    cv_auc_sd: Optional[float] = None
    test_auc: Optional[float] = None
    error: Optional[str] = None
    grid: Optional[list] = None


@dataclass
class EvalReport:
    seed: int
    ratio: float
    k: int
    n_train: int
    n_test: int
    feature_sets: list[str]
    classifiers: list[str]
    results: list[ConfigResult]
    roc: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["roc"], d["models"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def result(self, classifier: str, feature_set: str) -> ConfigResult:
        for r in self.results:
            if r.classifier == classifier and r.feature_set == feature_set:
                return r
        raise KeyError((classifier, feature_set))

    def all_failed(self) -> bool:
        return all(r.status != "ok" for r in self.results)

    def to_table(self) -> str:
        """Classifiers as rows, feature sets as columns, AUC to 3 decimals."""
        width = max([len("Classifier")] + [len(c) for c in self.classifiers]) + 2
        col = max([9] + [len(f) + 2 for f in self.feature_sets])
        lines = ["Classifier".ljust(width) + "".join(f.rjust(col) for f in self.feature_sets)]
        lines.append("-" * len(lines[0]))
        for c in self.classifiers:
            cells = []
            for f in self.feature_sets:
                r = self.result(c, f)
                cells.append((f"{r.test_auc:.3f}" if r.status == "ok" else "failed").rjust(col))
            lines.append(c.ljust(width) + "".join(cells))
        return "\n".join(lines) + "\n"


def evaluate_matrix(
    features: dict[str, Dataset],
    roster: Union[None, Sequence[ClassifierSpec], Callable[[int], Sequence[ClassifierSpec]]] = None,
    seed: int = 0,
    ratio: float = 0.7,
    k: int = 5,
    threads: int = 1,
    progress: Optional[Callable[[str], None]] = None,
) -> EvalReport:
    """Tune and test every (classifier, feature set) pair on one shared split.

    All datasets must describe the same subjects in the same order. Failed
    configurations are recorded in the report rather than raised.
    ``roster`` may be a callable taking the feature dimension, for grids
    that depend on it (forest ``mtry``); it must return the same classifier
    names in the same order for every feature set.
    """
    if not features:
        raise ContractError("no feature sets given")
    names = list(features)
    labels = features[names[0]].labels
    for name in names[1:]:
        if not np.array_equal(features[name].labels, labels):
            raise ContractError(f"feature set {name!r} has different labels")
    plan = stratified_split(labels, ratio, seed)

    executor = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    results, roc, fitted = [], {}, {}
    rosters = {}
    try:
        for fs in names:
            data = features[fs]
            if roster is None:
                rosters[fs] = default_roster(data.dimension)
            elif callable(roster):
                rosters[fs] = list(roster(data.dimension))
            else:
                rosters[fs] = list(roster)
        classifiers = [s.name for s in rosters[names[0]]]
        for fs in names[1:]:
            if [s.name for s in rosters[fs]] != classifiers:
                raise ContractError("roster differs between feature sets")
        for spec_index, cname in enumerate(classifiers):
            for fs in names:
                spec = rosters[fs][spec_index]
                if progress:
                    progress(f"{spec.name} / {fs}")
                data = features[fs]
                train, test = data.subset(plan.train_indices), data.subset(plan.test_indices)
                try:
                    best, cv = grid_search(train, spec, k, seed, executor)
                    model = models.train(spec.family, train, best, seed=seed, feature_set=fs)
                    scores = models.predict_scores(model, test.matrix)
                    auc = roc_auc(scores, test.labels)
                except (EvaluationError, TrainingError, ContractError) as exc:
                    results.append(ConfigResult(spec.name, fs, "failed", error=f"{type(exc).__name__}: {exc}"))
                    continue
                grid = [
                    {
                        "params": cv.params[g],
                        "cv_auc_mean": None if cv.fold_aucs[g] is None else cv.mean(g),
                        "error": cv.failures[g],
                    }
                    for g in range(len(cv.params))
                ]
                results.append(
                    ConfigResult(
                        spec.name,
                        fs,
                        "ok",
                        best_params=best,
                        cv_auc_mean=cv.mean(cv.best_index),
                        cv_auc_sd=cv.sd(cv.best_index),
                        test_auc=auc,
                        grid=grid,
                    )
                )
                roc[(spec.name, fs)] = roc_curve(scores, test.labels)
                fitted[(spec.name, fs)] = model
    finally:
        if executor is not None:
            executor.shutdown()

    return EvalReport(
        seed=seed,
        ratio=ratio,
        k=k,
        n_train=len(plan.train_indices),
        n_test=len(plan.test_indices),
        feature_sets=names,
        classifiers=classifiers,
        results=results,
        roc=roc,
        models=fitted,
    )
