"""Retraining curves and rank agreement between importance methods.

SDS (smallest destroying subset) removes the top-k features of a ranking
and retrains; SSS (smallest sufficient subset) keeps only the top-k. Both
curves have d + 1 points, k = 0..d. A model with no features predicts the
training majority class (or the training mean for regression).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .baselines import ImportanceScores
from .dataset import CLASSIFICATION, Dataset
from .errors import UndefinedCorrelationError
from .forest import Forest, TrainParams, train_forest

SDS = "remove-top"
SSS = "add-top"
CURVE_TREES = 50


@dataclass(frozen=True, eq=False)
class PerformanceCurve:
    method: str
    direction: str  # SDS or SSS
    k: np.ndarray  # 0..d
    metric: np.ndarray  # accuracy or MSE per k

    @property
    def kind(self) -> str:
        return "sds" if self.direction == SDS else "sss"


@dataclass(frozen=True)
class ForestTrainer:
    """Retrains a fixed-size forest with fixed params and seed for every k."""

    params: TrainParams
    n_trees: int = CURVE_TREES
    seed: int = 0
    n_jobs: int | None = field(default=None, compare=False)

    def __call__(self, ds: Dataset) -> Forest:
        return train_forest(ds, self.n_trees, self.params, self.seed, self.n_jobs)


def baseline_metric(train: Dataset, test: Dataset) -> float:
    """Test metric of the feature-free model fitted on ``train``."""
    if train.task == CLASSIFICATION:
        majority = int(np.argmax(np.bincount(train.y, minlength=train.n_classes)))
        return float(np.mean(test.y == majority))
    return float(np.mean((test.y - train.y.mean()) ** 2))


def _check_ranking(ranking, d: int) -> np.ndarray:
    r = np.asarray(ranking)
    if r.ndim != 1 or len(r) != d or not np.array_equal(np.sort(r), np.arange(d)):
        raise ValueError(f"ranking must be a permutation of 0..{d - 1}")
    return r.astype(np.int64)


def _metric_with(train: Dataset, test: Dataset, cols: np.ndarray,
                 trainer: Callable[[Dataset], Forest]) -> float:
    if len(cols) == 0:
        return baseline_metric(train, test)
    cols = np.sort(cols)
    model = trainer(train.select(cols))
    return model.score(test.select(cols))


def _curve(train, test, ranking, trainer, direction, method):
    if train.d != test.d:
        raise ValueError("train and test sets have different features")
    r = _check_ranking(ranking, train.d)
    d = train.d
    metric = np.empty(d + 1)
    for k in range(d + 1):
        cols = r[k:] if direction == SDS else r[:k]
        metric[k] = _metric_with(train, test, cols, trainer)
    return PerformanceCurve(method, direction, np.arange(d + 1), metric)


def sds_curve(train: Dataset, test: Dataset, ranking: Sequence[int],
              trainer: Callable[[Dataset], Forest], method: str = "") -> PerformanceCurve:
    """Test metric after removing the top-k ranked features, k = 0..d."""
    return _curve(train, test, ranking, trainer, SDS, method)


def sss_curve(train: Dataset, test: Dataset, ranking: Sequence[int],
              trainer: Callable[[Dataset], Forest], method: str = "") -> PerformanceCurve:
    """Test metric using only the top-k ranked features, k = 0..d."""
    return _curve(train, test, ranking, trainer, SSS, method)


def spearman(a: ImportanceScores | Sequence[float], b: ImportanceScores | Sequence[float]) -> float:
    """Spearman correlation with average ranks for ties."""
    x = np.asarray(a.scores if isinstance(a, ImportanceScores) else a, dtype=np.float64)
    y = np.asarray(b.scores if isinstance(b, ImportanceScores) else b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("need two score vectors of equal length >= 2")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if denom == 0:
        raise UndefinedCorrelationError("rank correlation is undefined for a constant score vector")
    return float(np.clip(np.sum(rx * ry) / denom, -1.0, 1.0))


def write_curve_csv(curve: PerformanceCurve, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "metric"])
        for k, m in zip(curve.k, curve.metric):
            w.writerow([int(k), f"{m:.10g}"])


def read_curve_csv(path: str | Path, method: str = "", direction: str = SDS) -> PerformanceCurve:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    k = np.array([int(r[0]) for r in rows])
    metric = np.array([float(r[1]) for r in rows])
    return PerformanceCurve(method, direction, k, metric)
