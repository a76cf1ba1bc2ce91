"""Reference importance scores: Gini, permutation, and external files.

Gini importance follows the weighted impurity decrease of every split,

    score(f) = mean over trees of  sum_{nodes on f} n_node / n_root * decrease(node),

normalised to sum 1. Permutation importance is the drop of accuracy (or of
negative MSE) when one column of the test set is shuffled.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import CLASSIFICATION, Dataset, FeatureSchema
from .errors import SchemaError
from .forest import Forest

PERMUTATION_REPEATS = 5


@dataclass(frozen=True, eq=False)
class ImportanceScores:
    method: str
    scores: np.ndarray  # (d,) higher means more important

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).ravel()
        if not np.all(np.isfinite(s)):
            raise ValueError(f"{self.method} scores must be finite")
        object.__setattr__(self, "scores", s)

    @property
    def d(self) -> int:
        return len(self.scores)

    def ranking(self) -> np.ndarray:
        """Feature indices from most to least important; ties keep index order."""
        return np.argsort(-self.scores, kind="stable")


def gini_importance(forest: Forest) -> ImportanceScores:
    if len(forest) == 0:
        raise ValueError("forest has no trees")
    total = np.zeros(forest.n_features)
    for tree in forest.trees:
        split = tree.feature >= 0
        weight = tree.n_samples[split] / tree.n_samples[0]
        np.add.at(total, tree.feature[split], weight * tree.impurity_decrease[split])
    total /= len(forest)
    if total.sum() <= 0:
        warnings.warn("forest has no splits with positive impurity decrease; Gini scores are all zero",
                      stacklevel=2)
        return ImportanceScores("gini", np.zeros(forest.n_features))
    return ImportanceScores("gini", total / total.sum())


def _metric(forest: Forest, X: np.ndarray, y: np.ndarray) -> float:
    pred = forest.predict(X)
    if forest.task == CLASSIFICATION:
        return float(np.mean(pred == y))
    return -float(np.mean((pred - y) ** 2))


def permutation_importance(forest: Forest, test: Dataset, repeats: int = PERMUTATION_REPEATS,
                           seed: int = 0) -> ImportanceScores:
    """Mean metric drop over ``repeats`` shuffles of each column.

    Feature ``f`` shuffles with its own stream ``SeedSequence([seed, f])``,
    so scores do not depend on the order features are processed in.
    """
    if test.n == 0:
        raise ValueError("test set is empty")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if test.d != forest.n_features:
        raise ValueError(f"forest expects {forest.n_features} features, test set has {test.d}")
    base = _metric(forest, test.X, test.y)
    scores = np.zeros(test.d)
    X = np.array(test.X)
    for f in range(test.d):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), f]))
        column = X[:, f].copy()
        drops = []
        for _ in range(repeats):
            X[:, f] = rng.permutation(column)
            drops.append(base - _metric(forest, X, test.y))
        X[:, f] = column
        scores[f] = np.mean(drops)
    return ImportanceScores("permutation", scores)


def load_external_scores(path: str | Path, schema: FeatureSchema, method: str = "external") -> ImportanceScores:
    """Read a (feature_name, score) TSV and align it to ``schema`` order.

    A header row is accepted when its second field is not a number.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter="\t") if r and any(c.strip() for c in r)]
    if rows:
        try:
            float(rows[0][1])
        except (IndexError, ValueError):
            rows = rows[1:]
    found: dict[str, float] = {}
    for lineno, row in enumerate(rows, start=1):
        if len(row) < 2:
            raise SchemaError(f"score row {lineno} needs a feature name and a score")
        name = row[0].strip()
        if name in found:
            raise SchemaError(f"duplicate score row for feature {name!r}")
        try:
            found[name] = float(row[1])
        except ValueError:
            raise SchemaError(f"score for {name!r} is not a number: {row[1]!r}") from None
    unknown = sorted(set(found) - set(schema.names))
    missing = [n for n in schema.names if n not in found]
    if unknown:
        raise SchemaError(f"scores for unknown features: {', '.join(unknown)}")
    if missing:
        raise SchemaError(f"no score for features: {', '.join(missing)}")
    return ImportanceScores(method, np.array([found[n] for n in schema.names]))


def write_scores_tsv(scores: ImportanceScores, names: list[str], path: str | Path) -> None:
    if len(names) != scores.d:
        raise ValueError(f"{len(names)} names for {scores.d} scores")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["feature_name", "score"])
        for name, s in zip(names, scores.scores):
            w.writerow([name, f"{s:.10g}"])
