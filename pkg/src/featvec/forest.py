"""Random-subspace CART trees and decision-path sentences.

Every split looks at a fresh random subset of ``subset_size`` features
(default ``ceil(sqrt(d))``) and picks the (feature, threshold) pair with the
largest impurity decrease: Gini for classification, variance for
regression. Thresholds are midpoints between consecutive distinct values.
Equal-gain candidates go to the feature drawn first at that node, then to
the smallest threshold; the draw order is seeded, so this is deterministic
without favouring low column indices.

Trees are stored as flat preorder node arrays. Tree ``t`` of a forest
trained with seed ``s`` draws all of its randomness from
``SeedSequence([s, t])``, so the forest does not depend on how the trees
are scheduled across workers.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ._cart import grow_tree
from .dataset import CLASSIFICATION, REGRESSION, Dataset
from .errors import UnsplittableDataError

FOREST_FORMAT = "featvec-forest"
FOREST_VERSION = 1
MAX_EMPTY_TREES = 50

Sentence = tuple[int, ...]


@dataclass(frozen=True)
class TrainParams:
    max_depth: int = 6
    min_samples_leaf: int = 1
    subset_size: int | None = None
    bootstrap: bool = False
    task: str = CLASSIFICATION

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.subset_size is not None and self.subset_size < 1:
            raise ValueError(f"subset_size must be >= 1, got {self.subset_size}")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task {self.task!r}")

    def resolved_subset(self, d: int) -> int:
        """Candidate features per split for a d-feature problem."""
        if self.subset_size is None:
            return max(1, math.ceil(math.sqrt(d)))
        if self.subset_size > d:
            raise ValueError(f"subset_size {self.subset_size} exceeds d={d}")
        return self.subset_size


@dataclass(frozen=True, eq=False)
class Tree:
    """Preorder node arrays; ``feature == -1`` marks a leaf.

    Rows with ``x[feature] <= threshold`` go left. ``value`` holds the class
    distribution at each node (classification) or the mean target in a
    single column (regression).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray
    impurity_decrease: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))

    @property
    def n_splits(self) -> int:
        return self.n_nodes - self.n_leaves

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            r, nd = rows[active], node[active]
            go_left = X[r, feat[active]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "n_samples": self.n_samples.tolist(),
            "impurity": self.impurity.tolist(),
            "impurity_decrease": self.impurity_decrease.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> Tree:
        ints = ("feature", "left", "right", "n_samples")
        return cls(**{k: np.asarray(obj[k], dtype=np.int64 if k in ints else np.float64)
                      for k in ("feature", "threshold", "left", "right", "n_samples",
                                "impurity", "impurity_decrease", "value")})


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


def train_tree(ds: Dataset, params: TrainParams, seed: int | np.random.Generator) -> Tree:
    """Greedy random-subspace CART on ``ds``.

    ``seed`` may be an int or a Generator. Each node draws a fresh
    candidate subset; a node becomes a leaf at ``max_depth``, when pure,
    when it cannot honour ``min_samples_leaf`` or when no candidate
    feature separates its rows.
    """
    if ds.n == 0:
        raise ValueError("cannot train on an empty dataset")
    if params.task != ds.task:
        params = replace(params, task=ds.task)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _TrainingData(ds.X, ds.y, params, max(ds.n_classes, 1)).tree(rng)


class _TrainingData:
    """Arrays shared by every tree of one training run, presorted once."""

    def __init__(self, X, y, params: TrainParams, n_classes: int):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.XT = np.ascontiguousarray(self.X.T)
        self.params = params
        self.n_classes = n_classes
        self.classification = params.task == CLASSIFICATION
        self.y_int = np.ascontiguousarray(y, dtype=np.int64) if self.classification \
            else np.zeros(len(y), dtype=np.int64)
        self.y_float = np.ascontiguousarray(y, dtype=np.float64)
        self.k = params.resolved_subset(self.X.shape[1])
        self.presorted = None if params.bootstrap else self._argsort(self.X)

    @staticmethod
    def _argsort(X):
        return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.int64)

    def tree(self, rng: np.random.Generator) -> Tree:
        n = self.X.shape[0]
        if self.params.bootstrap:
            samples = rng.integers(0, n, size=n)
            order = self._argsort(self.X[samples])
        else:
            samples = np.arange(n, dtype=np.int64)
            order = self.presorted.copy()
        kernel_seed = int(rng.integers(0, 2**31 - 1))
        arrays = grow_tree(self.XT, self.y_int, self.y_float, self.n_classes,
                           self.classification, self.params.max_depth,
                           self.params.min_samples_leaf, self.k, kernel_seed,
                           samples, order)
        return Tree(*arrays)

    def indexed_tree(self, seed: int, tree_index: int) -> Tree:
        return self.tree(tree_rng(seed, tree_index))


def extract_sentences(tree: Tree) -> list[Sentence]:
    """Split features along every root-to-leaf path, in path order.

    One sentence per leaf; a tree without splits yields none.
    """
    if tree.feature[0] < 0:
        return []
    out: list[Sentence] = []
    stack: list[tuple[int, Sentence]] = [(0, ())]
    feature, left, right = tree.feature, tree.left, tree.right
    while stack:
        node, path = stack.pop()
        f = int(feature[node])
        if f < 0:
            out.append(path)
            continue
        path = path + (f,)
        # right first so leaves come out in preorder
        stack.append((int(right[node]), path))
        stack.append((int(left[node]), path))
    return out


@dataclass(frozen=True, eq=False)
class Forest:
    trees: list[Tree]
    params: TrainParams
    seed: int
    n_features: int
    n_classes: int = 0
    task: str = CLASSIFICATION
    feature_names: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.trees)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected rows of width {self.n_features}, got {X.shape[1]}")
        if not self.trees:
            raise ValueError("forest has no trees")
        return X

    def predict(self, X) -> np.ndarray:
        """Majority vote of per-tree argmax classes, or mean of leaf means."""
        X = self._check(X)
        if self.task == CLASSIFICATION:
            votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
            rows = np.arange(X.shape[0])
            for tree in self.trees:
                leaf_class = np.argmax(tree.value, axis=1)
                np.add.at(votes, (rows, leaf_class[tree.apply(X)]), 1)
            return np.argmax(votes, axis=1)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.value[tree.apply(X), 0]
        return total / len(self.trees)

    def predict_one(self, row):
        return self.predict(np.asarray(row, dtype=np.float64)[None, :])[0]

    def score(self, ds: Dataset) -> float:
        """Accuracy (classification) or MSE (regression) on ``ds``."""
        pred = self.predict(ds.X)
        if self.task == CLASSIFICATION:
            return float(np.mean(pred == ds.y))
        return float(np.mean((pred - ds.y) ** 2))

    def to_dict(self) -> dict:
        return {
            "format": FOREST_FORMAT,
            "version": FOREST_VERSION,
            "task": self.task,
            "seed": self.seed,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "feature_names": list(self.feature_names),
            "params": asdict(self.params),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> Forest:
        if obj.get("format") != FOREST_FORMAT:
            raise ValueError("not a forest document")
        if obj.get("version") != FOREST_VERSION:
            raise ValueError(f"unsupported forest version {obj.get('version')}")
        return cls(
            trees=[Tree.from_dict(t) for t in obj["trees"]],
            params=TrainParams(**obj["params"]),
            seed=obj["seed"],
            n_features=obj["n_features"],
            n_classes=obj["n_classes"],
            task=obj["task"],
            feature_names=obj.get("feature_names", []),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"))

    @classmethod
    def load(cls, path: str | Path) -> Forest:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def resolve_workers(n_jobs: int | None) -> int:
    """``n_jobs`` if given, else ``$FEATVEC_THREADS``, else 1."""
    if n_jobs is None:
        n_jobs = int(os.environ.get("FEATVEC_THREADS", "1") or 1)
    return max(1, int(n_jobs))


class _TreeSource:
    """Yields trees 0, 1, 2, ... in index order, optionally from a thread pool.

    The kernel releases the GIL, so threads train trees concurrently. Each
    tree depends only on (seed, index), never on which thread built it.
    """

    def __init__(self, ds: Dataset, params: TrainParams, seed: int, n_jobs: int):
        self.data = _TrainingData(ds.X, ds.y, params, max(ds.n_classes, 1))
        self.seed = seed
        self.n_jobs = n_jobs
        self.pool = None

    def __enter__(self):
        if self.n_jobs > 1:
            self.pool = ThreadPoolExecutor(self.n_jobs)
        return self

    def __exit__(self, *exc):
        if self.pool is not None:
            self.pool.shutdown(cancel_futures=True)

    def _one(self, tree_index: int) -> Tree:
        return self.data.indexed_tree(self.seed, tree_index)

    def batches(self):
        start = 0
        size = 1 if self.pool is None else 4 * self.n_jobs
        while True:
            ids = range(start, start + size)
            if self.pool is None:
                yield [self._one(i) for i in ids]
            else:
                yield list(self.pool.map(self._one, ids))
            start += size


def _forest_params(ds: Dataset, params: TrainParams) -> TrainParams:
    if params.task != ds.task:
        params = replace(params, task=ds.task)
    params.resolved_subset(ds.d)
    return params


def train_forest(ds: Dataset, n_trees: int, params: TrainParams, seed: int,
                 n_jobs: int | None = None) -> Forest:
    """A fixed-size forest (used for cross-validation and retraining curves)."""
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    params = _forest_params(ds, params)
    trees: list[Tree] = []
    with _TreeSource(ds, params, seed, resolve_workers(n_jobs)) as source:
        for batch in source.batches():
            trees.extend(batch[: n_trees - len(trees)])
            if len(trees) >= n_trees:
                break
    return Forest(trees, params, seed, ds.d, ds.n_classes, ds.task, ds.feature_names)


def grow_until_rules(ds: Dataset, R: int, params: TrainParams, seed: int,
                     n_jobs: int | None = None) -> tuple[Forest, list[Sentence]]:
    """Train trees until at least ``R`` decision paths have been collected.

    All paths of the last tree are kept, so the count may exceed ``R``.
    Raises :class:`UnsplittableDataError` after 50 consecutive trees
    without a split.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    params = _forest_params(ds, params)
    trees: list[Tree] = []
    sentences: list[Sentence] = []
    empty_run = 0
    with _TreeSource(ds, params, seed, resolve_workers(n_jobs)) as source:
        for batch in source.batches():
            for tree in batch:
                trees.append(tree)
                found = extract_sentences(tree)
                sentences.extend(found)
                empty_run = 0 if found else empty_run + 1
                if empty_run >= MAX_EMPTY_TREES:
                    raise UnsplittableDataError(
                        f"{MAX_EMPTY_TREES} consecutive trees made no split; "
                        "the data cannot be split under these parameters")
                if len(sentences) >= R:
                    break
            if len(sentences) >= R:
                break
    forest = Forest(trees, params, seed, ds.d, ds.n_classes, ds.task, ds.feature_names)
    return forest, sentences


def _kfold(ds: Dataset, folds: int, seed: int) -> list[np.ndarray]:
    """Fold membership, stratified by class for classification."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(ds.n, dtype=np.int64)
    if ds.task == CLASSIFICATION:
        offset = 0
        for c in range(ds.n_classes):
            members = rng.permutation(np.flatnonzero(ds.y == c))
            assignment[members] = (np.arange(len(members)) + offset) % folds
            offset += len(members)
    else:
        perm = rng.permutation(ds.n)
        assignment[perm] = np.arange(ds.n) % folds
    return [np.flatnonzero(assignment == k) for k in range(folds)]


def cross_validate_depth(ds: Dataset, depths: Sequence[int], folds: int = 3, seed: int = 0,
                         n_trees: int = 10, params: TrainParams | None = None,
                         n_jobs: int | None = None) -> int:
    """Depth with the best mean validation score; ties go to the smaller depth.

    Each fold fits an ``n_trees`` random-subspace forest; the score is
    accuracy (classification) or MSE (regression).
    """
    depths = sorted(set(int(x) for x in depths))
    if not depths:
        raise ValueError("depth list is empty")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if ds.task == CLASSIFICATION:
        counts = np.bincount(ds.y, minlength=ds.n_classes)
        if np.any(counts[counts > 0] < folds):
            raise ValueError(f"every class needs at least {folds} rows for {folds}-fold CV")
    params = params or TrainParams(task=ds.task)
    fold_idx = _kfold(ds, folds, seed)
    best_depth, best_score = None, None
    for depth in depths:
        p = replace(params, max_depth=depth, task=ds.task)
        scores = []
        for k, val in enumerate(fold_idx):
            train = np.concatenate([f for j, f in enumerate(fold_idx) if j != k])
            forest = train_forest(ds.take(train), n_trees, p, seed + 7919 * (k + 1), n_jobs)
            scores.append(forest.score(ds.take(val)))
        score = float(np.mean(scores))
        if ds.task == REGRESSION:
            score = -score
        if best_score is None or score > best_score:
            best_depth, best_score = depth, score
    return best_depth
