"""Deterministic generators for the two synthetic benchmarks.

``gen_exchangeable_pairs``: twenty independent standard normals, the label
depends on three pairs of features (0,1), (2,3), (4,5) through threshold
clauses in which the two members of a pair are interchangeable.

``gen_gmm_nonnull``: a fixed three-component, twenty-dimensional Gaussian
mixture where only features 0, 1, 2 drive the label; the other seventeen
are correlated with them but conditionally null.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .dataset import CLASSIFICATION, Dataset, FeatureSchema, FeatureSpec
from .knockoffs import GaussianMixture

N_FEATURES = 20


@dataclass(frozen=True)
class PairSpec:
    pairs: tuple[tuple[int, int], ...] = ((0, 1), (2, 3), (4, 5))
    n_features: int = N_FEATURES

    def __post_init__(self):
        flat = [i for p in self.pairs for i in p]
        if len(set(flat)) != len(flat):
            raise ValueError("pairs must be disjoint")
        if self.n_features != N_FEATURES or len(self.pairs) != 3:
            raise ValueError("the pairs benchmark has exactly 20 features and 3 pairs")

    @property
    def informative(self) -> list[int]:
        return sorted(i for p in self.pairs for i in p)

    @property
    def null(self) -> list[int]:
        return [i for i in range(self.n_features) if i not in self.informative]


# Each clause is a weight and a conjunction of (pair, op, threshold) literals;
# ops are ">", "<" and "in" (open interval). A clause fires if it holds for
# some choice of one member from every pair it mentions, which makes the
# pair members interchangeable. Bands force repeated splits on one feature.
# With weight 8 and intercept -12 the label is, up to a 2% flip rate,
# "at least two of the three pairs have a member in the band".
_BAND = (-0.4, 0.4)
PAIR_CLAUSES = (
    (8.0, ((0, "in", _BAND),)),
    (8.0, ((1, "in", _BAND),)),
    (8.0, ((2, "in", _BAND),)),
)
PAIR_INTERCEPT = -12.0


def _literal(x, op, thr):
    if op == "in":
        return (x > thr[0]) & (x < thr[1])
    return x > thr if op == ">" else x < thr


def pair_scores(X: np.ndarray, spec: PairSpec = PairSpec()) -> np.ndarray:
    """Logit of P(y = 1 | x); invariant to swapping columns within a pair."""
    X = np.asarray(X, dtype=np.float64)
    score = np.full(X.shape[0], PAIR_INTERCEPT)
    for weight, literals in PAIR_CLAUSES:
        fired = np.zeros(X.shape[0], dtype=bool)
        members = [spec.pairs[p] for p, _, _ in literals]
        for choice in product(*members):
            hit = np.ones(X.shape[0], dtype=bool)
            for col, (_, op, thr) in zip(choice, literals):
                hit &= _literal(X[:, col], op, thr)
            fired |= hit
        score += weight * fired
    return score


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _schema(d: int) -> FeatureSchema:
    return FeatureSchema(tuple(FeatureSpec(f"x{i}") for i in range(d)), "y", CLASSIFICATION)


def gen_exchangeable_pairs(n: int, seed: int) -> Dataset:
    if n < 1000:
        raise ValueError("n must be >= 1000")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    X = rng.standard_normal((n, N_FEATURES))
    p = _sigmoid(pair_scores(X))
    y = (rng.random(n) < p).astype(np.int64)
    return Dataset(X, y, _schema(N_FEATURES), classes=(0, 1))


GMM_DIM = 20
GMM_NONNULL = (0, 1, 2)
GMM_BETA = np.array([1.0, -1.0, 1.0])
GMM_NOISE = 0.5
_GMM_LAYOUT_SEED = 20210401


def _random_correlation(rng, dim, floor, rank):
    """Random correlation matrix with smallest eigenvalue at least ``floor``."""
    A = rng.standard_normal((dim, rank))
    C = A @ A.T
    s = np.sqrt(np.diag(C))
    C = C / np.outer(s, s)
    return floor * np.eye(dim) + (1 - floor) * C


GMM_CORR_FLOOR = 0.05
GMM_CORR_RANK = 5


def true_mixture() -> GaussianMixture:
    """The fixed mixture behind :func:`gen_gmm_nonnull`.

    Features 0-2 have zero mean in every component; features 3-19 get
    component-specific means. Each component has a full low-rank-plus-floor
    correlation, so features 3-19 are noisy proxies of 0-2 and still null:
    y depends on x only through x0, x1, x2.
    """
    rng = np.random.default_rng(_GMM_LAYOUT_SEED)
    k, dim, q = 3, GMM_DIM, len(GMM_NONNULL)
    weights = np.array([0.3, 0.3, 0.4])
    means = np.zeros((k, dim))
    means[:, q:] = rng.choice([-2.0, 2.0], size=(k, dim - q)) * rng.uniform(0.5, 1.0, size=(k, dim - q))
    covs = np.zeros((k, dim, dim))
    for c in range(k):
        scale = rng.uniform(0.7, 1.3, size=dim)
        corr = _random_correlation(rng, dim, GMM_CORR_FLOOR, GMM_CORR_RANK)
        covs[c] = corr * np.outer(scale, scale)
    return GaussianMixture(weights, means, covs)


def gen_gmm_nonnull(n: int, seed: int) -> tuple[Dataset, GaussianMixture]:
    """Mixture data with y = 1{beta . (x0, x1, x2) + noise > 0}."""
    if n < 1000:
        raise ValueError("n must be >= 1000")
    gmm = true_mixture()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2]))
    X, _ = gmm.sample(n, rng)
    y = (X[:, list(GMM_NONNULL)] @ GMM_BETA + GMM_NOISE * rng.standard_normal(n) > 0)
    return Dataset(X, y.astype(np.int64), _schema(GMM_DIM), classes=(0, 1)), gmm
