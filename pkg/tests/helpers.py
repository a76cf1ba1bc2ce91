"""Small dataset builders shared by the test modules."""

import numpy as np

from featvec.dataset import CLASSIFICATION, Dataset, FeatureSchema, FeatureSpec


def make_ds(X, y, task=CLASSIFICATION):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    schema = FeatureSchema(tuple(FeatureSpec(f"x{i}") for i in range(X.shape[1])), "y", task)
    if task == CLASSIFICATION:
        y = np.asarray(y, dtype=np.int64)
        return Dataset(X, y, schema, classes=tuple(range(int(y.max()) + 1)))
    return Dataset(X, np.asarray(y, dtype=np.float64), schema)


def threshold_data(n=2000, d=5, seed=0, noise=0.0):
    """y = 1{x0 + noise * e > 0} on standard normal features."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    e = rng.standard_normal(n) if noise else 0.0
    return make_ds(X, (X[:, 0] + noise * e > 0).astype(np.int64))
