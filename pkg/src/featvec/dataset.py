"""Tabular data loading, encoding and splitting.

A :class:`Dataset` is the single source of truth for feature names and
column order. Categorical columns are stored as non-negative integer codes
(first-appearance order) inside a float64 matrix; the code tables are kept
so that codes can be decoded for reporting.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DataParseError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
CLASSIFICATION = "classification"
REGRESSION = "regression"

MISSING_TOKENS = frozenset({"", "na", "nan", "?", "null"})


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = NUMERIC

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature list plus the target column and task."""

    features: tuple[FeatureSpec, ...]
    target: str
    task: str = CLASSIFICATION

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise SchemaError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate feature names: {dup}")
        if self.target in names:
            raise SchemaError(f"target {self.target!r} is also listed as a feature")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise SchemaError(f"unknown task {self.task!r}")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def d(self) -> int:
        return len(self.features)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def select(self, columns: Sequence[int]) -> FeatureSchema:
        return FeatureSchema(tuple(self.features[c] for c in columns), self.target, self.task)

    def to_dict(self) -> dict:
        return {
            "features": [{"name": f.name, "kind": f.kind} for f in self.features],
            "target": {"name": self.target, "task": self.task},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> FeatureSchema:
        try:
            feats = tuple(FeatureSpec(f["name"], f.get("kind", NUMERIC)) for f in obj["features"])
            target = obj["target"]
            return cls(feats, target["name"], target.get("task", CLASSIFICATION))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> FeatureSchema:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``X`` (n x d, float64), target ``y`` and schema.

    For classification ``y`` holds contiguous class codes ``0..C-1`` and
    ``classes`` the original labels; for regression ``y`` is float64.
    ``codes`` maps each categorical feature name to its code table.
    """

    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema
    codes: dict[str, tuple[str, ...]] = field(default_factory=dict)
    classes: tuple = ()

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        if X.shape[1] != self.schema.d:
            raise SchemaError(f"X has {X.shape[1]} columns, schema has {self.schema.d}")
        if self.task == CLASSIFICATION:
            y = np.asarray(self.y)
            if y.size and not np.all(y == np.round(y)):
                raise DataError("classification target must hold integer class codes")
            y = y.astype(np.int64)
            if y.size and y.min() < 0:
                raise DataError("class codes must be non-negative")
            classes = tuple(self.classes) or tuple(range(int(y.max()) + 1 if y.size else 0))
            object.__setattr__(self, "classes", classes)
        else:
            y = np.asarray(self.y, dtype=np.float64)
        if y.shape != (X.shape[0],):
            raise ValueError("y must have one entry per row of X")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains missing or non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def task(self) -> str:
        return self.schema.task

    @property
    def feature_names(self) -> list[str]:
        return self.schema.names

    @property
    def n_classes(self) -> int:
        return len(self.classes) if self.task == CLASSIFICATION else 0

    def take(self, rows) -> Dataset:
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.schema, self.codes, self.classes)

    def select(self, columns: Sequence[int]) -> Dataset:
        """Project onto ``columns`` (in the given order)."""
        columns = [int(c) for c in columns]
        schema = self.schema.select(columns)
        codes = {k: v for k, v in self.codes.items() if k in schema.names}
        return Dataset(self.X[:, columns], self.y, schema, codes, self.classes)

    def decode(self, name: str, values) -> list[str]:
        table = self.codes[name]
        return [table[int(v)] for v in np.asarray(values).ravel()]


def _parse_float(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _is_missing(text: str) -> bool:
    return text.strip().lower() in MISSING_TOKENS


def infer_schema(header: Sequence[str], rows: Sequence[Sequence[str]],
                 target: str | None = None, task: str | None = None) -> FeatureSchema:
    """Guess a schema from raw cells.

    A column is categorical iff any non-missing cell fails to parse as a
    number. The target defaults to the last column; its task defaults to
    classification when it is categorical or integer-valued with at most
    20 distinct values.
    """
    target = header[-1] if target is None else target
    if target not in header:
        raise SchemaError(f"target column {target!r} not found in header")
    kinds = {}
    for j, name in enumerate(header):
        cells = [r[j].strip() for r in rows if not _is_missing(r[j])]
        numeric = all(_parse_float(c) is not None for c in cells)
        kinds[name] = NUMERIC if numeric else CATEGORICAL
    if task is None:
        j = header.index(target)
        cells = [r[j].strip() for r in rows if not _is_missing(r[j])]
        if kinds[target] == CATEGORICAL:
            task = CLASSIFICATION
        else:
            values = [_parse_float(c) for c in cells]
            integral = all(v == round(v) for v in values)
            task = CLASSIFICATION if integral and len(set(values)) <= 20 else REGRESSION
    feats = tuple(FeatureSpec(h, kinds[h]) for h in header if h != target)
    return FeatureSchema(feats, target, task)


def _class_sort_key(label: str):
    value = _parse_float(label)
    return (0, value, "") if value is not None else (1, 0.0, label)


def load_csv(path: str | Path, schema: FeatureSchema | None = None, *,
             impute: bool = False, target: str | None = None) -> Dataset:
    """Read a comma-delimited UTF-8 CSV with a header row.

    Columns are reordered to schema order; header columns not in the schema
    are dropped with a warning. Categorical cells are coded by first
    appearance. Missing cells raise :class:`DataError` unless ``impute`` is
    set, in which case numeric columns get the median and categorical ones
    the mode. Missing targets always raise.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    for lineno, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(r)}")
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")

    if schema is None:
        schema = infer_schema(header, rows, target=target)
    wanted = schema.names + [schema.target]
    missing_cols = [c for c in wanted if c not in header]
    if missing_cols:
        raise SchemaError(f"{path}: columns missing from header: {missing_cols}")
    extra = [h for h in header if h not in wanted]
    if extra:
        warnings.warn(f"ignoring columns not in schema: {extra}", stacklevel=2)
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, found {len(rows)}")

    n, d = len(rows), schema.d
    X = np.empty((n, d), dtype=np.float64)
    codes: dict[str, tuple[str, ...]] = {}
    for j, spec in enumerate(schema.features):
        col = header.index(spec.name)
        cells = [r[col].strip() for r in rows]
        missing = [i for i, c in enumerate(cells) if _is_missing(c)]
        missing_set = set(missing)
        if missing and not impute:
            raise DataError(
                f"column {spec.name!r} has {len(missing)} missing value(s), first at row "
                f"{missing[0] + 2}; pass impute=True (--impute) to fill them")
        if spec.kind == NUMERIC:
            for i, c in enumerate(cells):
                if i in missing_set:
                    X[i, j] = np.nan
                    continue
                v = _parse_float(c)
                if v is None:
                    raise DataParseError(i + 2, spec.name, c)
                X[i, j] = v
            if missing:
                X[missing, j] = np.median(np.delete(X[:, j], missing))
        else:
            table: dict[str, int] = {}
            for c in cells:
                if not _is_missing(c) and c not in table:
                    table[c] = len(table)
            if missing:
                present = [c for c in cells if not _is_missing(c)]
                counts = {c: present.count(c) for c in table}
                mode = max(table, key=lambda c: (counts[c], -table[c]))
                cells = [mode if _is_missing(c) else c for c in cells]
            X[:, j] = [table[c] for c in cells]
            codes[spec.name] = tuple(table)

    tcol = header.index(schema.target)
    tcells = [r[tcol].strip() for r in rows]
    bad = [i for i, c in enumerate(tcells) if _is_missing(c)]
    if bad:
        raise DataError(f"target {schema.target!r} missing at row {bad[0] + 2}")
    if schema.task == CLASSIFICATION:
        labels = sorted(set(tcells), key=_class_sort_key)
        lookup = {c: k for k, c in enumerate(labels)}
        y = np.array([lookup[c] for c in tcells], dtype=np.int64)
        classes = tuple(labels)
    else:
        y = np.empty(n, dtype=np.float64)
        for i, c in enumerate(tcells):
            v = _parse_float(c)
            if v is None:
                raise DataParseError(i + 2, schema.target, c)
            y[i] = v
        classes = ()
    return Dataset(X, y, schema, codes, classes)


def load_wine_quality() -> Dataset:
    """The bundled UCI Wine Quality (red) data: 1599 rows, 11 numeric features."""
    base = resources.files("featvec") / "data"
    with resources.as_file(base / "winequality-red.csv") as csv_path, \
            resources.as_file(base / "winequality-red.schema.json") as schema_path:
        return load_csv(csv_path, FeatureSchema.load(schema_path))


def save_csv(ds: Dataset, path: str | Path) -> None:
    """Write ``ds`` back to CSV (categoricals and classes decoded)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.feature_names + [ds.schema.target])
        decoded = {name: ds.decode(name, ds.X[:, j])
                   for j, name in enumerate(ds.feature_names) if name in ds.codes}
        for i in range(ds.n):
            row = [decoded[name][i] if name in decoded else repr(float(ds.X[i, j]))
                   for j, name in enumerate(ds.feature_names)]
            if ds.task == CLASSIFICATION:
                row.append(str(ds.classes[int(ds.y[i])]))
            else:
                row.append(repr(float(ds.y[i])))
            w.writerow(row)


def _stratified_quota(counts: np.ndarray, n_test: int) -> np.ndarray:
    """Largest-remainder allocation of ``n_test`` across classes."""
    exact = counts * n_test / counts.sum()
    quota = np.floor(exact).astype(np.int64)
    remainder = exact - quota
    short = n_test - quota.sum()
    # stable sort: ties go to the lower class code
    for c in np.argsort(-remainder, kind="stable")[:short]:
        quota[c] += 1
    return quota


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded, disjoint split; stratified by class when every class has >= 2 rows."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(math.floor(ds.n * test_fraction))
    if n_test < 1 or ds.n - n_test < 1:
        raise ValueError(f"split of n={ds.n} at fraction {test_fraction} leaves an empty side")
    rng = np.random.default_rng(seed)
    stratify = False
    if ds.task == CLASSIFICATION:
        counts = np.bincount(ds.y, minlength=ds.n_classes)
        present = counts[counts > 0]
        stratify = bool(np.all(present >= 2))
    if stratify:
        quota = _stratified_quota(counts, n_test)
        test_parts = []
        for c in range(len(counts)):
            members = np.flatnonzero(ds.y == c)
            test_parts.append(rng.permutation(members)[: quota[c]])
        test_idx = np.concatenate(test_parts)
    else:
        test_idx = rng.permutation(ds.n)[:n_test]
    test_idx = np.sort(test_idx)
    train_idx = np.setdiff1d(np.arange(ds.n), test_idx)
    return ds.take(train_idx), ds.take(test_idx)
