"""Co-occurrence counts of decision-path features and their 2-D embedding.

Two positions ``i < j`` of the same sentence co-occur when ``j - i <= w``.
Each co-occurring pair adds one to ``M[a, b]`` and one to ``M[b, a]``, so a
feature repeated within the window adds two to its diagonal entry. The
embedding is the rank-2 truncated SVD of the raw counts: row ``i`` of
``U[:, :2] * S[:2]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateMatrixError, UndefinedAngleError


@dataclass(frozen=True, eq=False)
class CooccurrenceMatrix:
    m: np.ndarray
    window: int

    @property
    def d(self) -> int:
        return self.m.shape[0]


@dataclass(frozen=True, eq=False)
class FeatureEmbedding:
    vectors: np.ndarray  # (d, 2)
    singular_values: np.ndarray  # (sigma_1, sigma_2)
    explained_variance: float
    spectrum: np.ndarray  # every singular value of M, descending

    @property
    def d(self) -> int:
        return self.vectors.shape[0]

    @property
    def importance(self) -> np.ndarray:
        return importance(self)

    @property
    def angles(self) -> np.ndarray:
        """Direction of every vector in radians, in (-pi, pi]."""
        return np.arctan2(self.vectors[:, 1], self.vectors[:, 0])


def _pack(sentences: Iterable[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Flatten sentences into (features, sentence id) arrays."""
    lengths, parts = [], []
    for s in sentences:
        lengths.append(len(s))
        parts.extend(s)
    flat = np.asarray(parts, dtype=np.int64)
    sid = np.repeat(np.arange(len(lengths)), lengths)
    return flat, sid


def build_cooccurrence(sentences: Iterable[Sequence[int]], d: int, w: int = 3) -> CooccurrenceMatrix:
    """Windowed co-occurrence counts of features within sentences."""
    if w < 1:
        raise ValueError(f"window must be >= 1, got {w}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    flat, sid = _pack(sentences)
    if flat.size and (flat.min() < 0 or flat.max() >= d):
        raise ValueError(f"sentence contains a feature index outside [0, {d})")
    counts = np.zeros(d * d, dtype=np.int64)
    for offset in range(1, w + 1):
        same = sid[offset:] == sid[:-offset]
        a, b = flat[:-offset][same], flat[offset:][same]
        counts += np.bincount(a * d + b, minlength=d * d)
    upper = counts.reshape(d, d)
    m = (upper + upper.T).astype(np.float64)
    return CooccurrenceMatrix(m, w)


def _fix_signs(U: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    U = U.copy()
    for k in range(U.shape[1]):
        j = int(np.argmax(np.abs(U[:, k])))
        if U[j, k] < 0:
            U[:, k] = -U[:, k]
    return U


def embed(M: CooccurrenceMatrix | np.ndarray) -> FeatureEmbedding:
    """Rank-2 truncated SVD of the raw count matrix (no centering or reweighting)."""
    m = M.m if isinstance(M, CooccurrenceMatrix) else np.asarray(M, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("co-occurrence matrix must be square")
    if not np.any(m):
        raise DegenerateMatrixError("co-occurrence matrix is all zero; no sentences to embed")
    U, s, _ = np.linalg.svd(m)
    r = min(2, len(s))
    U2 = _fix_signs(U[:, :r])
    vectors = np.zeros((m.shape[0], 2))
    vectors[:, :r] = U2 * s[:r]
    sv = np.zeros(2)
    sv[:r] = s[:r]
    energy = float(np.sum(s * s))
    explained = float(np.sum(sv * sv) / energy)
    return FeatureEmbedding(vectors, sv, min(explained, 1.0), s)


def truncated_reconstruction(M: CooccurrenceMatrix | np.ndarray, rank: int = 2) -> np.ndarray:
    """``U_r S_r V_r^T`` for the leading ``rank`` singular triplets."""
    m = M.m if isinstance(M, CooccurrenceMatrix) else np.asarray(M, dtype=np.float64)
    U, s, Vt = np.linalg.svd(m)
    return (U[:, :rank] * s[:rank]) @ Vt[:rank]


def explained_variance(E: FeatureEmbedding) -> float:
    return E.explained_variance


def importance(E: FeatureEmbedding) -> np.ndarray:
    """Euclidean norm of every feature vector."""
    v = E.vectors
    return np.hypot(v[:, 0], v[:, 1])


def angular_distance(u, v) -> float:
    """Absolute angle between two non-zero 2-D vectors, in [0, pi]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not np.any(u) or not np.any(v):
        raise UndefinedAngleError("angle of a zero vector is undefined")
    diff = math.atan2(u[1], u[0]) - math.atan2(v[1], v[0])
    return abs(math.remainder(diff, 2 * math.pi))


def pairwise_angle_gap(theta_a: np.ndarray, theta_b: np.ndarray) -> np.ndarray:
    """Vectorised :func:`angular_distance` for arrays of angles."""
    diff = np.asarray(theta_a) - np.asarray(theta_b)
    return np.abs(np.remainder(diff + np.pi, 2 * np.pi) - np.pi)


def write_embedding_tsv(E: FeatureEmbedding, names: Sequence[str], path: str | Path) -> None:
    """TSV with columns feature_name, vx, vy, importance, angle_degrees."""
    if len(names) != E.d:
        raise ValueError(f"{len(names)} names for {E.d} vectors")
    imp = importance(E)
    deg = np.degrees(E.angles)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["feature_name", "vx", "vy", "importance", "angle_degrees"])
        for i, name in enumerate(names):
            vx, vy = E.vectors[i]
            w.writerow([name, f"{vx:.10g}", f"{vy:.10g}", f"{imp[i]:.10g}", f"{deg[i]:.6f}"])


def read_embedding_tsv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    names = [r[0] for r in rows[1:]]
    vectors = np.array([[float(r[1]), float(r[2])] for r in rows[1:]])
    return names, vectors
