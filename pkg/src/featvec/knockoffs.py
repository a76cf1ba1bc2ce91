"""Gaussian-mixture model-X knockoffs and the angle permutation test.

Knockoffs for mixture data: draw a component for each row from its
posterior given the row, then sample the Gaussian conditional knockoff of
that component,

    x_tilde | x ~ N(x - D S^-1 (x - mu), 2D - D S^-1 D),   D = diag(s),

with equicorrelated ``s``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .embedding import FeatureEmbedding, importance, pairwise_angle_gap
from .errors import DataError, NumericalError, UndefinedAngleError

S_SHRINK = 0.999
RIDGE_SCALE = 1e-6


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d)
    covariances: np.ndarray  # (k, d, d)
    log_likelihood: list[float] = field(default_factory=list)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        cov = np.asarray(self.covariances, dtype=np.float64).reshape(len(w), mu.shape[1], mu.shape[1])
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("mixture weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", w / w.sum())
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def component_log_density(self, X: np.ndarray) -> np.ndarray:
        """(n, k) array of log N(x | mu_c, Sigma_c)."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], self.k))
        for c in range(self.k):
            try:
                L = linalg.cholesky(self.covariances[c], lower=True)
            except linalg.LinAlgError:
                raise NumericalError(f"covariance of component {c} is not positive definite") from None
            z = linalg.solve_triangular(L, (X - self.means[c]).T, lower=True)
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
            out[:, c] = -0.5 * (np.sum(z * z, axis=0) + logdet + self.d * np.log(2 * np.pi))
        return out

    def posterior(self, X: np.ndarray) -> np.ndarray:
        """Component responsibilities P(z | x), shape (n, k)."""
        joint = self.component_log_density(X) + np.log(self.weights)
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))

    def score(self, X: np.ndarray) -> float:
        """Mean log-likelihood per row."""
        joint = self.component_log_density(X) + np.log(self.weights)
        return float(np.mean(logsumexp(joint, axis=1)))

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        z = rng.choice(self.k, size=n, p=self.weights)
        X = np.empty((n, self.d))
        for c in range(self.k):
            rows = np.flatnonzero(z == c)
            L = np.linalg.cholesky(self.covariances[c])
            X[rows] = self.means[c] + rng.standard_normal((len(rows), self.d)) @ L.T
        return X, z

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "means": self.means.tolist(),
                "covariances": self.covariances.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> GaussianMixture:
        try:
            return cls(np.array(obj["weights"]), np.array(obj["means"]), np.array(obj["covariances"]))
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed mixture document: {exc}") from None


def _kmeanspp_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _m_step(X, resp, ridge):
    """Exact maximiser of the ridge-penalised expected log-likelihood.

    The penalty ``-ridge * n / 2 * sum_c tr(Sigma_c^-1)`` turns the
    covariance update into ``(S_c + ridge * n * I) / n_c``; a single
    component gets exactly ``S / n + ridge * I``.
    """
    n, d = X.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / nk.sum()
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((len(nk), d, d))
    for c in range(len(nk)):
        diff = X - means[c]
        covs[c] = ((resp[:, c, None] * diff).T @ diff + ridge * n * np.eye(d)) / nk[c]
    return weights, means, covs


def _penalty(covs, ridge):
    """Per-row ridge penalty matching :func:`_m_step`."""
    return -0.5 * ridge * sum(float(np.trace(np.linalg.inv(c))) for c in covs)


def fit_gmm(X, k: int = 3, max_iter: int = 200, tol: float = 1e-6, seed: int = 0) -> GaussianMixture:
    """EM fit of a full-covariance Gaussian mixture.

    Initialised by hard assignment to k-means++ seeded centres. Covariances
    are regularised by a ridge of ``1e-6 * mean variance`` (see
    :func:`_m_step`), and ``log_likelihood`` records the per-row penalised
    log-likelihood, which EM never decreases. Stops when it gains less than
    ``tol``; a drop beyond rounding noise raises :class:`NumericalError`.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if n <= d:
        raise NumericalError(f"mixture fit is ill-posed with n={n} <= d={d}")
    ridge = RIDGE_SCALE * float(np.mean(np.var(X, axis=0)))
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_centers(X, k, rng)
    nearest = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
    resp = np.eye(k)[nearest]
    params = _m_step(X, resp, ridge)
    history: list[float] = []
    for _ in range(max_iter):
        gmm = GaussianMixture(*params)
        joint = gmm.component_log_density(X) + np.log(gmm.weights)
        norm = logsumexp(joint, axis=1, keepdims=True)
        ll = float(np.mean(norm)) + _penalty(gmm.covariances, ridge)
        if not np.isfinite(ll):
            raise NumericalError("non-finite log-likelihood during EM")
        if history and ll < history[-1] - 1e-9 * max(1.0, abs(history[-1])):
            raise NumericalError(f"EM log-likelihood decreased: {history[-1]} -> {ll}")
        history.append(ll)
        if len(history) > 1 and ll - history[-2] < tol:
            break
        resp = np.exp(joint - norm)
        params = _m_step(X, resp, ridge)
    return GaussianMixture(*params, log_likelihood=history)


def equicorrelated_s(cov: np.ndarray, shrink: float = S_SHRINK) -> np.ndarray:
    """Equicorrelated knockoff ``s`` in covariance units."""
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    lam_min = float(np.linalg.eigvalsh(corr)[0])
    s_corr = min(1.0, 2.0 * lam_min) * shrink
    return np.maximum(s_corr, 0.0) * sd * sd


@dataclass(frozen=True, eq=False)
class KnockoffSet:
    x_tilde: np.ndarray  # (n, d)
    s: np.ndarray  # (k, d) one diagonal per component
    components: np.ndarray  # (n,) sampled component per row


def sample_knockoffs(gmm: GaussianMixture, X, seed: int, s_method: str = "equicorrelated") -> KnockoffSet:
    """Mixture knockoffs for the rows of ``X``.

    ``s_method="zero"`` is a diagnostic that forces ``s = 0`` and so returns
    ``x_tilde == X`` exactly.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if d != gmm.d:
        raise ValueError(f"mixture has dimension {gmm.d}, data has {d}")
    if s_method not in ("equicorrelated", "zero"):
        raise ValueError(f"unknown s_method {s_method!r}")
    rng = np.random.default_rng(seed)
    post = gmm.posterior(X)
    u = rng.random(n)
    z = np.minimum((np.cumsum(post, axis=1) < u[:, None]).sum(axis=1), gmm.k - 1)
    noise = rng.standard_normal((n, d))
    x_tilde = np.empty_like(X)
    s_all = np.zeros((gmm.k, d))
    for c in range(gmm.k):
        cov = gmm.covariances[c]
        s = equicorrelated_s(cov) if s_method == "equicorrelated" else np.zeros(d)
        s_all[c] = s
        rows = np.flatnonzero(z == c)
        if not rows.size:
            continue
        # D S^-1 as a matrix product: (S^-1 D)^T with S symmetric
        sinv_d = linalg.solve(cov, np.diag(s), assume_a="pos")
        cond_mean = X[rows] - (X[rows] - gmm.means[c]) @ sinv_d
        cond_cov = 2.0 * np.diag(s) - np.diag(s) @ sinv_d
        cond_cov = 0.5 * (cond_cov + cond_cov.T)
        if not np.any(s):
            x_tilde[rows] = X[rows]
            continue
        try:
            L = linalg.cholesky(cond_cov, lower=True)
        except linalg.LinAlgError:
            raise NumericalError(
                f"knockoff conditional covariance of component {c} is not positive definite") from None
        x_tilde[rows] = cond_mean + noise[rows] @ L.T
    return KnockoffSet(x_tilde, s_all, z)


def knockoff_joint_covariance(cov: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Theoretical covariance of [X, X_tilde] for a Gaussian with covariance ``cov``."""
    off = cov - np.diag(s)
    return np.block([[cov, off], [off, cov]])


@dataclass(frozen=True, eq=False)
class PermutationTestResult:
    p_value: float
    observed_stat: float
    null_samples: np.ndarray


def angle_permutation_test(E: FeatureEmbedding | np.ndarray, n_perm: int = 10000,
                           seed: int = 0) -> PermutationTestResult:
    """Do features sit closer in angle to their knockoffs than to random partners?

    Vectors ``0..d-1`` are originals, ``d..2d-1`` their knockoffs. The
    statistic is the mean angular gap over pairs ``(i, i + d)``; the null
    draws uniformly random perfect matchings of all 2d vectors. One-sided,
    ``p = (1 + #{null <= observed}) / (n_perm + 1)``.
    """
    V = E.vectors if isinstance(E, FeatureEmbedding) else np.asarray(E, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != 2 or V.shape[0] % 2 or V.shape[0] < 2:
        raise ValueError("need an even number (2d) of 2-D vectors")
    if n_perm < 100:
        raise ValueError("n_perm must be >= 100")
    if np.any(np.all(V == 0, axis=1)):
        raise UndefinedAngleError("embedding contains a zero vector")
    d = V.shape[0] // 2
    theta = np.arctan2(V[:, 1], V[:, 0])
    observed = float(np.mean(pairwise_angle_gap(theta[:d], theta[d:])))
    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(np.arange(2 * d), (n_perm, 1)), axis=1)
    gaps = pairwise_angle_gap(theta[perms[:, 0::2]], theta[perms[:, 1::2]])
    null = gaps.mean(axis=1)
    p = (1 + int(np.count_nonzero(null <= observed))) / (n_perm + 1)
    return PermutationTestResult(p, observed, null)


def knockoff_report(E: FeatureEmbedding, result: PermutationTestResult, names: list[str],
                    bins: int = 50) -> dict:
    """JSON-ready summary: p-value, null histogram and per-feature comparison."""
    d = E.d // 2
    imp = importance(E)
    theta = E.angles
    gaps = pairwise_angle_gap(theta[:d], theta[d:])
    counts, edges = np.histogram(result.null_samples, bins=bins)
    return {
        "p_value": result.p_value,
        "observed_stat": result.observed_stat,
        "n_perm": int(len(result.null_samples)),
        "null_histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
        "features": [
            {"feature": names[i], "importance": float(imp[i]),
             "knockoff_importance": float(imp[i + d]), "angular_gap": float(gaps[i])}
            for i in range(d)
        ],
    }


def write_knockoff_report(report: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
