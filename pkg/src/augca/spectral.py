"""Exact spectral ground truth for small augmentation models.

Everything here is computed densely from the normalized feature: its SVD,
the closed-form optimal embeddings for augmented and natural samples, the
posterior / weighted-augmentation / Hellinger distances, and brute-force
checks of the two almost-isometry bounds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import AugmentationMatrix, NormalizedFeature, marginals, normalize

BOUND_SLACK = 1e-7


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full SVD ``Ahat = U diag(s) V^T``.

    ``u`` is ``N x N``; ``v`` is ``L' x min(N, L')`` (thin on the right).
    Singular vectors are defined only up to sign (and, for repeated values, up
    to rotation within the eigenspace); the sign is fixed so that the first
    nonzero entry of each right vector is positive.
    """

    singular_values: np.ndarray
    u: np.ndarray
    v: np.ndarray
    rank: int

    def reconstruct(self) -> np.ndarray:
        r = len(self.singular_values)
        return (self.u[:, :r] * self.singular_values) @ self.v[:, :r].T


def numerical_rank(s: np.ndarray, shape: tuple[int, int]) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    tol = s[0] * max(shape) * np.finfo(float).eps
    return int(np.sum(s > tol))


def decompose(feature: NormalizedFeature | np.ndarray) -> SpectralDecomposition:
    ahat = feature.matrix if isinstance(feature, NormalizedFeature) else np.asarray(feature, float)
    u_full, s, vt = np.linalg.svd(ahat, full_matrices=True)
    r = len(s)
    v = vt[:r].T.copy()
    u_full = u_full.copy()
    for i in range(r):
        nz = np.flatnonzero(np.abs(v[:, i]) > 1e-12)
        if nz.size and v[nz[0], i] < 0:
            v[:, i] *= -1
            u_full[:, i] *= -1
    for a in (s, u_full, v):
        a.setflags(write=False)
    return SpectralDecomposition(s, u_full, v, numerical_rank(s, ahat.shape))


@dataclass(frozen=True)
class OracleEmbeddings:
    """Optimal embeddings for augmented (``f_aug``) and natural (``f_nat``) samples.

    Rows of ``f_aug`` follow the retained columns of the normalized feature
    (see ``columns``).
    """

    k: int
    f_aug: np.ndarray
    f_nat: np.ndarray
    columns: np.ndarray


def oracle_embeddings(dec: SpectralDecomposition, feature: NormalizedFeature, k: int,
                      atol: float = 1e-7) -> OracleEmbeddings:
    if not 1 <= k <= dec.rank:
        raise OracleError(f"k={k} must lie in [1, rank={dec.rank}]")
    s = dec.singular_values[:k]
    f_aug = dec.v[:, :k] * s / np.sqrt(feature.d)[:, None]
    f_nat = dec.u[:, :k] * s**2
    via_projection = feature.probs @ f_aug
    err = np.linalg.norm(via_projection - f_nat)
    if err > atol:
        raise OracleError(f"natural embeddings disagree with A @ f_aug by {err:.3g}")
    return OracleEmbeddings(k, f_aug, f_nat, feature.columns)


# -- distances ----------------------------------------------------------------

def posterior_matrix(a: AugmentationMatrix) -> np.ndarray:
    """``P[xbar, x] = p(xbar | x)``; raises on zero-marginal columns."""
    d = marginals(a).d
    if np.any(d <= 0):
        raise OracleError("posterior undefined for an augmented sample with zero marginal")
    return a.probs / d


def posterior_distance_sq(a: AugmentationMatrix, x1: int, x2: int, d=None) -> float:
    d = marginals(a).d if d is None else np.asarray(d)
    if d[x1] <= 0 or d[x2] <= 0:
        raise OracleError("posterior undefined for an augmented sample with zero marginal")
    diff = a.probs[:, x1] / d[x1] - a.probs[:, x2] / d[x2]
    return float(diff @ diff)


def weighted_aug_distance_sq(a: AugmentationMatrix, i1: int, i2: int, d=None) -> float:
    d = marginals(a).d if d is None else np.asarray(d)
    keep = d > 0
    marginal = d[keep] / a.n
    diff = a.probs[i1, keep] - a.probs[i2, keep]
    return float(np.sum(diff**2 / marginal) / a.n)


def hellinger_distance_sq(a: AugmentationMatrix, i1: int, i2: int, scale_by_n: bool = False) -> float:
    """Squared Hellinger-style distance between two augmentation distributions.

    Without ``scale_by_n`` the value lies in ``[0, 2]``.
    """
    diff = np.sqrt(a.probs[i1]) - np.sqrt(a.probs[i2])
    out = float(diff @ diff)
    return out / a.n if scale_by_n else out


def _pairwise_sq(x: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``x``."""
    sq = np.einsum("ij,ij->i", x, x)
    out = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(out, 0.0, out=out)
    np.fill_diagonal(out, 0.0)
    return out


def pairwise_posterior_distance_sq(feature: NormalizedFeature) -> np.ndarray:
    """``L' x L'`` posterior distances over retained augmented samples."""
    post = feature.probs / feature.d
    return _pairwise_sq(post.T)


def pairwise_weighted_aug_distance_sq(feature: NormalizedFeature) -> np.ndarray:
    """``N x N`` weighted augmentation distances (rows of ``Ahat`` are isometric to them)."""
    return _pairwise_sq(feature.matrix)


def pairwise_hellinger_sq(a: AugmentationMatrix) -> np.ndarray:
    return _pairwise_sq(np.sqrt(a.probs))


# -- bound checks -----------------------------------------------------------

@dataclass
class BoundReport:
    k: int
    n_pairs: int
    max_violation: float
    violations: int
    lower_gaps: np.ndarray
    upper_gaps: np.ndarray

    @property
    def ok(self) -> bool:
        return self.violations == 0

    @property
    def max_equality_error(self) -> float:
        return float(np.max(np.abs(self.upper_gaps))) if self.upper_gaps.size else 0.0


def _sandwich(exact: np.ndarray, embedded: np.ndarray, slack: np.ndarray, k: int,
              tol: float) -> BoundReport:
    lower = exact - slack
    lower_gap = embedded - lower      # must be >= 0
    upper_gap = exact - embedded      # must be >= 0
    worst = np.maximum(-lower_gap, -upper_gap)
    iu = np.triu_indices(exact.shape[0])
    worst = worst[iu]
    return BoundReport(
        k=k,
        n_pairs=len(worst),
        max_violation=float(max(worst.max(), 0.0)),
        violations=int(np.sum(worst > tol)),
        lower_gaps=lower_gap[iu],
        upper_gaps=upper_gap[iu],
    )


def posterior_bound_check(dec: SpectralDecomposition, feature: NormalizedFeature, k: int,
                   tol: float = BOUND_SLACK) -> BoundReport:
    """Posterior-distance sandwich for every pair of augmented samples.

    ``dec`` may come from a perturbed feature; the exact distances are always
    recomputed from ``feature.source``.
    """
    s = dec.singular_values
    scaled = dec.v[:, :k] * s[:k] / np.sqrt(feature.d)[:, None]
    embedded = _pairwise_sq(scaled)
    exact = pairwise_posterior_distance_sq(feature)
    s_next = s[k] if k < len(s) else 0.0
    slack = (2.0 * s_next**2 / feature.d.min()) * (1.0 - np.eye(len(feature.d)))
    return _sandwich(exact, embedded, slack, k, tol)


def natural_bound_check(dec: SpectralDecomposition, feature: NormalizedFeature, k: int,
                   tol: float = BOUND_SLACK) -> BoundReport:
    """Weighted-augmentation-distance sandwich for every pair of natural samples.

    Natural embeddings ``g = [s_i^2 u_i]`` are compared under the Mahalanobis
    norm with matrix ``diag(s_1..s_k)^{-2}``.
    """
    s = dec.singular_values
    if k > len(s) or np.any(s[:k] <= s[0] * max(feature.matrix.shape) * np.finfo(float).eps):
        raise OracleError(f"zero singular value within top-{k}; Mahalanobis norm undefined")
    g = dec.u[:, :k] * s[:k] ** 2
    embedded = _pairwise_sq(g / s[:k])
    exact = pairwise_weighted_aug_distance_sq(normalize(feature.source))
    s_next = s[k] if k < len(s) else 0.0
    slack = 2.0 * s_next**2 * (1.0 - np.eye(g.shape[0]))
    return _sandwich(exact, embedded, slack, k, tol)
