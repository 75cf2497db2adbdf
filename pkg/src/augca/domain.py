"""Finite sample spaces and augmentation feature matrices.

An augmentation model over ``N`` natural samples and ``L`` augmented outcomes
is the row-stochastic matrix ``A`` with ``A[i, j] = p(x_j | xbar_i)``.  The
natural prior is uniform.  ``normalize`` produces ``A D^{-1/2}`` where ``D``
holds the column sums of ``A``.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

MAX_AUGMENTED = 100_000
ROW_SUM_TOL = 1e-6


class DomainError(ValueError):
    """Raised when an augmentation model or matrix is malformed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiscreteDomain:
    natural_count: int
    augmented_count: int
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.natural_count < 1 or self.augmented_count < 1:
            raise DomainError("domain needs at least one natural and one augmented sample")
        if self.augmented_count > MAX_AUGMENTED:
            raise DomainError(f"augmented_count {self.augmented_count} exceeds {MAX_AUGMENTED}")
        if self.labels is not None:
            labels = np.asarray(self.labels).copy()
            if labels.shape != (self.natural_count,):
                raise DomainError("labels must have one entry per natural sample")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class AugmentationMatrix:
    """Row-stochastic ``N x L`` matrix of augmentation probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise DomainError(f"expected a non-empty 2-D matrix, got shape {p.shape}")
        if p.shape[1] > MAX_AUGMENTED:
            raise DomainError(f"L={p.shape[1]} exceeds the dense size guard {MAX_AUGMENTED}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainError("probabilities must be finite and non-negative")
        sums = p.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise DomainError(f"row {bad[0]} sums to {sums[bad[0]]:.6g}, not 1")
        # tighten accepted-but-sloppy rows; exact rows are left bit-for-bit alone
        sloppy = np.abs(sums - 1.0) > 1e-12
        if np.any(sloppy):
            p = p.copy()
            p[sloppy] /= sums[sloppy, None]
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def l(self) -> int:
        return self.probs.shape[1]

    @property
    def domain(self) -> DiscreteDomain:
        return DiscreteDomain(self.n, self.l)


@dataclass(frozen=True)
class MarginalWeights:
    d: np.ndarray

    @property
    def marginal(self) -> np.ndarray:
        """p_A(x) = d_x / N."""
        return self.d / self.d.sum()

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.d > 0)


@dataclass(frozen=True)
class NormalizedFeature:
    """``A D^{-1/2}`` restricted to columns with positive marginal.

    ``columns`` maps each retained column back to its index in ``source``.
    """

    matrix: np.ndarray
    columns: np.ndarray
    d: np.ndarray
    source: AugmentationMatrix

    @property
    def probs(self) -> np.ndarray:
        """The augmentation matrix on the retained columns."""
        return self.source.probs[:, self.columns]


def build_exact_matrix(model, domain: DiscreteDomain) -> AugmentationMatrix:
    """Enumerate ``model(i, j) = p(x_j | xbar_i)`` over the whole domain.

    ``model`` may also be a 2-D array-like, in which case it is taken as the
    table itself.
    """
    n, l = domain.natural_count, domain.augmented_count
    if callable(model):
        table = np.array([[model(i, j) for j in range(l)] for i in range(n)], dtype=float)
    else:
        table = np.asarray(model, dtype=float)
    if table.shape != (n, l):
        raise DomainError(f"model produced shape {table.shape}, domain is {(n, l)}")
    return AugmentationMatrix(table)


def identity_model(i: int, j: int) -> float:
    """Deterministic augmentation: every sample maps to itself."""
    return 1.0 if i == j else 0.0


def _default_key(outcome) -> Hashable:
    if isinstance(outcome, np.ndarray):
        return tuple(outcome.ravel().tolist())
    if isinstance(outcome, (list, tuple)):
        return tuple(outcome)
    return outcome


@dataclass
class EmpiricalMatrix:
    """Result of ``build_empirical_matrix``."""

    matrix: AugmentationMatrix
    domain: DiscreteDomain
    outcomes: list = field(default_factory=list)
    counts: np.ndarray | None = None


def build_empirical_matrix(
    samples: Iterable[tuple[int, object]],
    natural_count: int | None = None,
    weight: Callable[[list], np.ndarray] | None = None,
    key: Callable[[object], Hashable] = _default_key,
    labels: Sequence | None = None,
) -> EmpiricalMatrix:
    """Assemble an augmentation matrix from observed ``(natural_id, outcome)`` draws.

    Distinct outcomes (by exact equality of ``key(outcome)``) become columns,
    in order of first appearance.  Without ``weight`` the entries are draw
    counts; with ``weight`` the callable receives the list of distinct
    outcomes and returns an ``N x L`` array of non-negative weights (e.g. a
    density ``p(x | xbar)`` evaluated at every observed outcome).  Rows are
    then normalized to sum to one.
    """
    samples = list(samples)
    if natural_count is None:
        natural_count = 1 + max(i for i, _ in samples) if samples else 0
    column_of: dict = {}
    outcomes: list = []
    counts_sparse: dict[tuple[int, int], int] = {}
    draws = np.zeros(natural_count, dtype=int)
    for i, outcome in samples:
        if not 0 <= i < natural_count:
            raise DomainError(f"natural id {i} outside [0, {natural_count})")
        k = key(outcome)
        j = column_of.get(k)
        if j is None:
            j = column_of[k] = len(outcomes)
            outcomes.append(outcome)
        counts_sparse[(i, j)] = counts_sparse.get((i, j), 0) + 1
        draws[i] += 1
    missing = np.flatnonzero(draws == 0)
    if missing.size:
        raise DomainError(f"natural sample {missing[0]} has no augmentation draws")

    counts = np.zeros((natural_count, len(outcomes)))
    for (i, j), c in counts_sparse.items():
        counts[i, j] = c
    if weight is None:
        raw = counts
    else:
        raw = np.asarray(weight(outcomes), dtype=float)
        if raw.shape != counts.shape:
            raise DomainError(f"weight returned shape {raw.shape}, expected {counts.shape}")
    sums = raw.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise DomainError("a natural sample has zero total weight")
    matrix = AugmentationMatrix(raw / sums)
    dom = DiscreteDomain(natural_count, len(outcomes), None if labels is None else np.asarray(labels))
    return EmpiricalMatrix(matrix, dom, outcomes, counts)


def marginals(a: AugmentationMatrix) -> MarginalWeights:
    return MarginalWeights(_frozen(a.probs.sum(axis=0)))


def normalize(a: AugmentationMatrix, w: MarginalWeights | None = None) -> NormalizedFeature:
    if w is None:
        w = marginals(a)
    keep = w.support
    d = w.d[keep]
    mat = a.probs[:, keep] / np.sqrt(d)
    cols = np.array(keep)
    cols.setflags(write=False)
    return NormalizedFeature(_frozen(mat), cols, _frozen(d), a)


# -- file formats -----------------------------------------------------------

def save_matrix_csv(a: AugmentationMatrix, path) -> None:
    """Row-major CSV whose first line holds the dimensions ``n,l``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([a.n, a.l])
        for row in a.probs:
            w.writerow([repr(float(v)) for v in row])


def load_matrix_csv(path) -> AugmentationMatrix:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DomainError(f"{path}: empty matrix file")
    head = rows.pop(0)
    if [h.strip().lower() for h in head] == ["n", "l"]:
        head = rows.pop(0)
    n, l = int(head[0]), int(head[1])
    table = np.array([[float(v) for v in r] for r in rows])
    if table.shape != (n, l):
        raise DomainError(f"{path}: header says {n}x{l}, body is {table.shape}")
    return AugmentationMatrix(table)


def save_descriptor(a: AugmentationMatrix, path, labels=None, matrix_name: str | None = None,
                    extra: dict | None = None) -> None:
    """Write the JSON descriptor plus its CSV matrix next to it.

    ``extra`` keys (e.g. provenance hashes) are stored alongside the required ones.
    """
    path = os.fspath(path)
    matrix_name = matrix_name or os.path.splitext(os.path.basename(path))[0] + ".csv"
    save_matrix_csv(a, os.path.join(os.path.dirname(path) or ".", matrix_name))
    desc = {"natural_count": a.n, "augmented_count": a.l, "matrix_path": matrix_name}
    if labels is not None:
        desc["labels"] = [int(v) for v in labels]
    desc.update(extra or {})
    with open(path, "w") as fh:
        json.dump(desc, fh, indent=2)


def load_descriptor(path) -> tuple[AugmentationMatrix, DiscreteDomain]:
    path = os.fspath(path)
    with open(path) as fh:
        desc = json.load(fh)
    mpath = desc["matrix_path"]
    if not os.path.isabs(mpath):
        mpath = os.path.join(os.path.dirname(path), mpath)
    a = load_matrix_csv(mpath)
    if (a.n, a.l) != (desc["natural_count"], desc["augmented_count"]):
        raise DomainError(f"{path}: descriptor dimensions disagree with {mpath}")
    labels = desc.get("labels")
    return a, DiscreteDomain(a.n, a.l, None if labels is None else np.asarray(labels))
