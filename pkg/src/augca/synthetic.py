"""Data generators: the Gaussian-mixture pilot and random discrete instances."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .domain import AugmentationMatrix, EmpiricalMatrix, build_empirical_matrix


@dataclass(frozen=True)
class MixtureConfig:
    components: int = 4
    radius: float = 2.0
    component_var: float = 1.0
    aug_scale: float = 4.0
    # "variance": noise covariance is aug_scale * I; "std": aug_scale is the std
    aug_scale_is: str = "variance"
    samples_per_component: int = 200
    augmentations: int = 2
    weights: tuple[float, ...] = field(default=())
    seed: int = 0

    def __post_init__(self):
        if self.components < 1 or self.samples_per_component < 1 or self.augmentations < 1:
            raise ValueError("components, samples_per_component and augmentations must be >= 1")
        if self.component_var <= 0 or self.aug_scale < 0:
            raise ValueError("variances must be positive")
        if self.aug_scale_is not in ("variance", "std"):
            raise ValueError("aug_scale_is must be 'variance' or 'std'")
        w = self.weights or tuple([1.0 / self.components] * self.components)
        if len(w) != self.components or abs(sum(w) - 1.0) > 1e-9 or min(w) < 0:
            raise ValueError("mixture weights must be non-negative, one per component, summing to 1")
        object.__setattr__(self, "weights", tuple(float(v) for v in w))

    @property
    def aug_var(self) -> float:
        return self.aug_scale if self.aug_scale_is == "variance" else self.aug_scale**2

    @property
    def means(self) -> np.ndarray:
        t = 2 * np.pi * np.arange(self.components) / self.components
        return self.radius * np.stack([np.cos(t), np.sin(t)], axis=1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = list(self.weights)
        return d


def gen_mixture(cfg: MixtureConfig, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Stratified draw: exactly ``samples_per_component`` points per component.

    The mixture weights describe the population; the stratified sample keeps
    classes balanced.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    m = cfg.samples_per_component
    labels = np.repeat(np.arange(cfg.components), m)
    noise = rng.normal(size=(labels.size, 2)) * np.sqrt(cfg.component_var)
    return cfg.means[labels] + noise, labels


def augment_gaussian(points: np.ndarray, aug_var: float, draws: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Add isotropic Gaussian noise with covariance ``aug_var * I``.

    Returns ``(outcomes, parents)``; outcomes for parent i occupy rows
    ``i*draws .. i*draws + draws - 1``.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    if not hasattr(rng, "normal"):
        rng = np.random.default_rng(rng)
    parents = np.repeat(np.arange(len(points)), draws)
    xi = rng.normal(size=(parents.size, points.shape[1])) * np.sqrt(aug_var)
    return points[parents] + xi, parents


def gaussian_density_weights(points: np.ndarray, aug_var: float):
    """Weight callable for ``build_empirical_matrix``: unnormalized Gaussian density.

    The normalizing constant is common to every entry and cancels in the row
    normalization.  Each row is shifted by its max log-weight before
    exponentiating so far-away rows never underflow to all zeros.
    """
    def weight(outcomes) -> np.ndarray:
        x = np.asarray(outcomes, dtype=float)
        sq = (np.sum(points**2, axis=1)[:, None] + np.sum(x**2, axis=1)[None, :]
              - 2.0 * points @ x.T)
        logw = -np.maximum(sq, 0.0) / (2.0 * aug_var)
        return np.exp(logw - logw.max(axis=1, keepdims=True))
    return weight


@dataclass
class PilotData:
    points: np.ndarray
    labels: np.ndarray
    outcomes: np.ndarray
    parents: np.ndarray
    empirical: EmpiricalMatrix

    @property
    def matrix(self) -> AugmentationMatrix:
        return self.empirical.matrix

    @property
    def outcome_labels(self) -> np.ndarray:
        return self.labels[self.parents]


def make_pilot_data(cfg: MixtureConfig) -> PilotData:
    rng = np.random.default_rng(cfg.seed)
    points, labels = gen_mixture(cfg, rng)
    outcomes, parents = augment_gaussian(points, cfg.aug_var, cfg.augmentations, rng)
    emp = build_empirical_matrix(
        zip(parents.tolist(), outcomes),
        natural_count=len(points),
        weight=gaussian_density_weights(points, cfg.aug_var),
        labels=labels,
    )
    return PilotData(points, labels, outcomes, parents, emp)


def gen_random_instance(n: int, l: int, sparsity: int | None = None, seed=0) -> AugmentationMatrix:
    """Random row-stochastic ``n x l`` matrix with ``sparsity`` nonzeros per row.

    Every column is hit by at least one row when ``n * sparsity >= l`` so the
    marginals are positive; otherwise some columns stay empty (zero marginal).
    """
    if n < 1 or l < 1:
        raise ValueError("n and l must be >= 1")
    rng = np.random.default_rng(seed)
    s = l if sparsity is None else int(np.clip(sparsity, 1, l))
    probs = np.zeros((n, l))
    order = rng.permutation(n * s) % l if n * s >= l else None
    for i in range(n):
        if order is not None:
            must = order[i * s:(i + 1) * s]
            cols = np.unique(must)
            if cols.size < s:
                rest = np.setdiff1d(np.arange(l), cols)
                cols = np.concatenate([cols, rng.choice(rest, s - cols.size, replace=False)])
        else:
            cols = rng.choice(l, s, replace=False)
        probs[i, cols] = rng.dirichlet(np.ones(s)) if s > 1 else 1.0
    return AugmentationMatrix(probs)
