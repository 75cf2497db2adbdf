"""Seeded minibatch training: two-view sampling, loss evaluation and Adam updates."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .domain import AugmentationMatrix
from .losses import METHODS, LossBreakdown, batch_objective, population_objective

DIVERGENCE_LIMIT = 1e12


class TrainingDiverged(RuntimeError):
    pass


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TrainConfig:
    method: str = "aca_full"
    k: int = 16
    batch_size: int = 128
    epochs: int = 500
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-6
    K: float = 2.0
    alpha: float = 1.0
    temperature: float = 0.5
    normalize: bool = True
    lr_decay_epochs: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.K <= 0 or self.alpha < 0 or self.learning_rate < 0:
            raise ValueError("need K > 0, alpha >= 0, learning_rate >= 0")
        object.__setattr__(self, "lr_decay_epochs", tuple(self.lr_decay_epochs))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lr_decay_epochs"] = list(self.lr_decay_epochs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


# -- datasets -----------------------------------------------------------------

class DiscreteDataset:
    """Natural and augmented samples of an exact model, addressed by table id.

    Augmented sample j has id ``j``; natural sample i has id ``L + i``.
    """

    def __init__(self, a: AugmentationMatrix, labels=None):
        self.matrix = a
        self.labels = labels
        self._cdf = np.cumsum(a.probs, axis=1)
        self._cdf[:, -1] = 1.0

    def __len__(self):
        return self.matrix.n

    @property
    def table_size(self) -> int:
        return self.matrix.l + self.matrix.n

    def natural_inputs(self, idx):
        return self.matrix.l + np.asarray(idx)

    def augmented_inputs(self):
        return np.arange(self.matrix.l)

    def augment(self, idx, rng):
        u = rng.random(len(idx))
        return np.sum(self._cdf[idx] <= u[:, None], axis=1)


class GaussianDataset:
    """Continuous points augmented on the fly with isotropic Gaussian noise."""

    def __init__(self, points: np.ndarray, aug_var: float, labels=None):
        self.points = np.asarray(points, dtype=float)
        self.aug_var = float(aug_var)
        self.labels = labels

    def __len__(self):
        return len(self.points)

    def natural_inputs(self, idx):
        return self.points[idx]

    def augment(self, idx, rng):
        return self.points[idx] + rng.normal(size=(len(idx), self.points.shape[1])) * math.sqrt(self.aug_var)


@dataclass
class Batch:
    index: np.ndarray
    naturals: np.ndarray
    view1: np.ndarray
    view2: np.ndarray


def sample_batch(dataset, batch_size: int, rng, replace: bool = False, index=None) -> Batch:
    """Draw ``batch_size`` naturals and two independent augmentations of each."""
    n = len(dataset)
    if index is None:
        if batch_size > n and not replace:
            raise ValueError(f"batch size {batch_size} exceeds dataset size {n}")
        index = rng.choice(n, batch_size, replace=replace)
    index = np.asarray(index)
    v1 = dataset.augment(index, rng)
    v2 = dataset.augment(index, rng)
    return Batch(index, dataset.natural_inputs(index), v1, v2)


def epoch_batches(n: int, batch_size: int, rng):
    """Shuffle once per epoch; the last short batch is topped up from the permutation head."""
    if batch_size > n:
        raise ValueError(f"batch size {batch_size} exceeds dataset size {n}")
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        chunk = perm[start:start + batch_size]
        if len(chunk) < batch_size:
            chunk = np.concatenate([chunk, perm[:batch_size - len(chunk)]])
        yield chunk


# -- optimizer ----------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)

    def to_dict(self) -> dict:
        return {"m": self.m, "v": self.v, "t": self.t}

    @classmethod
    def from_dict(cls, d: dict) -> "AdamState":
        return cls(np.asarray(d["m"], float), np.asarray(d["v"], float), int(d["t"]))


def adam_step(params, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999,
              eps=1e-8, weight_decay=0.0):
    """One bias-corrected Adam update; ``weight_decay`` is added to the gradient as L2."""
    g = grads + weight_decay * params
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * g
    v = beta2 * state.v + (1 - beta2) * g * g
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamState(m, v, t)


# -- training loops ---------------------------------------------------------------

@dataclass
class TrainLog:
    config_hash: str
    rows: list = field(default_factory=list)   # (epoch, LossBreakdown, wall_ms)

    def append(self, epoch: int, parts: LossBreakdown, wall_ms: float):
        if self.rows and epoch <= self.rows[-1][0]:
            raise ValueError("epoch index must increase")
        self.rows.append((epoch, parts, wall_ms))

    @property
    def totals(self) -> np.ndarray:
        return np.array([r[1].total for r in self.rows])

    @property
    def projection(self) -> np.ndarray:
        return np.array([r[1].projection for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# config_hash={self.config_hash}\n")
            w = csv.writer(fh)
            w.writerow(["epoch", "total", "align", "uniformity", "projection", "wall_ms"])
            for epoch, p, ms in self.rows:
                w.writerow([epoch, repr(p.total), repr(p.align), repr(p.uniformity),
                            repr(p.projection), f"{ms:.3f}"])


def _check_finite(val: float, where: str):
    if not math.isfinite(val) or abs(val) > DIVERGENCE_LIMIT:
        raise TrainingDiverged(f"loss {val!r} at {where}")


def train(config: TrainConfig, dataset, encoder, params=None, callback=None):
    """Minibatch two-view training with Adam; returns ``(params, TrainLog)``.

    Each epoch takes ``ceil(N / B)`` Adam steps over a fresh shuffle of the
    natural samples.  The log holds per-epoch means of the batch losses.
    """
    rng = np.random.default_rng(config.seed)
    if params is None:
        params = encoder.init(rng.integers(2**32))
    state = AdamState.zeros(encoder.size)
    log = TrainLog(config.hash)
    lr = config.learning_rate
    decay_at = {config.epochs - e for e in config.lr_decay_epochs}
    for epoch in range(config.epochs):
        if epoch in decay_at:
            lr *= 0.1
        t0 = time.perf_counter()
        acc = np.zeros(4)
        steps = 0
        for idx in epoch_batches(len(dataset), config.batch_size, rng):
            batch = sample_batch(dataset, config.batch_size, rng, index=idx)
            parts, grad = batch_objective(
                config.method, encoder, params, batch.naturals, batch.view1, batch.view2,
                K=config.K, alpha=config.alpha, temperature=config.temperature)
            _check_finite(parts.total, f"epoch {epoch}")
            params, state = adam_step(params, grad, state, lr, config.beta1, config.beta2,
                                      config.eps, config.weight_decay)
            acc += (parts.total, parts.align, parts.uniformity, parts.projection)
            steps += 1
        acc /= steps
        log.append(epoch, LossBreakdown(*acc), 1e3 * (time.perf_counter() - t0))
        if callback is not None:
            callback(epoch, params)
    return params, log


def train_population(a: AugmentationMatrix, encoder, steps: int = 5000, lr: float = 1e-2,
                     K: float | None = None, alpha: float = 0.0, seed=0, params=None,
                     min_lr: float = 1e-5):
    """Full-batch Adam on the exact population objective of a discrete model.

    The encoder must be a table over ``L + N`` ids (augmented first).  The
    learning rate decays geometrically from ``lr`` to ``min_lr``.
    """
    ds = DiscreteDataset(a)
    aug = ds.augmented_inputs()
    nat = ds.natural_inputs(np.arange(a.n)) if alpha else None
    if params is None:
        params = encoder.init(seed)
    state = AdamState.zeros(encoder.size)
    gamma = (min_lr / lr) ** (1.0 / max(steps - 1, 1))
    history = []
    for t in range(steps):
        parts, grad = population_objective(a, encoder, params, aug, nat, K=K, alpha=alpha)
        _check_finite(parts.total, f"step {t}")
        params, state = adam_step(params, grad, state, lr * gamma**t)
        history.append(parts.total)
    return params, np.array(history)


def with_overrides(config: TrainConfig, **kw) -> TrainConfig:
    return replace(config, **kw)
