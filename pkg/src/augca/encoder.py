"""Small parameterized encoders with hand-written reverse-mode passes.

Parameters live in one flat float64 vector so the optimizer, finite-difference
checks and checkpoints all work on the same object.  ``forward`` operates on a
batch and returns a cache that ``backward`` consumes.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

NORM_FLOOR = 1e-12
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderSpec:
    kind: str                       # "table" | "linear" | "mlp"
    k: int
    input_dim: int = 0              # feature size (linear/mlp) or number of ids (table)
    hidden: tuple[int, ...] = ()
    normalize_to_sphere: bool = False

    def __post_init__(self):
        if self.kind not in ("table", "linear", "mlp"):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.k < 1 or self.input_dim < 1:
            raise ValueError("k and input_dim must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.kind == "mlp" and not self.hidden:
            raise ValueError("mlp encoder needs at least one hidden layer")


class Encoder:
    """Maps a batch of inputs to ``R^k`` under a flat parameter vector."""

    def __init__(self, spec: EncoderSpec):
        self.spec = spec
        if spec.kind == "table":
            self.shapes = [(spec.input_dim, spec.k)]
        else:
            sizes = [spec.input_dim, *spec.hidden, spec.k]
            if spec.kind == "linear":
                sizes = [spec.input_dim, spec.k]
            self.shapes = []
            for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
                self.shapes += [(fan_in, fan_out), (fan_out,)]
        self.size = int(sum(np.prod(s) for s in self.shapes))

    def unpack(self, params: np.ndarray) -> list[np.ndarray]:
        if params.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {params.shape}")
        out, at = [], 0
        for shape in self.shapes:
            n = int(np.prod(shape))
            out.append(params[at:at + n].reshape(shape))
            at += n
        return out

    def init(self, seed) -> np.ndarray:
        rng = np.random.default_rng(seed)
        if self.spec.kind == "table":
            return rng.normal(0.0, 0.1, size=self.size)
        blocks = []
        for shape in self.shapes:
            if len(shape) == 2:
                blocks.append(rng.normal(0.0, 1.0, size=shape).ravel() / np.sqrt(shape[0]))
            else:
                blocks.append(np.zeros(shape))
        return np.concatenate(blocks)

    def forward(self, params: np.ndarray, inputs):
        layers = self.unpack(params)
        if self.spec.kind == "table":
            ids = np.asarray(inputs)
            if ids.size and (ids.min() < 0 or ids.max() >= self.spec.input_dim):
                raise KeyError(f"sample id outside [0, {self.spec.input_dim})")
            z = layers[0][ids]
            acts = [ids]
        else:
            x = np.asarray(inputs, dtype=float)
            if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
                raise ValueError(f"expected inputs of shape (batch, {self.spec.input_dim})")
            acts = [x]
            h = x
            n_layers = len(layers) // 2
            for li in range(n_layers):
                h = h @ layers[2 * li] + layers[2 * li + 1]
                if li < n_layers - 1:
                    h = np.maximum(h, 0.0)
                acts.append(h)
            z = h
        if not self.spec.normalize_to_sphere:
            return z, (acts, None, None)
        norm = np.maximum(np.linalg.norm(z, axis=1, keepdims=True), NORM_FLOOR)
        y = z / norm
        return y, (acts, y, norm)

    def __call__(self, params, inputs) -> np.ndarray:
        return self.forward(params, inputs)[0]

    def backward(self, params: np.ndarray, cache, grad_out: np.ndarray) -> np.ndarray:
        acts, y, norm = cache
        g = np.asarray(grad_out, dtype=float)
        if y is not None:
            # d(z/|z|) = (I - y y^T) dz / |z|
            g = (g - y * np.sum(g * y, axis=1, keepdims=True)) / norm
        layers = self.unpack(params)
        grads = [np.zeros_like(w) for w in layers]
        if self.spec.kind == "table":
            np.add.at(grads[0], acts[0], g)
        else:
            n_layers = len(layers) // 2
            for li in reversed(range(n_layers)):
                if li < n_layers - 1:
                    g = g * (acts[li + 1] > 0)
                grads[2 * li] = acts[li].T @ g
                grads[2 * li + 1] = g.sum(axis=0)
                if li:
                    g = g @ layers[2 * li].T
        return np.concatenate([w.ravel() for w in grads])


def make_encoder(kind: str, k: int, input_dim: int, hidden=(), normalize_to_sphere=False) -> Encoder:
    return Encoder(EncoderSpec(kind, k, input_dim, tuple(hidden), normalize_to_sphere))


# -- checkpoints ---------------------------------------------------------------

@dataclass
class Checkpoint:
    spec: EncoderSpec
    params: np.ndarray
    seed: int | None = None
    optimizer: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, spec: EncoderSpec, params: np.ndarray, seed=None, optimizer=None,
                    meta: dict | None = None) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "spec": {**asdict(spec), "hidden": list(spec.hidden)},
        "params": [float(v) for v in params],
        "seed": seed,
    }
    if meta:
        doc["meta"] = meta
    if optimizer:
        doc["optimizer"] = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                            for k, v in optimizer.items()}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> Checkpoint:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    spec = EncoderSpec(**{**doc["spec"], "hidden": tuple(doc["spec"]["hidden"])})
    opt = {k: (np.asarray(v) if isinstance(v, list) else v) for k, v in doc.get("optimizer", {}).items()}
    return Checkpoint(spec, np.asarray(doc["params"], dtype=float), doc.get("seed"), opt, doc.get("meta", {}))
