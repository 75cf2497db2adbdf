"""Downstream evaluation of frozen embeddings: linear probe, 5-NN, distance histograms."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp


class EvalError(ValueError):
    pass


def train_test_split(labels: np.ndarray, test_fraction: float = 0.2, seed=0):
    """Seeded split stratified by class."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    train, test = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_test = int(round(test_fraction * len(idx)))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def _softmax_objective(w_flat, x, y_onehot, l2):
    d, c = x.shape[1] + 1, y_onehot.shape[1]
    w = w_flat.reshape(d, c)
    logits = x @ w[:-1] + w[-1]
    lse = logsumexp(logits, axis=1, keepdims=True)
    n = len(x)
    loss = -np.sum(y_onehot * (logits - lse)) / n + 0.5 * l2 * np.sum(w[:-1] ** 2)
    p = np.exp(logits - lse)
    g = (p - y_onehot) / n
    grad = np.vstack([x.T @ g + l2 * w[:-1], g.sum(axis=0)])
    return loss, grad.ravel()


@dataclass
class LinearProbe:
    weights: np.ndarray
    classes: np.ndarray
    scale: float

    def predict(self, x: np.ndarray) -> np.ndarray:
        logits = (x / self.scale) @ self.weights[:-1] + self.weights[-1]
        return self.classes[np.argmax(logits, axis=1)]


def fit_linear_probe(x: np.ndarray, y: np.ndarray, l2: float = 1e-4, max_iter: int = 1000,
                     tol: float = 1e-6) -> LinearProbe:
    """Multinomial logistic regression by L-BFGS.

    Inputs are divided by their root-mean-square row norm first, which keeps
    the fixed L2 penalty meaningful regardless of embedding scale while
    preserving rotation invariance.
    """
    classes = np.unique(y)
    if len(classes) < 2:
        raise EvalError("linear probe needs at least two classes")
    scale = float(np.sqrt(np.mean(np.sum(x**2, axis=1)))) or 1.0
    xs = x / scale
    onehot = (y[:, None] == classes[None, :]).astype(float)
    w0 = np.zeros((x.shape[1] + 1) * len(classes))
    res = minimize(_softmax_objective, w0, args=(xs, onehot, l2), jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-8})
    return LinearProbe(res.x.reshape(x.shape[1] + 1, len(classes)), classes, scale)


def linear_probe(embeddings: np.ndarray, labels: np.ndarray, split=None, seed=0,
                 l2: float = 1e-4, max_iter: int = 1000) -> float:
    """Test error rate of a logistic-regression probe."""
    x = np.asarray(embeddings, dtype=float)
    y = np.asarray(labels)
    train, test = train_test_split(y, seed=seed) if split is None else split
    probe = fit_linear_probe(x[train], y[train], l2=l2, max_iter=max_iter)
    return float(np.mean(probe.predict(x[test]) != y[test]))


def knn_predict(train_x, train_y, query, k: int = 5) -> np.ndarray:
    """Euclidean k-NN majority vote; a tied vote goes to the nearest tied label."""
    train_x = np.asarray(train_x, float)
    query = np.asarray(query, float)
    if len(train_x) < k:
        raise EvalError(f"need at least {k} training points")
    d2 = (np.sum(query**2, 1)[:, None] + np.sum(train_x**2, 1)[None, :] - 2 * query @ train_x.T)
    nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
    out = np.empty(len(query), dtype=np.asarray(train_y).dtype)
    for r, row in enumerate(nn):
        votes = train_y[row]
        vals, counts = np.unique(votes, return_counts=True)
        best = vals[counts == counts.max()]
        out[r] = next(v for v in votes if v in best)
    return out


def knn_classify(embeddings, labels, k: int = 5, split=None, seed=0) -> float:
    x = np.asarray(embeddings, dtype=float)
    y = np.asarray(labels)
    train, test = train_test_split(y, seed=seed) if split is None else split
    pred = knn_predict(x[train], y[train], x[test], k)
    return float(np.mean(pred == y[test]))


@dataclass
class EvalReport:
    linear_probe_error: float
    knn_accuracy: float
    per_class_error: dict = field(default_factory=dict)
    config_hash: str = ""

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)


def evaluate(embeddings, labels, seed=0, config_hash: str = "") -> EvalReport:
    x = np.asarray(embeddings, dtype=float)
    y = np.asarray(labels)
    split = train_test_split(y, seed=seed)
    probe = fit_linear_probe(x[split[0]], y[split[0]])
    pred = probe.predict(x[split[1]])
    yt = y[split[1]]
    per_class = {str(c): float(np.mean(pred[yt == c] != c)) for c in np.unique(yt)}
    return EvalReport(
        linear_probe_error=float(np.mean(pred != yt)),
        knn_accuracy=knn_classify(x, y, 5, split),
        per_class_error=per_class,
        config_hash=config_hash,
    )


# -- distance histograms ---------------------------------------------------------

@dataclass
class DistanceHistogram:
    edges: np.ndarray
    intra: np.ndarray
    inter: np.ndarray
    intra_mean: float
    inter_mean: float

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["bin_lo", "bin_hi", "intra", "inter"])
            for lo, hi, a, b in zip(self.edges[:-1], self.edges[1:], self.intra, self.inter):
                w.writerow([repr(float(lo)), repr(float(hi)), int(a), int(b)])


def sample_pairs(labels, n_per_kind: int | None, rng=None):
    """Upper-triangle pairs split by same/different label.

    With ``n_per_kind`` exactly that many intra and inter pairs are drawn
    (without replacement), mirroring a balanced study design.
    """
    labels = np.asarray(labels)
    i, j = np.triu_indices(len(labels), k=1)
    same = labels[i] == labels[j]
    intra = np.stack([i[same], j[same]], 1)
    inter = np.stack([i[~same], j[~same]], 1)
    if n_per_kind is not None:
        rng = np.random.default_rng(rng)
        if n_per_kind > min(len(intra), len(inter)):
            raise EvalError("not enough pairs for the requested balanced sample")
        intra = intra[np.sort(rng.choice(len(intra), n_per_kind, replace=False))]
        inter = inter[np.sort(rng.choice(len(inter), n_per_kind, replace=False))]
    return intra, inter


def distance_histogram(dist: np.ndarray, labels, bins=20, n_per_kind: int | None = None,
                       rng=None, value_range=None) -> DistanceHistogram:
    """Histogram intra- vs inter-class entries of a pairwise distance matrix."""
    intra_p, inter_p = sample_pairs(labels, n_per_kind, rng)
    if len(intra_p) + len(inter_p) == 0:
        raise EvalError("empty pair set")
    a = dist[intra_p[:, 0], intra_p[:, 1]]
    b = dist[inter_p[:, 0], inter_p[:, 1]]
    both = np.concatenate([a, b])
    if value_range is None:
        lo, hi = float(both.min()), float(both.max())
        value_range = (lo, hi if hi > lo else lo + 1.0)
    edges = np.histogram_bin_edges(both, bins=bins, range=value_range)
    return DistanceHistogram(
        edges,
        np.histogram(a, edges)[0],
        np.histogram(b, edges)[0],
        float(a.mean()) if a.size else float("nan"),
        float(b.mean()) if b.size else float("nan"),
    )
