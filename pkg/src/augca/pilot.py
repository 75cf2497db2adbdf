"""The Gaussian-mixture pilot: distance structure and the method/embedding-size sweep."""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .encoder import make_encoder
from .evaluation import distance_histogram, knn_classify, linear_probe, train_test_split
from .spectral import pairwise_posterior_distance_sq, pairwise_weighted_aug_distance_sq
from .domain import normalize
from .synthetic import MixtureConfig, make_pilot_data
from .trainer import GaussianDataset, TrainConfig, config_hash, train

DEFAULT_DIMS = (4, 8, 16, 32, 64, 128, 200)
DEFAULT_METHODS = ("aca_full", "aca_pc", "spectral", "infonce")

# Per-method settings layered on top of ``PilotConfig.train``.  ACA and the
# spectral baseline keep embeddings unnormalized, where K only rescales the
# optimum; K="N" is accepted but leaves Adam a very flat landscape.
METHOD_DEFAULTS = {
    "aca_full": {"normalize": False, "K": 2.0, "alpha": 1.0},
    "aca_pc": {"normalize": False, "K": 2.0, "alpha": 0.0},
    "spectral": {"normalize": False},
    "infonce": {"normalize": True, "temperature": 0.5},
}


@dataclass
class PilotConfig:
    mixture: MixtureConfig = field(default_factory=MixtureConfig)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    dims: tuple[int, ...] = DEFAULT_DIMS
    methods: tuple[str, ...] = DEFAULT_METHODS
    hidden: tuple[int, ...] = (64, 64)
    encoder: str = "mlp"
    train: dict = field(default_factory=lambda: {"epochs": 100, "batch_size": 128, "learning_rate": 1e-3})
    method_overrides: dict = field(default_factory=dict)
    include_af: bool = True
    hist_bins: int = 30
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mixture"] = self.mixture.to_dict()
        for key in ("seeds", "dims", "methods", "hidden"):
            d[key] = list(d[key])
        d.pop("workers")    # execution detail, never changes results
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PilotConfig":
        d = dict(d)
        mix = d.pop("mixture", {})
        cfg = cls(mixture=MixtureConfig(**{**mix, "weights": tuple(mix.get("weights", ()))}), **d)
        for key in ("seeds", "dims", "methods", "hidden"):
            setattr(cfg, key, tuple(getattr(cfg, key)))
        return cfg

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


def method_config(cfg: PilotConfig, method: str, k: int, seed: int, n: int) -> TrainConfig:
    opts = {**cfg.train, **METHOD_DEFAULTS.get(method, {}), **cfg.method_overrides.get(method, {})}
    if opts.get("K") == "N":
        opts["K"] = float(n)
    run_seed = int(np.random.SeedSequence([seed, k, cfg.methods.index(method)]).generate_state(1)[0])
    return TrainConfig(method=method, k=k, seed=run_seed, **opts)


def train_method(cfg: PilotConfig, data, method: str, k: int, seed: int):
    """Train one method on one dataset and return natural-sample embeddings."""
    tc = method_config(cfg, method, k, seed, len(data.points))
    enc = make_encoder(cfg.encoder, k, 2, cfg.hidden if cfg.encoder == "mlp" else (), tc.normalize)
    ds = GaussianDataset(data.points, cfg.mixture.aug_var, data.labels)
    params, log = train(tc, ds, enc)
    return enc(params, data.points), log


def distance_summary(data, bins: int = 30):
    """Intra/inter-class histograms of posterior and weighted augmentation distances."""
    feat = normalize(data.matrix)
    post = pairwise_posterior_distance_sq(feat)
    waug = pairwise_weighted_aug_distance_sq(feat)
    out_labels = data.outcome_labels[feat.columns]
    return {
        "posterior": distance_histogram(np.sqrt(post), out_labels, bins),
        "weighted_aug": distance_histogram(np.sqrt(waug), data.labels, bins),
    }


RESULT_FIELDS = ("method", "k", "seed", "probe_error", "knn_acc")


def _run_one(cfg, data, split, method, k, seed):
    emb, _ = train_method(cfg, data, method, k, seed)
    return {
        "method": method, "k": k, "seed": seed,
        "probe_error": linear_probe(emb, data.labels, split),
        "knn_acc": knn_classify(emb, data.labels, 5, split),
    }


def plan(cfg: PilotConfig) -> list[tuple[str, int, int]]:
    return [(m, k, s) for s in cfg.seeds for m in cfg.methods for k in cfg.dims]


def run_pilot(cfg: PilotConfig, out_dir: str | None = None, progress=None) -> dict:
    """Run the full pilot.  Returns ``{"results": rows, "distances": {seed: summary}}``.

    Training runs are independent and individually seeded, so ``workers`` only
    changes wall time, never the numbers.
    """
    rows, distances = [], {}
    for seed in cfg.seeds:
        data = make_pilot_data(replace(cfg.mixture, seed=seed))
        split = train_test_split(data.labels, seed=seed)
        distances[seed] = distance_summary(data, cfg.hist_bins)
        if cfg.include_af:
            rows.append({
                "method": "af", "k": data.matrix.l, "seed": seed,
                "probe_error": linear_probe(data.matrix.probs, data.labels, split),
                "knn_acc": knn_classify(data.matrix.probs, data.labels, 5, split),
            })
        jobs = [(m, k) for m in cfg.methods for k in cfg.dims]
        if cfg.workers > 1:
            with ThreadPoolExecutor(cfg.workers) as pool:
                done = list(pool.map(lambda mk: _run_one(cfg, data, split, mk[0], mk[1], seed), jobs))
        else:
            done = []
            for m, k in jobs:
                done.append(_run_one(cfg, data, split, m, k, seed))
                if progress:
                    progress(done[-1])
        rows.extend(done)
    result = {"results": rows, "distances": distances}
    if out_dir is not None:
        write_pilot(cfg, result, out_dir)
    return result


def results_csv(rows, chash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for r in rows:
        w.writerow([r["method"], r["k"], r["seed"], repr(float(r["probe_error"])), repr(float(r["knn_acc"]))])
    return buf.getvalue()


def summarize(rows) -> dict:
    """Mean probe error / kNN accuracy per method over seeds and dims."""
    out = {}
    for m in sorted({r["method"] for r in rows}):
        sel = [r for r in rows if r["method"] == m]
        out[m] = {
            "probe_error": float(np.mean([r["probe_error"] for r in sel])),
            "knn_acc": float(np.mean([r["knn_acc"] for r in sel])),
            "runs": len(sel),
        }
    return out


def write_pilot(cfg: PilotConfig, result: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    chash = cfg.hash
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        fh.write(results_csv(result["results"], chash))
    for seed, hists in result["distances"].items():
        for name, h in hists.items():
            h.to_csv(os.path.join(out_dir, f"hist_{name}_seed{seed}.csv"),
                     header_comment=f"config_hash={chash} seed={seed}")
    summary = {"config_hash": chash, "config": cfg.to_dict(), "methods": summarize(result["results"]),
               "distance_means": {str(s): {n: [h.intra_mean, h.inter_mean] for n, h in hs.items()}
                                  for s, hs in result["distances"].items()}}
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
