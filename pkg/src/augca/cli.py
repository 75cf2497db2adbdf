"""``augca`` command line: gen | train | eval | oracle | pilot.

Every subcommand reads a JSON config, applies ``--set key=value`` overrides
(dotted keys reach into nested objects, values parse as JSON when they can),
and writes its outputs under ``--out``.  Each output records the config hash.

Exit codes: 0 success, 2 invalid input or config, 3 a property check failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .checks import DEFAULT_SUITE, run_oracle_suite
from .domain import DomainError, load_descriptor, save_descriptor
from .encoder import make_encoder, save_checkpoint
from .evaluation import EvalError, distance_histogram, evaluate
from .pilot import PilotConfig, plan, run_pilot
from .spectral import OracleError
from .synthetic import MixtureConfig, gen_random_instance, make_pilot_data
from .trainer import DiscreteDataset, GaussianDataset, TrainConfig, TrainingDiverged, config_hash, train

EXIT_OK, EXIT_INVALID, EXIT_PROPERTY = 0, 2, 3


class ConfigError(ValueError):
    pass


class PropertyViolation(RuntimeError):
    pass


# -- config plumbing -------------------------------------------------------------

def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, sets) -> dict:
    cfg = json.loads(json.dumps(cfg))
    for item in sets or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {p} is not an object")
        node[parts[-1]] = parse_value(value)
    return cfg


def load_config(path, sets=()) -> dict:
    if path is None:
        cfg = {}
    else:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return apply_overrides(cfg, sets)


def _resolve(path: str, cfg_path) -> str:
    if os.path.isabs(path) or cfg_path is None or os.path.exists(path):
        return path
    return os.path.join(os.path.dirname(os.path.abspath(cfg_path)), path)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path, header, rows, comment):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_rows(path):
    if not os.path.exists(path):
        raise ConfigError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


# -- subcommands ---------------------------------------------------------------------

def cmd_gen(cfg: dict, out: str, cfg_path=None) -> dict:
    """Mixture data (points, labels, outcomes, empirical matrix) or a random discrete instance."""
    kind = cfg.get("kind", "mixture")
    chash = config_hash(cfg)
    if kind == "mixture":
        mix = MixtureConfig(**{**cfg.get("mixture", {}), "weights": tuple(cfg.get("mixture", {}).get("weights", ()))})
        data = make_pilot_data(mix)
        tag = f"config_hash={chash} seed={mix.seed}"
        _write_rows(os.path.join(out, "points.csv"), ["label", "x", "y"],
                    [[int(c), repr(float(x)), repr(float(y))] for c, (x, y) in zip(data.labels, data.points)], tag)
        _write_rows(os.path.join(out, "outcomes.csv"), ["parent", "x", "y"],
                    [[int(p), repr(float(x)), repr(float(y))] for p, (x, y) in zip(data.parents, data.outcomes)], tag)
        if cfg.get("write_matrix", True):
            save_descriptor(data.matrix, os.path.join(out, "augmentation.json"), labels=data.labels,
                            extra={"config_hash": chash, "seed": mix.seed})
        return {"natural": len(data.points), "outcomes": len(data.outcomes)}
    if kind == "random":
        seed = cfg.get("seed", 0)
        a = gen_random_instance(int(cfg["n"]), int(cfg["l"]), cfg.get("sparsity"), seed)
        labels = cfg.get("labels")
        save_descriptor(a, os.path.join(out, "instance.json"), labels=labels,
                        extra={"config_hash": chash, "seed": seed})
        return {"natural": a.n, "outcomes": a.l}
    raise ConfigError(f"unknown gen kind {kind!r}; expected 'mixture' or 'random'")


def _train_data(cfg: dict, cfg_path):
    data = cfg.get("data", {})
    if "descriptor" in data:
        a, dom = load_descriptor(_resolve(data["descriptor"], cfg_path))
        ds = DiscreteDataset(a, dom.labels)
        return ds, ds.natural_inputs(np.arange(a.n)), dom.labels, ds.table_size
    mix = data.get("mixture", {})
    mc = MixtureConfig(**{**mix, "weights": tuple(mix.get("weights", ()))})
    pd = make_pilot_data(mc)
    return GaussianDataset(pd.points, mc.aug_var, pd.labels), pd.points, pd.labels, 2


def cmd_train(cfg: dict, out: str, cfg_path=None) -> dict:
    """Train one encoder; writes checkpoint.json, train_log.csv and embeddings.csv (natural samples)."""
    tc = TrainConfig.from_dict(cfg.get("train", {}))
    ds, nat_inputs, labels, input_dim = _train_data(cfg, cfg_path)
    enc_cfg = cfg.get("encoder", {})
    kind = enc_cfg.get("kind", "table" if isinstance(ds, DiscreteDataset) else "mlp")
    if isinstance(ds, DiscreteDataset) and kind != "table":
        raise ConfigError("discrete instances are trained with the table encoder")
    hidden = tuple(enc_cfg.get("hidden", (64, 64))) if kind == "mlp" else ()
    enc = make_encoder(kind, tc.k, input_dim, hidden, tc.normalize)
    params, log = train(tc, ds, enc)
    chash = config_hash(cfg)
    log.config_hash = chash
    save_checkpoint(os.path.join(out, "checkpoint.json"), enc.spec, params, seed=tc.seed,
                    meta={"config_hash": chash})
    log.to_csv(os.path.join(out, "train_log.csv"))
    emb = enc(params, nat_inputs)
    lab = labels if labels is not None else np.full(len(emb), -1)
    _write_rows(os.path.join(out, "embeddings.csv"), ["label"] + [f"e{i}" for i in range(emb.shape[1])],
                [[int(c)] + [repr(float(v)) for v in row] for c, row in zip(lab, emb)],
                f"config_hash={chash} seed={tc.seed}")
    return {"final_loss": float(log.totals[-1]) if log.rows else None}


def cmd_eval(cfg: dict, out: str, cfg_path=None) -> dict:
    """Linear probe + 5-NN on an embeddings CSV; writes eval_report.json and distance_hist.csv."""
    if "embeddings" not in cfg:
        raise ConfigError("eval config needs 'embeddings' (path to a CSV written by train)")
    header, rows = _read_rows(_resolve(cfg["embeddings"], cfg_path))
    if not header or header[0] != "label":
        raise ConfigError("embeddings CSV must start with a 'label' column")
    y = np.array([int(r[0]) for r in rows])
    x = np.array([[float(v) for v in r[1:]] for r in rows])
    seed = cfg.get("seed", 0)
    chash = config_hash(cfg)
    rep = evaluate(x, y, seed=seed, config_hash=chash)
    _write_json(os.path.join(out, "eval_report.json"), {**vars(rep), "seed": seed})
    dist = np.sqrt(np.maximum(np.sum(x**2, 1)[:, None] + np.sum(x**2, 1)[None] - 2 * x @ x.T, 0.0))
    pairs = cfg.get("pairs_per_kind")
    hist = distance_histogram(dist, y, cfg.get("bins", 30), pairs, seed)
    hist.to_csv(os.path.join(out, "distance_hist.csv"), header_comment=f"config_hash={chash} seed={seed}")
    return {"linear_probe_error": rep.linear_probe_error, "knn_accuracy": rep.knn_accuracy}


def cmd_oracle(cfg: dict, out: str, cfg_path=None) -> dict:
    """Exact property suite; the JSON report lists per-instance maxima and pass/fail."""
    unknown = set(cfg) - set(DEFAULT_SUITE) - {"descriptors"}
    if unknown:
        raise ConfigError(f"unknown oracle config keys: {sorted(unknown)}")
    extra = []
    for p in cfg.get("descriptors", []):
        a, _ = load_descriptor(_resolve(p, cfg_path))
        extra.append((os.path.basename(p), a))
    suite = {k: v for k, v in cfg.items() if k != "descriptors"}
    report = run_oracle_suite(suite, extra)
    report["config_hash"] = config_hash(cfg)
    report["seed"] = {**DEFAULT_SUITE, **suite}["seed"]
    _write_json(os.path.join(out, "oracle_report.json"), report)
    if not report["pass"]:
        raise PropertyViolation(
            f"property check failed: posterior bound {report['posterior_bound_max_violation']:.3g}, "
            f"natural bound {report['natural_bound_max_violation']:.3g}")
    return {k: v for k, v in report.items() if k != "reports"}


def cmd_pilot(cfg: dict, out: str, cfg_path=None, dry_run: bool = False, workers: int | None = None) -> dict:
    pc = PilotConfig.from_dict(cfg)
    if workers:
        pc.workers = workers
    jobs = plan(pc)
    if dry_run:
        print(f"config_hash={pc.hash}")
        for m, k, s in jobs:
            print(f"seed={s} method={m} k={k}")
        print(f"{len(jobs)} training runs")
        return {"runs": len(jobs)}
    res = run_pilot(pc, out)
    return {"runs": len(res["results"])}


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "oracle": cmd_oracle, "pilot": cmd_pilot}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="augca", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0] if fn.__doc__ else name)
        p.add_argument("--config", help="JSON config file (defaults apply when omitted)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry; dotted keys reach nested objects")
        p.add_argument("--out", default=None, help="output directory")
        if name == "pilot":
            p.add_argument("--dry-run", action="store_true", help="print the run plan and exit")
            p.add_argument("--workers", type=int, default=None, help="training threads")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        dry = getattr(args, "dry_run", False)
        if args.out is None and not dry:
            raise ConfigError("--out is required")
        if args.out is not None and not dry:
            os.makedirs(args.out, exist_ok=True)
        kwargs = {"dry_run": dry, "workers": args.workers} if args.command == "pilot" else {}
        summary = COMMANDS[args.command](cfg, args.out, args.config, **kwargs)
    except PropertyViolation as exc:
        print(f"augca {args.command}: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except (ConfigError, DomainError, OracleError, EvalError, TrainingDiverged, ValueError, KeyError,
            TypeError, FileNotFoundError) as exc:
        print(f"augca {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not getattr(args, "dry_run", False):
        print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
