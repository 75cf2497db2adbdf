import csv
import json

import numpy as np
import pytest

from augca.cli import EXIT_INVALID, EXIT_OK, EXIT_PROPERTY, apply_overrides, main
from augca.domain import load_descriptor
from augca.encoder import load_checkpoint
from augca.pilot import PilotConfig, method_config, run_pilot
from augca.synthetic import MixtureConfig


def read_json(path):
    return json.loads(path.read_text())


class TestOverrides:
    def test_nested_and_typed(self):
        cfg = apply_overrides({"a": {"b": 1}}, ["a.b=2.5", "a.c=[1, 2]", "d=hello", "e=true"])
        assert cfg == {"a": {"b": 2.5, "c": [1, 2]}, "d": "hello", "e": True}

    def test_original_untouched(self):
        orig = {"a": 1}
        apply_overrides(orig, ["a=2"])
        assert orig == {"a": 1}

    def test_bad_override(self):
        assert main(["oracle", "--set", "count", "--out", "x"]) == EXIT_INVALID


def test_gen_random(tmp_path):
    assert main(["gen", "--set", "kind=random", "--set", "n=4", "--set", "l=9", "--set", "sparsity=3",
                 "--out", str(tmp_path)]) == EXIT_OK
    a, _ = load_descriptor(tmp_path / "instance.json")
    assert (a.n, a.l) == (4, 9)
    assert "config_hash" in read_json(tmp_path / "instance.json")


def test_gen_mixture(tmp_path):
    assert main(["gen", "--set", "mixture.samples_per_component=10", "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "points.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and lines[1] == "label,x,y"
    assert len(lines) == 2 + 40
    assert len((tmp_path / "outcomes.csv").read_text().splitlines()) == 2 + 80
    a, dom = load_descriptor(tmp_path / "augmentation.json")
    assert (a.n, a.l) == (40, 80) and dom.labels is not None


def test_config_file_and_missing_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "random", "n": 3, "l": 5}))
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert main(["gen", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_INVALID
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["gen", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == EXIT_INVALID


class TestOracle:
    def test_default_suite_passes(self, tmp_path):
        assert main(["oracle", "--out", str(tmp_path)]) == EXIT_OK
        rep = read_json(tmp_path / "oracle_report.json")
        assert rep["pass"] and rep["instances"] == 20
        first = rep["reports"][0]
        for key in ("singular_values", "posterior_max_violation", "natural_max_violation", "k", "pass"):
            assert key in first
        assert first["k"] == list(range(1, first["rank"] + 1))

    def test_schema_stable(self, tmp_path):
        main(["oracle", "--set", "count=2", "--out", str(tmp_path)])
        assert sorted(read_json(tmp_path / "oracle_report.json")) == [
            "config_hash", "instances", "loss_gap_max_spread", "natural_bound_max_violation", "pass",
            "posterior_bound_max_violation", "projection_max_error", "reports", "seed", "sigma1_max_error"]

    def test_corruption_is_reported(self, tmp_path):
        assert main(["oracle", "--set", "count=3", "--set", "corrupt=0.05", "--out", str(tmp_path)]) == EXIT_PROPERTY
        rep = read_json(tmp_path / "oracle_report.json")
        assert not rep["pass"] and rep["posterior_bound_max_violation"] > 1e-3

    def test_descriptor_instances(self, tmp_path):
        main(["gen", "--set", "kind=random", "--set", "n=3", "--set", "l=7", "--out", str(tmp_path)])
        assert main(["oracle", "--set", "count=0", "--set", f'descriptors=["{tmp_path / "instance.json"}"]',
                     "--out", str(tmp_path / "o")]) == EXIT_OK
        assert read_json(tmp_path / "o" / "oracle_report.json")["instances"] == 1


def test_train_discrete(tmp_path):
    main(["gen", "--set", "kind=random", "--set", "n=5", "--set", "l=10", "--set", "sparsity=3",
          "--out", str(tmp_path)])
    rc = main(["train", "--set", f"data.descriptor={tmp_path / 'instance.json'}", "--set", "train.k=2",
               "--set", "train.epochs=3", "--set", "train.batch_size=4", "--out", str(tmp_path / "t")])
    assert rc == EXIT_OK
    ck = load_checkpoint(tmp_path / "t" / "checkpoint.json")
    assert ck.spec.kind == "table" and ck.spec.input_dim == 15 and "config_hash" in ck.meta
    log = (tmp_path / "t" / "train_log.csv").read_text().splitlines()
    assert log[0] == f"# config_hash={ck.meta['config_hash']}" and len(log) == 2 + 3


def test_train_rejects_non_table_on_discrete(tmp_path):
    main(["gen", "--set", "kind=random", "--set", "n=3", "--set", "l=5", "--out", str(tmp_path)])
    assert main(["train", "--set", f"data.descriptor={tmp_path / 'instance.json'}", "--set", "encoder.kind=mlp",
                 "--out", str(tmp_path / "t")]) == EXIT_INVALID


def test_train_then_eval_matches_pilot(tmp_path):
    pc = PilotConfig(mixture=MixtureConfig(samples_per_component=25, seed=1), seeds=(1,), dims=(4,),
                     methods=("aca_full",), hidden=(16,), train={"epochs": 4, "batch_size": 32},
                     include_af=False)
    row = run_pilot(pc)["results"][0]
    tc = method_config(pc, "aca_full", 4, 1, 100)
    cfg = {"data": {"mixture": pc.mixture.to_dict()}, "encoder": {"kind": "mlp", "hidden": [16]},
           "train": tc.to_dict()}
    (tmp_path / "train.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp_path / "train.json"), "--out", str(tmp_path / "t")]) == EXIT_OK
    assert main(["eval", "--set", f"embeddings={tmp_path / 't' / 'embeddings.csv'}", "--set", "seed=1",
                 "--out", str(tmp_path / "e")]) == EXIT_OK
    rep = read_json(tmp_path / "e" / "eval_report.json")
    assert rep["linear_probe_error"] == row["probe_error"]
    assert rep["knn_accuracy"] == row["knn_acc"]
    rows = list(csv.reader((tmp_path / "e" / "distance_hist.csv").read_text().splitlines()[1:]))
    assert rows[0] == ["bin_lo", "bin_hi", "intra", "inter"]


def test_train_reproducible(tmp_path):
    args = ["train", "--set", "data.mixture.samples_per_component=10", "--set", "train.k=2",
            "--set", "train.epochs=2", "--set", "train.batch_size=8", "--set", "encoder.hidden=[8]"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "embeddings.csv").read_bytes() == (tmp_path / "b" / "embeddings.csv").read_bytes()


def test_eval_missing_input(tmp_path):
    assert main(["eval", "--set", "embeddings=nowhere.csv", "--out", str(tmp_path)]) == EXIT_INVALID
    assert main(["eval", "--out", str(tmp_path)]) == EXIT_INVALID


def test_pilot_dry_run(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["pilot", "--dry-run", "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "140 training runs" in text and "config_hash=" in text
    assert not out.exists()


def test_pilot_small(tmp_path):
    args = ["pilot", "--set", "seeds=[0]", "--set", "dims=[2]", "--set", 'methods=["spectral"]',
            "--set", "mixture.samples_per_component=10", "--set", "hidden=[8]",
            "--set", "train.epochs=2", "--set", "train.batch_size=16"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--workers", "2", "--out", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_missing_out(tmp_path):
    assert main(["oracle"]) == EXIT_INVALID
