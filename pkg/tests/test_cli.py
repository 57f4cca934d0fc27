import csv
import hashlib
import json

import numpy as np
import pytest

from rareaug.cli import default_config, main, merge_config
from rareaug.data import write_csv, write_schema_sidecar
from rareaug.errors import ConfigError

from conftest import make_dataset, shifted_blobs

FAST = {
    "train": {"n_trees": 5, "max_depth": 6, "epochs": 100},
    "ctgan": {"latent_dim": 8, "hidden": [16, 16], "batch_size": 20, "pac": 10, "epochs": 2},
    "pipeline": {"n_trials": 2, "gate_columns": None},
    "thresholds": {"max_ks_per_continuous": 1.0, "max_categorical_l1": 1.0, "min_pca_overlap": 0.0},
    "explain": {"n_permutations": 10, "background": 20, "max_per_class": 3},
}


def _sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


@pytest.fixture
def work(tmp_path):
    ds = shifted_blobs(n=300, p=3, n_pos=30, shift=2.5, seed=0)
    rng = np.random.default_rng(0)
    X = np.c_[ds.X, rng.integers(0, 3, ds.row_count)]
    ds = make_dataset(X, ds.y, ["c", "c", "c", 3])
    data = tmp_path / "data.csv"
    schema = tmp_path / "data.schema.json"
    write_csv(ds, data)
    write_schema_sidecar(ds.columns, schema)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(FAST))
    return tmp_path, str(data), str(schema), str(cfg)


def run(*argv):
    return main([str(a) for a in argv])


def test_default_config_and_merge():
    cfg = default_config()
    assert cfg["seed"] == 0 and "thresholds" in cfg
    merged = merge_config(cfg, {"pipeline": {"n_trials": 3}})
    assert merged["pipeline"]["n_trials"] == 3 and merged["pipeline"]["metric"] == cfg["pipeline"]["metric"]
    with pytest.raises(ConfigError):
        merge_config(cfg, {"pipline": {}})


def test_inspect(work, capsys):
    _, data, schema, _ = work
    assert run("inspect", data, "--schema", schema) == 0
    out = capsys.readouterr().out
    assert "rows: 300" in out and "class counts: 0=270 1=30" in out and "x4: categorical (3 levels)" in out


def test_split_manifest_and_inputs_untouched(work):
    tmp, data, schema, _ = work
    before = _sha(data)
    out = tmp / "s"
    assert run("split", data, "--schema", schema, "--out", out, "--seed", 4) == 0
    assert _sha(data) == before
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 4 and man["command"] == "split"
    assert set(man["files"]) == {"train.csv", "test.csv", "schema.json"}
    for name, digest in man["files"].items():
        assert _sha(out / name) == digest
    n_train = sum(1 for _ in open(out / "train.csv")) - 1
    n_test = sum(1 for _ in open(out / "test.csv")) - 1
    assert n_train + n_test == 300 and n_test == 90


def test_augment_smote_writes_rows_and_provenance(work):
    tmp, data, schema, cfg = work
    out = tmp / "a"
    assert run("augment", data, "--schema", schema, "--config", cfg, "--technique", "smote",
               "--n-samples", 25, "--out", out) == 0
    rows = list(csv.reader(open(out / "synthetic.csv")))
    assert len(rows) == 26
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["n_rows"] == 25
    assert (out / "fidelity_smote.json").exists()


def test_augment_ctgan_then_checkpoint(work):
    tmp, data, schema, cfg = work
    out = tmp / "g"
    assert run("augment", data, "--schema", schema, "--config", cfg, "--technique", "ctgan",
               "--n-samples", 15, "--out", out) == 0
    assert (out / "ctgan_model.json").exists() and (out / "ctgan_loss.csv").exists()
    out2 = tmp / "g2"
    assert run("augment", data, "--schema", schema, "--config", cfg, "--technique", "ctgan", "--n-samples", 15,
               "--checkpoint", out / "ctgan_model.json", "--out", out2) == 0
    assert run("augment", data, "--schema", schema, "--config", cfg, "--technique", "ctgan",
               "--checkpoint", tmp / "missing.json", "--out", tmp / "g3") == 2


def test_gate_failure_exit_code(work):
    tmp, data, schema, _ = work
    strict = tmp / "strict.json"
    strict.write_text(json.dumps({"thresholds": {"max_ks_per_continuous": 0.0, "max_categorical_l1": 0.0,
                                                 "min_pca_overlap": 1.0}}))
    out = tmp / "f"
    assert run("augment", data, "--schema", schema, "--config", strict, "--technique", "smote",
               "--out", out) == 4
    assert (out / "manifest.json").exists()


def test_train_evaluate_explain(work):
    tmp, data, schema, cfg = work
    out = tmp / "t"
    assert run("train", data, "--schema", schema, "--config", cfg, "--kind", "dt", "--out", out) == 0
    model = out / "model.json"
    ev = tmp / "e"
    assert run("evaluate", data, "--schema", schema, "--model", model, "--out", ev) == 0
    metrics = json.loads((ev / "metrics.json").read_text())
    assert metrics["metrics"]["overall_accuracy"] == pytest.approx(0.97)
    assert metrics["confusion"]["tp"] + metrics["confusion"]["fn"] == 30
    ex = tmp / "x"
    assert run("explain", data, "--schema", schema, "--config", cfg, "--model", model, "--out", ex) == 0
    header = (ex / "scatter.csv").read_text().splitlines()[0]
    assert header.split(",") == ["f1", "f2", "f3", "label"]
    assert (ex / "importance.csv").exists()
    assert run("explain", data, "--schema", schema, "--model", tmp / "nope.json", "--out", ex) == 2


def test_fidelity_command(work):
    tmp, data, schema, cfg = work
    assert run("fidelity", data, "--schema", schema, "--config", cfg, "--synthetic", data, "--out", tmp / "q") == 0
    rep = json.loads((tmp / "q" / "fidelity_synthetic.json").read_text())
    assert rep["pass"] is True and rep["aggregate_ks"] == 0.0


def test_pipeline_outputs_and_determinism(work, capsys):
    tmp, data, schema, cfg = work
    a, b = tmp / "p1", tmp / "p2"
    for out in (a, b):
        assert run("pipeline", data, "--schema", schema, "--config", cfg, "--out", out) == 0
    assert (a / "pipeline.json").read_bytes() == (b / "pipeline.json").read_bytes()
    assert "best model:" in capsys.readouterr().out
    doc = json.loads((a / "pipeline.json").read_text())
    assert len(doc["records"]) <= 3
    rows = list(csv.DictReader(open(a / "boxplot.csv")))
    groups = {}
    for r in rows:
        groups.setdefault((r["iteration"], r["model"], r["class"]), 0)
        groups[(r["iteration"], r["model"], r["class"])] += 1
    assert set(groups.values()) == {2}
    assert len(groups) == len(doc["records"]) * 3 * 2
    assert (a / "scatter.csv").exists() and (a / "importance.json").exists()
    man = json.loads((a / "manifest.json").read_text())
    for name, digest in man["files"].items():
        assert _sha(a / name) == digest


def test_pipeline_flags(work):
    tmp, data, schema, cfg = work
    out = tmp / "p"
    assert run("pipeline", data, "--schema", schema, "--config", cfg, "--models", "dt", "--n", 0,
               "--no-explain", "--out", out) == 0
    doc = json.loads((out / "pipeline.json").read_text())
    assert len(doc["records"]) == 1 and list(doc["records"][0]["models"]) == ["dt"]
    assert not (out / "scatter.csv").exists()


def test_config_errors(work):
    tmp, data, schema, _ = work
    bad = tmp / "bad.json"
    bad.write_text('{"nonsense": 1}')
    assert run("inspect", data, "--config", bad) == 2
    assert run("inspect", data, "--config", tmp / "missing.json") == 2
    assert run("inspect", tmp / "missing.csv") == 2
    assert run("pipeline", data, "--models", "svm", "--out", tmp / "z") == 2
    assert run("inspect", data, "--seed", -1) == 2
    assert run("bogus") == 2
    assert run("--version") == 0


def test_malformed_csv_is_a_data_error(tmp_path, capsys):
    p = tmp_path / "m.csv"
    p.write_text("y,x1\n0,1.0\n1,abc\n")
    assert run("inspect", p) == 3
    err = capsys.readouterr().err
    assert "x1" in err


def test_header_only_warns(tmp_path, capsys):
    p = tmp_path / "h.csv"
    p.write_text("y,x1\n")
    assert run("inspect", p) == 0
    assert "no data rows" in capsys.readouterr().err


def test_generate_and_report(tmp_path):
    out = tmp_path / "gen"
    assert run("generate", "toy", "--out", out) == 0
    assert (out / "toy.csv").exists() and (out / "toy.schema.json").exists()
    code = run("report", "--out", out)
    assert code in (0, 2)
