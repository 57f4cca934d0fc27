"""``rareaug`` command-line interface.

Every command reads an optional JSON run config (``--config``), applies
flag overrides, writes its files under ``--out`` and finishes with a
``manifest.json`` listing each file in that directory with its SHA-256.

Exit codes: 0 ok, 2 config error, 3 data error, 4 fidelity gate failed,
5 training (or any unexpected) failure.
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import hashlib
import importlib.util
import json
import os
import sys
from dataclasses import MISSING, fields

import numpy as np

from . import __version__
from .analysis import global_importance, stratified_background, write_importance_csv, write_importance_json
from .classifiers import MODEL_KINDS, TrainConfig, fit_model, load_model, save_model
from .ctgan import CtganConfig, CtganModel
from .data import (
    CONTINUOUS, DEFAULT_LABEL, LABEL, BenchmarkSpec, ScalerParams, apply_scaler, fit_scaler, invert_scaler, load_csv,
    make_benchmark, make_toy, read_schema_sidecar, split, write_csv, write_schema_sidecar,
)
from .errors import ConfigError, DataError, RareAugError, SchemaError
from .fidelity import StructureThresholds, ecdf, kde, structure_check, tsne, write_curves
from .metrics import confusion, summarize
from .pipeline import (
    CTGAN_ROWS, LASSO_GATE, METRICS, TECHNIQUES, PipelineConfig, augment, generator_batch, resolve_gate_columns,
    run_pipeline, train_generator,
)
from .smote import CATEGORICAL_POLICIES, SMOTE, TARGET_RATIO, target_count

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_GATE, EXIT_TRAINING = 0, 2, 3, 4, 5
MANIFEST = "manifest.json"
DEFAULT_OUT = "rareaug_out"


# ---------------------------------------------------------------------------
# run config


def _dataclass_defaults(cls, skip=("seed",)):
    out = {}
    for f in fields(cls):
        if f.name in skip:
            continue
        v = f.default if f.default is not MISSING else f.default_factory()
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def default_config():
    """Every recognised key with its default value."""
    return {
        "seed": 0,
        "threads": 1,
        "input": None,
        "schema": None,
        "label": DEFAULT_LABEL,
        "out": DEFAULT_OUT,
        "split": {"test_fraction": 0.3, "stratified": True},
        "train": _dataclass_defaults(TrainConfig),
        "smote": {"k": 5, "categorical_policy": CATEGORICAL_POLICIES[0], "n_samples": None,
                  "target_ratio": TARGET_RATIO},
        "ctgan": _dataclass_defaults(CtganConfig),
        "thresholds": _dataclass_defaults(StructureThresholds),
        "pipeline": {"techniques": list(TECHNIQUES), "max_techniques": 2, "metric": METRICS[0],
                     "models": list(MODEL_KINDS), "n_trials": 25, "imbalance_threshold": 0.5,
                     "ctgan_rows": CTGAN_ROWS[0], "gate_columns": LASSO_GATE, "gate_lasso_k": 3,
                     "gate_lasso_ratio": 0.01, "explain": True},
        "explain": {"n_permutations": 200, "background": 100, "max_per_class": 50},
        "report": {"svg": False, "tsne": False, "tsne_perplexity": 30.0, "tsne_iterations": 500,
                   "tsne_max_points": 1000},
    }


def merge_config(base, override, where="config"):
    """Recursive merge; keys absent from ``base`` are rejected."""
    if not isinstance(override, dict):
        raise ConfigError(f"{where} must be a JSON object")
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigError(f"unknown key {where}.{k}")
        if isinstance(base[k], dict):
            out[k] = merge_config(base[k], v, f"{where}.{k}")
        else:
            out[k] = v
    return out


def read_config(path):
    if path is None:
        return default_config()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return merge_config(default_config(), doc)


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _section(cls, d, seed):
    try:
        return cls(**d, seed=seed)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def train_config(cfg):
    return _section(TrainConfig, cfg["train"], cfg["seed"])


def ctgan_config(cfg):
    return _section(CtganConfig, cfg["ctgan"], cfg["seed"])


def thresholds(cfg):
    return StructureThresholds(**cfg["thresholds"])


def pipeline_config(cfg):
    p = cfg["pipeline"]
    gate = p["gate_columns"]
    return PipelineConfig(
        techniques=tuple(p["techniques"]), max_techniques=p["max_techniques"], metric=p["metric"],
        models=tuple(p["models"]), n_trials=p["n_trials"], seed=cfg["seed"],
        test_fraction=cfg["split"]["test_fraction"], imbalance_threshold=p["imbalance_threshold"],
        target_ratio=cfg["smote"]["target_ratio"], train=train_config(cfg), smote_k=cfg["smote"]["k"],
        smote_categorical_policy=cfg["smote"]["categorical_policy"], ctgan=ctgan_config(cfg),
        thresholds=thresholds(cfg), ctgan_rows=p["ctgan_rows"],
        gate_columns=tuple(gate) if isinstance(gate, list) else gate, gate_lasso_k=p["gate_lasso_k"],
        gate_lasso_ratio=p["gate_lasso_ratio"], n_jobs=cfg["threads"],
    )


# ---------------------------------------------------------------------------
# output helpers


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out, command, cfg):
    files = {}
    for root, _, names in os.walk(out):
        for nm in names:
            full = os.path.join(root, nm)
            rel = os.path.relpath(full, out).replace(os.sep, "/")
            if rel != MANIFEST:
                files[rel] = sha256_file(full)
    doc = {
        "tool": "rareaug",
        "version": __version__,
        "command": command,
        "seed": cfg["seed"],
        "config": cfg,
        "config_hash": config_hash(cfg),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "files": dict(sorted(files.items())),
    }
    with open(os.path.join(out, MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def write_json(path, doc):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _require_file(path, what):
    if path is None:
        raise ConfigError(f"no {what} given")
    if not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")


def load_input(cfg):
    _require_file(cfg["input"], "input CSV")
    schema = None
    if cfg["schema"] is not None:
        _require_file(cfg["schema"], "schema sidecar")
        schema = read_schema_sidecar(cfg["schema"])
    return load_csv(cfg["input"], schema=schema, label=cfg["label"])


def _svg(path, series, kind="line", title=None):
    """Render a curve file's series; quietly skipped without matplotlib."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("warning: matplotlib not installed; skipping SVG output", file=sys.stderr)
        return False
    plt.rcParams["svg.hashsalt"] = "rareaug"  # stable element ids
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, (xs, ys) in series.items():
        if kind == "scatter":
            ax.scatter(xs, ys, s=4, alpha=0.5, label=name)
        else:
            ax.plot(xs, ys, label=name)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return True


def write_fidelity_bundle(out, tag, real, synthetic, report, cfg):
    """Fidelity JSON plus ECDF / KDE / PCA (optionally t-SNE) curve files
    comparing the real rows of the synthetic batch's class with the batch."""
    label = int(synthetic.y[0]) if len(synthetic.y) else 1
    Xr = real.X[real.y == label]
    Xs = np.asarray(synthetic.X)
    report.write_json(os.path.join(out, f"fidelity_{tag}.json"))
    pos = {c.name: j for j, c in enumerate(real.feature_columns)}
    cont = [nm for nm in report.ks if real.feature_columns[pos[nm]].kind.kind == CONTINUOUS]
    ec, kd = {}, {}
    for nm in cont:
        j = pos[nm]
        for who, v in (("real", Xr[:, j]), ("synthetic", Xs[:, j])):
            if len(v):
                e = ecdf(v)
                ec[f"{nm}/{who}"] = (e.x, e.p)
                if np.ptp(v) > 0:
                    d = kde(v)
                    kd[f"{nm}/{who}"] = (d.x, d.density)
    curves = {"ecdf": (ec, "line"), "kde": (kd, "line"),
              "pca": ({"real": (report.pca_real[:, 0], report.pca_real[:, 1]),
                       "synthetic": (report.pca_synthetic[:, 0], report.pca_synthetic[:, 1])}, "scatter")}
    rep = cfg["report"]
    if rep["tsne"] and len(Xs):
        both = np.vstack([Xr, Xs])
        emb = tsne(both, rep["tsne_perplexity"], rep["tsne_iterations"], seed=cfg["seed"],
                   max_points=rep["tsne_max_points"])
        idx = emb.indices if emb.indices is not None else np.arange(len(both))
        is_real = idx < len(Xr)
        curves["tsne"] = ({"real": (emb.coords[is_real, 0], emb.coords[is_real, 1]),
                           "synthetic": (emb.coords[~is_real, 0], emb.coords[~is_real, 1])}, "scatter")
    for name, (series, kind) in curves.items():
        write_curves(os.path.join(out, f"{name}_{tag}.csv"), series)
        if rep["svg"]:
            _svg(os.path.join(out, f"{name}_{tag}.svg"), series, kind, f"{name} ({tag})")


# ---------------------------------------------------------------------------
# commands


def cmd_inspect(args, cfg):
    ds = load_input(cfg)
    summary = ds.summary()
    if ds.row_count == 0:
        print(f"warning: {cfg['input']} holds a header but no data rows", file=sys.stderr)
    n0, n1 = ds.class_counts()
    print(f"rows: {ds.row_count}")
    print(f"class counts: 0={n0} 1={n1}")
    ratio = summary["minority_ratio"]
    print(f"minority ratio: {'n/a' if ratio is None else f'{ratio:.6f}'}")
    for c in ds.columns:
        d = c.to_dict()
        extra = f" ({d['cardinality']} levels)" if d.get("cardinality") else ""
        print(f"  {c.name}: {d['kind']}{extra}{' [label]' if c.role == LABEL else ''}")
    if args.out is not None:
        write_json(os.path.join(cfg["out"], "summary.json"), summary)
        return EXIT_OK, True
    return EXIT_OK, False


def cmd_split(args, cfg):
    ds = load_input(cfg)
    pair = split(ds, cfg["split"]["test_fraction"], cfg["seed"], cfg["split"]["stratified"])
    out = cfg["out"]
    write_csv(pair.train, os.path.join(out, "train.csv"))
    write_csv(pair.test, os.path.join(out, "test.csv"))
    write_schema_sidecar(ds.columns, os.path.join(out, "schema.json"))
    print(f"train {pair.train.class_counts()}  test {pair.test.class_counts()}")
    return EXIT_OK, True


def _gate_columns(scaled, cfg):
    pc = pipeline_config(cfg)
    return resolve_gate_columns(scaled, pc)


def cmd_augment(args, cfg):
    ds = load_input(cfg)
    pc = pipeline_config(cfg)
    out = cfg["out"]
    scaler = fit_scaler(ds)
    scaled = apply_scaler(ds, scaler)
    count = cfg["smote"]["n_samples"]
    if count is None:
        n1 = int(np.sum(ds.y == 1))
        count = target_count(n1, ds.row_count - n1, cfg["smote"]["target_ratio"])
    if count <= 0:
        raise ConfigError("the input already meets the target ratio; set smote.n_samples to force a batch")
    seed = cfg["seed"]
    if args.technique == SMOTE:
        batch = augment(scaled, SMOTE, pc, seed, count=count)
    else:
        if args.checkpoint is not None:
            _require_file(args.checkpoint, "CTGAN checkpoint")
            model = CtganModel.load(args.checkpoint)
        else:
            model = train_generator(scaled, pc, seed)
            model.save(os.path.join(out, "ctgan_model.json"))
            model.write_loss_csv(os.path.join(out, "ctgan_loss.csv"))
        batch = generator_batch(model, count, pc, seed)
    report = structure_check(scaled, batch, pc.thresholds, label=1, columns=_gate_columns(scaled, cfg))
    report.technique = args.technique
    raw = batch.to_dataset(ds.columns).with_X(invert_scaler(batch.X, scaler))
    write_csv(raw, os.path.join(out, "synthetic.csv"))
    write_json(os.path.join(out, "provenance.json"), batch.provenance_dict())
    write_fidelity_bundle(out, args.technique, scaled, batch, report, cfg)
    verdict = "passed" if report.passed else f"FAILED ({', '.join(report.failures())})"
    print(f"{args.technique}: {batch.n_rows} synthetic rows; fidelity gate {verdict}")
    return (EXIT_OK if report.passed else EXIT_GATE), True


def cmd_fidelity(args, cfg):
    real = load_input(cfg)
    _require_file(args.synthetic, "synthetic CSV")
    syn = load_csv(args.synthetic, schema=list(real.columns))
    scaler = fit_scaler(real)
    real_s, syn_s = apply_scaler(real, scaler), apply_scaler(syn, scaler)
    label = args.label_class
    cols = cfg["pipeline"]["gate_columns"]
    cols = None if args.all_columns else (tuple(cols) if isinstance(cols, list) else cols)
    pc = PipelineConfig(gate_columns=cols, gate_lasso_k=cfg["pipeline"]["gate_lasso_k"],
                        gate_lasso_ratio=cfg["pipeline"]["gate_lasso_ratio"], seed=cfg["seed"])
    syn_rows = syn_s.subset(np.flatnonzero(syn_s.y == label))
    if syn_rows.row_count == 0:
        raise SchemaError(f"synthetic file has no rows of class {label}")
    report = structure_check(real_s, syn_rows, thresholds(cfg), label=label, columns=resolve_gate_columns(real_s, pc))
    write_fidelity_bundle(cfg["out"], "synthetic", real_s, syn_rows, report, cfg)
    print(f"fidelity gate {'passed' if report.passed else 'FAILED: ' + ', '.join(report.failures())}")
    return (EXIT_OK if report.passed else EXIT_GATE), True


def cmd_train(args, cfg):
    ds = load_input(cfg)
    n0, n1 = ds.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError("training data must hold both classes")
    scaler = fit_scaler(ds)
    model = fit_model(args.kind, apply_scaler(ds, scaler), train_config(cfg), n_jobs=cfg["threads"])
    extra = {"scaler": scaler.to_dict(), "columns": [{"name": c.name, **c.to_dict()} for c in ds.columns],
             "seed": cfg["seed"], "train_counts": [n0, n1]}
    save_model(model, os.path.join(cfg["out"], "model.json"), extra)
    print(f"trained {args.kind} on {ds.row_count} rows")
    return EXIT_OK, True


def _load_checkpoint(path):
    _require_file(path, "model checkpoint")
    try:
        model, doc = load_model(path)
    except (json.JSONDecodeError, KeyError) as exc:
        raise SchemaError(f"unreadable model checkpoint {path}: {exc}") from None
    if "scaler" not in doc:
        raise SchemaError("checkpoint carries no scaler; write it with `rareaug train`")
    return model, doc


def _scaled_input(cfg, doc):
    ds = load_input(cfg)
    names = [c["name"] for c in doc.get("columns", [])]
    if names and names != [c.name for c in ds.columns]:
        raise SchemaError("input columns differ from the ones the model was trained on")
    return ds, apply_scaler(ds, ScalerParams.from_dict(doc["scaler"]))


def cmd_evaluate(args, cfg):
    model, doc = _load_checkpoint(args.model)
    ds, scaled = _scaled_input(cfg, doc)
    pred = model.predict(scaled.X)
    cm = confusion(pred, ds.y)
    summary = summarize(cm)
    write_json(os.path.join(cfg["out"], "metrics.json"),
               {"model": doc["kind"], "n_rows": ds.row_count, "confusion": cm.to_dict(), "metrics": summary.to_dict()})
    r1 = summary.class1.recall
    print(f"{doc['kind']}: class-1 recall {'n/a' if r1 is None else f'{r1:.4f}'}, "
          f"accuracy {summary.overall_accuracy:.4f}")
    return EXIT_OK, True


def explain_model(model, scaled, raw, cfg, out):
    """Importance files plus the top-3 class-1 scatter file."""
    ex = cfg["explain"]
    bg = scaled.X[stratified_background(scaled, ex["background"], cfg["seed"])]
    imp = global_importance(model, scaled, bg, ex["n_permutations"], cfg["seed"], ex["max_per_class"])
    write_importance_csv(os.path.join(out, "importance.csv"), imp)
    write_importance_json(os.path.join(out, "importance.json"), imp)
    top = [nm for nm, _ in imp[1].ranked()[:3]]
    pos = {nm: j for j, nm in enumerate(raw.feature_names)}
    with open(os.path.join(out, "scatter.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("f1,f2,f3,label\n")
        for i in range(raw.row_count):
            vals = [repr(float(raw.X[i, pos[nm]])) for nm in top] + [""] * (3 - len(top))
            fh.write(",".join(vals + [str(int(raw.y[i]))]) + "\n")
    write_json(os.path.join(out, "scatter_features.json"), {"f1": top[0] if top else None,
                                                             "f2": top[1] if len(top) > 1 else None,
                                                             "f3": top[2] if len(top) > 2 else None})
    if cfg["report"]["svg"]:
        ranked = imp[1].ranked()
        _svg(os.path.join(out, "importance.svg"),
             {"class 1": (np.arange(len(ranked)), [v for _, v in ranked])}, "line", "class-1 importance (ranked)")
    return imp


def cmd_explain(args, cfg):
    model, doc = _load_checkpoint(args.model)
    ds, scaled = _scaled_input(cfg, doc)
    imp = explain_model(model, scaled, ds, cfg, cfg["out"])
    for c in (0, 1):
        head = ", ".join(f"{nm}={v:.4f}" for nm, v in imp[c].ranked()[:3])
        print(f"class {c} top features: {head}")
    return EXIT_OK, True


def cmd_pipeline(args, cfg):
    ds = load_input(cfg)
    pc = pipeline_config(cfg)
    out = cfg["out"]
    log = (lambda m: print(m, file=sys.stderr)) if args.verbose else None
    result = run_pipeline(ds, pc, log=log)
    result.write_json(os.path.join(out, "pipeline.json"))
    result.write_boxplot_csv(os.path.join(out, "boxplot.csv"))
    art = result.artifacts
    gate_cols = result.split["gate_columns"]
    for tech, batch in art["batches"].items():
        rep = structure_check(art["train"], batch, pc.thresholds, label=1, columns=gate_cols)
        rep.technique = tech
        write_fidelity_bundle(out, tech, art["train"], batch, rep, cfg)
    best = result.best_model
    if cfg["pipeline"]["explain"]:
        train = art["train"]
        if best.technique is not None:
            b = art["batches"][best.technique]
            train = train.append(b.X, b.y)
        model = fit_model(best.kind, train, train_config(cfg), n_jobs=cfg["threads"])
        test = art["test"]
        raw_test = test.with_X(invert_scaler(test.X, art["scaler"]))
        explain_model(model, test, raw_test, cfg, out)
    where = "real data" if best.technique is None else f"{best.technique} augmentation"
    print(f"best model: {best.kind} (iteration {best.iteration}, {where}); median {best.metric} {best.value:.4f}")
    if result.gate_failed:
        print("note: augmentation stopped at a failed fidelity gate: "
              + "; ".join(f"{f['technique']}: {', '.join(f['fidelity']['failures'])}" for f in result.gate_failures))
    return EXIT_OK, True


def _read_curves(path):
    series = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            name, x, y = line.rstrip("\n").rsplit(",", 2)
            xs, ys = series.setdefault(name, ([], []))
            xs.append(float(x))
            ys.append(float(y))
    return series


def cmd_report(args, cfg):
    """Render SVGs for the curve files already in ``--out``."""
    out = cfg["out"]
    if not os.path.isdir(out):
        raise ConfigError(f"report directory not found: {out}")
    if importlib.util.find_spec("matplotlib") is None:
        raise ConfigError("the report command needs matplotlib")
    n = 0
    for nm in sorted(os.listdir(out)):
        stem, ext = os.path.splitext(nm)
        prefix = stem.split("_", 1)[0]
        if ext == ".csv" and prefix in ("ecdf", "kde", "pca", "tsne"):
            kind = "line" if prefix in ("ecdf", "kde") else "scatter"
            n += _svg(os.path.join(out, stem + ".svg"), _read_curves(os.path.join(out, nm)), kind, stem)
        elif nm == "boxplot.csv":
            n += _boxplot_svg(os.path.join(out, nm), os.path.join(out, "boxplot.svg"))
    print(f"rendered {n} SVG files")
    return EXIT_OK, True


def _boxplot_svg(src, dst):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "rareaug"
    groups = {}
    with open(src, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            it, tech, model, c, _, v = line.rstrip("\n").split(",")
            if v:
                groups.setdefault(f"{model}/{tech}/c{c}", []).append(float(v))
    fig, ax = plt.subplots(figsize=(max(5, 0.5 * len(groups)), 4))
    ax.boxplot(list(groups.values()))
    ax.set_xticks(range(1, len(groups) + 1), list(groups), rotation=90, fontsize=6)
    ax.set_ylabel("recall")
    fig.tight_layout()
    fig.savefig(dst, format="svg", metadata={"Date": None})
    plt.close(fig)
    return True


def cmd_generate(args, cfg):
    """Write the synthetic benchmark or the toy generator data set."""
    if args.dataset == "benchmark":
        ds = make_benchmark(BenchmarkSpec(seed=cfg["seed"]))
        write_json(os.path.join(cfg["out"], "benchmark_truth.json"),
                   {"informative": [ds.feature_names[j] for j in ds.informative]})
    else:
        ds = make_toy(seed=cfg["seed"])
    write_csv(ds, os.path.join(cfg["out"], f"{args.dataset}.csv"))
    write_schema_sidecar(ds.columns, os.path.join(cfg["out"], f"{args.dataset}.schema.json"))
    print(f"wrote {ds.row_count} rows to {os.path.join(cfg['out'], args.dataset + '.csv')}")
    return EXIT_OK, True


COMMANDS = {
    "inspect": cmd_inspect, "split": cmd_split, "augment": cmd_augment, "train": cmd_train,
    "evaluate": cmd_evaluate, "fidelity": cmd_fidelity, "pipeline": cmd_pipeline, "explain": cmd_explain,
    "report": cmd_report, "generate": cmd_generate,
}


# ---------------------------------------------------------------------------
# argument handling


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--threads", type=int, help="worker threads for forests and trials")
    common.add_argument("--out", help="output directory")

    def with_input(p):
        p.add_argument("input", nargs="?", help="input CSV (or set `input` in the config)")
        p.add_argument("--schema", help="schema sidecar JSON")
        p.add_argument("--label", help="label column name")
        return p

    parser = argparse.ArgumentParser(prog="rareaug", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"rareaug {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    with_input(sub.add_parser("inspect", parents=[common], help="summarise a dataset"))
    p = with_input(sub.add_parser("split", parents=[common], help="seeded stratified train/test split"))
    p.add_argument("--test-fraction", type=float)

    p = with_input(sub.add_parser("augment", parents=[common], help="generate synthetic minority rows"))
    p.add_argument("--technique", choices=TECHNIQUES, required=True)
    p.add_argument("--checkpoint", help="trained CTGAN checkpoint to sample from")
    p.add_argument("--n-samples", type=int, help="exact number of synthetic rows")

    p = with_input(sub.add_parser("train", parents=[common], help="fit one classifier"))
    p.add_argument("--kind", choices=MODEL_KINDS, required=True)

    p = with_input(sub.add_parser("evaluate", parents=[common], help="score a checkpoint on a dataset"))
    p.add_argument("--model", required=True, help="model checkpoint")

    p = with_input(sub.add_parser("fidelity", parents=[common], help="compare a synthetic CSV with real rows"))
    p.add_argument("--synthetic", required=True, help="synthetic CSV with the same columns")
    p.add_argument("--label-class", type=int, default=1, choices=(0, 1))
    p.add_argument("--all-columns", action="store_true", help="test every feature, not just the gate columns")

    p = with_input(sub.add_parser("pipeline", parents=[common], help="run the augmentation loop"))
    p.add_argument("--models", help="comma-separated subset of rf,dt,lr")
    p.add_argument("--n", type=int, dest="max_techniques", help="maximum augmentation techniques")
    p.add_argument("--trials", type=int, help="training trials per model")
    p.add_argument("--no-explain", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")

    p = with_input(sub.add_parser("explain", parents=[common], help="Shapley importance for a checkpoint"))
    p.add_argument("--model", required=True, help="model checkpoint")

    sub.add_parser("report", parents=[common], help="render SVGs for the curve files in --out")
    p = sub.add_parser("generate", parents=[common], help="write a synthetic data set")
    p.add_argument("dataset", choices=("benchmark", "toy"))

    for sp in sub.choices.values():
        sp.add_argument("--svg", action="store_true", default=None, help="also render SVG plots")
    return parser


def effective_config(args):
    cfg = read_config(args.config)
    for key in ("seed", "threads", "out"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    for key in ("input", "schema", "label"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "test_fraction", None) is not None:
        cfg["split"]["test_fraction"] = args.test_fraction
    if getattr(args, "n_samples", None) is not None:
        cfg["smote"]["n_samples"] = args.n_samples
    if getattr(args, "models", None):
        cfg["pipeline"]["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
    if getattr(args, "max_techniques", None) is not None:
        cfg["pipeline"]["max_techniques"] = args.max_techniques
    if getattr(args, "trials", None) is not None:
        cfg["pipeline"]["n_trials"] = args.trials
    if getattr(args, "no_explain", False):
        cfg["pipeline"]["explain"] = False
    if args.svg:
        cfg["report"]["svg"] = True
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        raise ConfigError("threads must be a positive integer")
    return cfg


def _exit_code(exc):
    code = getattr(exc, "exit_code", EXIT_TRAINING)
    return code if code in (EXIT_CONFIG, EXIT_DATA, EXIT_TRAINING) else EXIT_TRAINING


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        cfg = effective_config(args)
        wants_out = args.command != "inspect" or args.out is not None
        if wants_out:
            os.makedirs(cfg["out"], exist_ok=True)
        code, manifest = COMMANDS[args.command](args, cfg)
        if manifest:
            write_manifest(cfg["out"], args.command, cfg)
        return code
    except RareAugError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # the exit-code contract has no "other" bucket
        print(f"error: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
