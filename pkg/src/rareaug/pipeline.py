"""Iterative train / evaluate / augment loop with a fidelity gate, the
repeated-trials protocol and best-model selection."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import LassoConfig, fit_lasso_logistic, lambda_max
from .classifiers import MODEL_KINDS, TrainConfig, fit_model
from .ctgan import CtganConfig, sample, train_ctgan
from .data import CONTINUOUS, LABEL, TabularDataset, apply_scaler, fit_scaler, split
from .errors import ConfigError, SelectionError, TrainingError
from .fidelity import StructureThresholds, structure_check
from .metrics import evaluate
from .smote import CTGAN, SMOTE, TARGET_RATIO, SmoteConfig, generate_smote, target_count

RESULT_FORMAT = "rareaug-pipeline"
RESULT_VERSION = 1

METRICS = ("recall_class1", "f1_class1", "accuracy")
# every metric stored per trial
TRACKED = ("recall_class0", "recall_class1", "precision_class0", "precision_class1",
           "f1_class0", "f1_class1", "accuracy")
TECHNIQUES = (SMOTE, CTGAN)
CTGAN_ROWS = ("minority", "all")
LASSO_GATE = "lasso"


@dataclass
class PipelineConfig:
    techniques: tuple = (SMOTE, CTGAN)
    max_techniques: int = 2
    metric: str = "recall_class1"
    models: tuple = MODEL_KINDS
    n_trials: int = 25
    seed: int = 0
    test_fraction: float = 0.3
    imbalance_threshold: float = 0.5
    target_ratio: float = TARGET_RATIO
    train: TrainConfig = field(default_factory=TrainConfig)
    smote_k: int = 5
    smote_categorical_policy: str = "copy_from_base"
    ctgan: CtganConfig = field(default_factory=CtganConfig)
    thresholds: StructureThresholds = field(default_factory=StructureThresholds)
    ctgan_rows: str = "minority"  # "minority": train on minority rows only; "all": label-conditioned on every row
    gate_columns: tuple | str | None = "lasso"  # None: all features; "lasso": top Lasso features plus discrete ones
    gate_lasso_k: int = 3
    gate_lasso_ratio: float = 0.01  # Lasso penalty as a fraction of lambda_max
    n_jobs: int = 1

    def __post_init__(self):
        self.techniques = tuple(self.techniques)
        self.models = tuple(self.models)
        for t in self.techniques:
            if t not in TECHNIQUES:
                raise ConfigError(f"unknown technique {t!r}; expected one of {TECHNIQUES}")
        if not 0 <= int(self.max_techniques) <= len(self.techniques):
            raise ConfigError("max_techniques must lie in [0, len(techniques)]")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if not self.models:
            raise ConfigError("model set must not be empty")
        for m in self.models:
            if m not in MODEL_KINDS:
                raise ConfigError(f"unknown model {m!r}; expected a subset of {MODEL_KINDS}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("model set lists a model twice")
        if int(self.n_trials) < 1:
            raise ConfigError("n_trials must be positive")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ConfigError("target_ratio must lie in (0, 1]")
        if self.ctgan_rows not in CTGAN_ROWS:
            raise ConfigError(f"ctgan_rows must be one of {CTGAN_ROWS}")
        if isinstance(self.gate_columns, str):
            if self.gate_columns != LASSO_GATE:
                raise ConfigError(f"gate_columns must be null, a list of names or {LASSO_GATE!r}")
        elif self.gate_columns is not None:
            self.gate_columns = tuple(self.gate_columns)
        if int(self.gate_lasso_k) < 1 or not 0.0 < self.gate_lasso_ratio <= 1.0:
            raise ConfigError("gate_lasso_k must be positive and gate_lasso_ratio in (0, 1]")

    def to_dict(self):
        d = asdict(self)
        for k, v in list(d.items()):
            if isinstance(v, tuple):
                d[k] = list(v)
        d["ctgan"]["hidden"] = list(d["ctgan"]["hidden"])
        d["ctgan"]["adam_betas"] = list(d["ctgan"]["adam_betas"])
        if d["ctgan"]["condition_columns"] is not None:
            d["ctgan"]["condition_columns"] = list(d["ctgan"]["condition_columns"])
        return d


@dataclass
class PipelineState:
    i: int = 0
    best_performance: dict = field(default_factory=dict)
    train: TabularDataset | None = None


@dataclass
class IterationRecord:
    iteration: int
    technique: str | None
    fidelity: dict | None
    models: dict  # kind -> metric -> {"values": [...], quantiles}
    class_counts: tuple
    n_synthetic: int = 0
    improved: dict = field(default_factory=dict)

    def median(self, kind, metric):
        return self.models[kind][metric]["median"]

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "technique": self.technique,
            "fidelity": self.fidelity,
            "class_counts": list(self.class_counts),
            "n_synthetic": self.n_synthetic,
            "improved": self.improved,
            "models": self.models,
        }


@dataclass
class BestModel:
    kind: str
    iteration: int
    technique: str | None
    metric: str
    value: float

    def to_dict(self):
        return asdict(self)


@dataclass
class PipelineResult:
    records: list
    best_model: BestModel
    config: dict
    gate_failed: bool = False
    gate_failures: list = field(default_factory=list)
    split: dict = field(default_factory=dict)
    # in-memory only: scaled train/test sets, scaler, synthetic batches
    artifacts: dict = field(default_factory=dict, repr=False)

    def record(self, technique):
        for r in self.records:
            if r.technique == technique:
                return r
        return None

    def to_dict(self):
        return {
            "format": RESULT_FORMAT,
            "version": RESULT_VERSION,
            "config": self.config,
            "split": self.split,
            "gate_failed": self.gate_failed,
            "gate_failures": self.gate_failures,
            "best_model": self.best_model.to_dict(),
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    def write_json(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    def write_boxplot_csv(self, path, metric="recall"):
        """One row per (iteration, model, class, trial)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "technique", "model", "class", "trial", metric])
            for r in self.records:
                for kind in r.models:
                    for c in (0, 1):
                        for t, v in enumerate(r.models[kind][f"{metric}_class{c}"]["values"]):
                            w.writerow([r.iteration, r.technique or "real", kind, c, t, "" if v is None else repr(v)])


# -- helpers ------------------------------------------------------------------


def trial_seed(seed, iteration, trial):
    return int(np.random.SeedSequence([int(seed), int(iteration), int(trial)]).generate_state(1)[0])


def _quantiles(values):
    """min / quartiles / max by linear interpolation over defined values."""
    vals = np.array([v for v in values if v is not None], dtype=np.float64)
    out = {"values": list(values), "n_defined": int(vals.size)}
    if vals.size == 0:
        out.update(min=None, q1=None, median=None, q3=None, max=None)
        return out
    q = np.quantile(vals, [0.0, 0.25, 0.5, 0.75, 1.0])
    out.update(min=float(q[0]), q1=float(q[1]), median=float(q[2]), q3=float(q[3]), max=float(q[4]))
    return out


def evaluate_models(train: TabularDataset, test: TabularDataset, models=MODEL_KINDS, cfg: TrainConfig | None = None,
                    n_trials=25, seed=0, iteration=0, n_jobs=1):
    """Train each model ``n_trials`` times and score it on ``test``.

    Trial ``t`` trains with seed ``trial_seed(seed, iteration, t)``.
    Models whose fit does not depend on the seed are fitted once and the
    result repeated across trials.
    """
    cfg = cfg or TrainConfig()
    n0, n1 = train.class_counts()
    if n0 == 0 or n1 == 0:
        raise TrainingError("training set lacks one of the classes")
    out = {}
    for kind in models:
        summaries = []
        fixed = None
        for t in range(int(n_trials)):
            if fixed is not None:
                summaries.append(fixed)
                continue
            tc = TrainConfig(**{**asdict(cfg), "seed": trial_seed(seed, iteration, t)})
            model = fit_model(kind, train, tc, n_jobs=n_jobs)
            s = evaluate(model.predict(test.X), test.y)
            if not model.stochastic:
                fixed = s
            summaries.append(s)
        out[kind] = {m: _quantiles([s.get(m) for s in summaries]) for m in TRACKED}
    return out


def imbalance_test(train: TabularDataset, threshold_ratio=0.5):
    """True when minority/majority is below ``threshold_ratio``."""
    n0, n1 = train.class_counts()
    if n0 == 0 or n1 == 0:
        warnings.warn("training data holds a single class; treating it as imbalanced", stacklevel=2)
        return True
    return min(n0, n1) / max(n0, n1) < threshold_ratio


def train_generator(real_train: TabularDataset, cfg: PipelineConfig, seed, minority_label=1):
    """CTGAN fitted on the minority rows, or on every row when
    ``cfg.ctgan_rows == "all"``."""
    gc = CtganConfig(**{**asdict(cfg.ctgan), "seed": seed})
    if cfg.ctgan_rows == "minority":
        return train_ctgan(real_train.subset(np.flatnonzero(real_train.y == minority_label)), gc)
    return train_ctgan(real_train, gc)


def generator_batch(model, count, cfg: PipelineConfig, seed, minority_label=1):
    """``count`` minority rows from a generator made by ``train_generator``."""
    if cfg.ctgan_rows == "minority":
        batch = sample(model, count, seed=seed)
        batch.y = np.full(int(count), minority_label, dtype=np.int64)
        return batch
    label = next(c.name for c in model.columns if c.role == LABEL)
    return sample(model, count, condition=(label, minority_label), seed=seed)


def augment(real_train: TabularDataset, technique, cfg: PipelineConfig, seed, minority_label=1, count=None):
    """Synthetic minority rows bringing ``real_train`` to ``cfg.target_ratio``
    (or exactly ``count`` rows when given)."""
    idx = np.flatnonzero(real_train.y == minority_label)
    if count is None:
        count = target_count(len(idx), real_train.row_count - len(idx), cfg.target_ratio)
    if count <= 0:
        return None
    if technique == SMOTE:
        sc = SmoteConfig(count, cfg.smote_k, seed, cfg.smote_categorical_policy)
        return generate_smote(real_train.X[idx], real_train.feature_columns, sc, minority_label, real_train.row_ids[idx])
    if technique == CTGAN:
        model = train_generator(real_train, cfg, seed, minority_label)
        return generator_batch(model, count, cfg, seed, minority_label)
    raise ConfigError(f"unknown technique {technique!r}")


def resolve_gate_columns(train: TabularDataset, cfg: PipelineConfig):
    """Feature names the structure check looks at.

    With the ``"lasso"`` setting these are the ``gate_lasso_k`` continuous
    features with the largest L1-logistic coefficients on the training
    set, plus every discrete feature.
    """
    if cfg.gate_columns is None:
        return None
    if cfg.gate_columns != LASSO_GATE:
        unknown = set(cfg.gate_columns) - set(train.feature_names)
        if unknown:
            raise ConfigError(f"gate columns not in the data: {sorted(unknown)}")
        return tuple(cfg.gate_columns)
    lam = cfg.gate_lasso_ratio * lambda_max(train)
    sel = fit_lasso_logistic(train, LassoConfig(lam, seed=cfg.seed))
    cont = {c.name for c in train.feature_columns if c.kind.kind == CONTINUOUS}
    top = [nm for nm in sel.selected if nm in cont][: int(cfg.gate_lasso_k)]
    discrete = [c.name for c in train.feature_columns if c.kind.kind != CONTINUOUS]
    return tuple(top + discrete)


_ORDER = {k: i for i, k in enumerate(MODEL_KINDS)}


def _neg(v):
    return float("inf") if v is None else -v


def select_best(records, metric="recall_class1", models=None) -> BestModel:
    """Best (model, iteration) by median ``metric``.

    Ties go to the higher class-1 precision median, then the higher
    class-0 recall median, then model order rf, dt, lr, then the earliest
    iteration.
    """
    cands = []
    for r in records:
        for kind in r.models:
            if models is not None and kind not in models:
                continue
            v = r.median(kind, metric)
            if v is None:
                continue
            key = (-v, _neg(r.median(kind, "precision_class1")), _neg(r.median(kind, "recall_class0")),
                   _ORDER[kind], r.iteration)
            cands.append((key, r, kind, v))
    if not cands:
        raise SelectionError(f"no model has a defined {metric}")
    _, r, kind, v = min(cands, key=lambda c: c[0])
    return BestModel(kind, r.iteration, r.technique, metric, v)


def run_pipeline(dataset: TabularDataset, cfg: PipelineConfig | None = None, log=None) -> PipelineResult:
    """Run the augmentation loop.

    The data is split once and the scaler fitted on the training part.
    Each pass trains and scores every model on the current training set
    and updates each model's best median. The loop then stops when the
    pass counter has reached ``max_techniques`` or the current training
    set is no longer imbalanced; otherwise the next technique augments the
    real training set (never a previously augmented one) and the batch
    must pass the structure check. A failed check ends the loop, keeping
    the records gathered so far.
    """
    cfg = cfg or PipelineConfig()
    log = log or (lambda msg: None)
    pair = split(dataset, cfg.test_fraction, cfg.seed)
    scaler = fit_scaler(pair.train)
    real_train = apply_scaler(pair.train, scaler)
    test = apply_scaler(pair.test, scaler)
    state = PipelineState(0, {k: None for k in cfg.models}, real_train)
    gate_columns = resolve_gate_columns(real_train, cfg)
    records, failures, batches = [], [], {}
    technique, report, n_syn = None, None, 0
    n = int(cfg.max_techniques)
    while state.i <= n:
        log(f"iteration {state.i}: evaluating {'real' if technique is None else technique} training set")
        perf = evaluate_models(state.train, test, cfg.models, cfg.train, cfg.n_trials, cfg.seed, state.i, cfg.n_jobs)
        rec = IterationRecord(state.i, technique, report, perf, state.train.class_counts(), n_syn)
        for kind in cfg.models:
            cur = rec.median(kind, cfg.metric)
            prev = state.best_performance[kind]
            rec.improved[kind] = cur is not None and (prev is None or cur > prev)
            if rec.improved[kind]:
                state.best_performance[kind] = cur
        records.append(rec)
        if state.i == n or not imbalance_test(state.train, cfg.imbalance_threshold):
            break
        technique = cfg.techniques[state.i]
        seed = trial_seed(cfg.seed, state.i, 1_000_003)
        log(f"iteration {state.i}: augmenting with {technique}")
        batch = augment(real_train, technique, cfg, seed)
        if batch is None:
            break
        batches[technique] = batch
        fid = structure_check(real_train, batch, cfg.thresholds, label=1, columns=gate_columns)
        report = fid.to_dict()
        if not fid.passed:
            log(f"iteration {state.i}: {technique} failed the structure check: {fid.failures()}")
            failures.append({"iteration": state.i, "technique": technique, "fidelity": report})
            break
        n_syn = batch.n_rows
        state.train = real_train.append(batch.X, batch.y)
        state.i += 1
    best = select_best(records, cfg.metric, cfg.models)
    split_info = {"gate_columns": None if gate_columns is None else list(gate_columns), "seed": cfg.seed, "test_fraction": cfg.test_fraction,
                  "train_counts": list(pair.train.class_counts()), "test_counts": list(pair.test.class_counts())}
    artifacts = {"train": real_train, "test": test, "scaler": scaler, "batches": batches}
    return PipelineResult(records, best, cfg.to_dict(), bool(failures), failures, split_info, artifacts)
