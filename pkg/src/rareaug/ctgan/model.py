"""Conditional tabular GAN: training-by-sampling, MLP generator and
discriminator, non-saturating losses with one-sided label smoothing."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from ..data import CONTINUOUS, ColumnSchema, TabularDataset
from ..errors import ConfigError, DomainError, NumericalError, SchemaError
from ..smote import CTGAN, SyntheticBatch
from .layout import LABEL_INDEX, EncodedLayout
from .nn import LEAKY_RELU, RELU, IDENTITY, AdamState, Mlp, OutputHead, adam_step, softmax
from .normalizer import GmmNormalizer, fit_normalizer

REAL_TARGET = 0.9
CHECKPOINT_FORMAT = "rareaug-ctgan"
CHECKPOINT_VERSION = 1


@dataclass
class CtganConfig:
    latent_dim: int = 128
    hidden: tuple = (256, 256)
    batch_size: int = 500
    epochs: int = 300
    tau: float = 0.2
    learning_rate: float = 2e-4
    adam_betas: tuple = (0.5, 0.9)
    pac: int = 10  # rows packed into one discriminator input
    straight_through: bool = True  # hard one-hots forward, soft gradients back
    ema_decay: float | None = 0.995  # generator weights are replaced by their running average
    condition_columns: tuple | None = None  # None: every discrete column plus the label
    seed: int = 0
    max_modes: int = 5
    em_iters: int = 100
    normalizer_rows: int | None = 4000  # subsample cap for the mixture fits
    steps_per_epoch: int | None = None  # None: rows // batch_size

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.adam_betas = tuple(float(b) for b in self.adam_betas)
        if self.condition_columns is not None:
            self.condition_columns = tuple(self.condition_columns)
        if int(self.batch_size) < 2:
            raise ConfigError("batch_size must be at least 2")
        if int(self.pac) < 1 or int(self.batch_size) % int(self.pac):
            raise ConfigError("pac must be positive and divide batch_size")
        if self.ema_decay is not None and not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError("ema_decay must lie in [0, 1)")
        if int(self.epochs) < 1:
            raise ConfigError("epochs must be at least 1")
        if int(self.latent_dim) < 1 or any(h < 1 for h in self.hidden):
            raise ConfigError("latent_dim and hidden widths must be positive")
        if not (self.tau > 0 and self.learning_rate > 0):
            raise ConfigError("tau and learning_rate must be positive")


class ConditionSampler:
    """Condition vector bookkeeping and training-by-sampling.

    A condition picks one discrete column uniformly, then one of its
    categories with probability proportional to ``log(1 + count)``.
    """

    def __init__(self, layout: EncodedLayout, names, counts):
        self.names = list(names)
        self.spans = [layout.span(n) for n in self.names]
        self.sizes = np.array([s.width for s in self.spans])
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)
        self.width = int(self.sizes.sum())
        self.counts = [np.asarray(c, dtype=np.float64) for c in counts]
        k = int(self.sizes.max())
        self.log_cdf = np.ones((len(self.names), k))
        self.freq_cdf = np.ones((len(self.names), k))
        for i, c in enumerate(self.counts):
            lp = np.log1p(c)
            self.log_cdf[i, :len(c)] = np.cumsum(lp / lp.sum())
            self.freq_cdf[i, :len(c)] = np.cumsum(c / c.sum())
        self.rows = None

    def index_rows(self, X, y):
        """Row lists per (column, category) for matching real rows."""
        groups = []
        for span in self.spans:
            codes = y if span.source == LABEL_INDEX else X[:, span.source].astype(np.int64)
            for cat in range(span.width):
                groups.append(np.flatnonzero(codes == cat))
        self.starts = np.concatenate([[0], np.cumsum([len(g) for g in groups])[:-1]]).astype(np.int64)
        self.lengths = np.array([len(g) for g in groups], dtype=np.int64)
        self.rows = np.concatenate(groups).astype(np.int64)

    def draw(self, n, rng, by_log=True):
        col = rng.integers(0, len(self.names), size=n)
        cdf = (self.log_cdf if by_log else self.freq_cdf)[col]
        u = rng.random(n)
        cat = (u[:, None] > cdf).sum(axis=1)
        cat = np.minimum(cat, self.sizes[col] - 1)
        return col, cat

    def vector(self, col, cat):
        C = np.zeros((len(col), self.width))
        C[np.arange(len(col)), self.offsets[col] + cat] = 1.0
        return C

    def real_rows(self, col, cat, rng):
        g = self.offsets[col] + cat
        return self.rows[self.starts[g] + (rng.random(len(g)) * self.lengths[g]).astype(np.int64)]


@dataclass
class CtganModel:
    columns: tuple
    layout: EncodedLayout
    generator: Mlp
    discriminator: Mlp
    config: CtganConfig
    conditions: ConditionSampler
    log: dict = field(default_factory=lambda: {"epoch": [], "d_loss": [], "g_loss": []})

    @cached_property
    def head(self):
        return OutputHead(self.layout.head_spans(), self.config.tau)

    # -- checkpoint -----------------------------------------------------
    def to_dict(self):
        cfg = asdict(self.config)
        cfg["hidden"] = list(cfg["hidden"])
        cfg["adam_betas"] = list(cfg["adam_betas"])
        cfg["condition_columns"] = list(self.conditions.names)
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": cfg,
            "columns": [{"name": c.name, **c.to_dict()} for c in self.columns],
            "normalizers": {k: v.to_dict() for k, v in self.layout.normalizers.items()},
            "condition_counts": [c.tolist() for c in self.conditions.counts],
            "generator": self.generator.to_dict(),
            "discriminator": self.discriminator.to_dict(),
            "log": self.log,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != CHECKPOINT_FORMAT or d.get("version") != CHECKPOINT_VERSION:
            raise SchemaError("not a supported CTGAN checkpoint")
        columns = tuple(ColumnSchema.from_dict(c["name"], {k: v for k, v in c.items() if k != "name"})
                        for c in d["columns"])
        norms = {k: GmmNormalizer.from_dict(v) for k, v in d["normalizers"].items()}
        layout = EncodedLayout(columns, norms)
        cfg = CtganConfig(**d["config"])
        cond = ConditionSampler(layout, cfg.condition_columns, d["condition_counts"])
        return cls(columns, layout, Mlp.from_dict(d["generator"]), Mlp.from_dict(d["discriminator"]),
                   cfg, cond, d.get("log", {}))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def write_loss_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "d_loss", "g_loss"])
            for row in zip(self.log["epoch"], self.log["d_loss"], self.log["g_loss"]):
                w.writerow([row[0], repr(row[1]), repr(row[2])])


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _condition_names(train: TabularDataset, cfg: CtganConfig):
    discrete = [c.name for c in train.feature_columns if c.kind.kind != CONTINUOUS]
    label = train.label_column.name
    if cfg.condition_columns is None:
        return discrete + [label]
    allowed = set(discrete) | {label}
    for name in cfg.condition_columns:
        if name not in allowed:
            raise ConfigError(f"condition column {name!r} is not a discrete column")
    if not cfg.condition_columns:
        raise ConfigError("need at least one condition column")
    return list(cfg.condition_columns)


def build_model(train: TabularDataset, cfg: CtganConfig) -> CtganModel:
    """Fit the normalisers and initialise both networks (no training)."""
    if train.row_count == 0:
        raise DomainError("cannot train a GAN on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    norms = {}
    for j, col in enumerate(train.feature_columns):
        if col.kind.kind == CONTINUOUS:
            norms[col.name] = fit_normalizer(train.X[:, j], cfg.max_modes, cfg.em_iters, cfg.seed, cfg.normalizer_rows)
    layout = EncodedLayout(train.columns, norms)
    names = _condition_names(train, cfg)
    counts = []
    for name in names:
        span = layout.span(name)
        codes = train.y if span.source == LABEL_INDEX else train.X[:, span.source].astype(np.int64)
        counts.append(np.bincount(codes, minlength=span.width)[: span.width])
    cond = ConditionSampler(layout, names, counts)
    g = Mlp.build([cfg.latent_dim + cond.width, *cfg.hidden, layout.width], RELU, IDENTITY, rng)
    d = Mlp.build([cfg.pac * (layout.width + cond.width), *cfg.hidden, 1], LEAKY_RELU, IDENTITY, rng)
    return CtganModel(tuple(train.columns), layout, g, d, cfg, cond)


def _pack(A, pac):
    """Concatenate consecutive groups of ``pac`` rows side by side."""
    return A.reshape(A.shape[0] // pac, -1)


def _generate(model: CtganModel, C, rng, hard=False):
    z = rng.standard_normal((C.shape[0], model.config.latent_dim))
    logits, cache = model.generator.forward(np.hstack([z, C]))
    out, soft = model.head.forward(logits, rng=rng, hard=hard)
    return out, logits, cache, soft


def _condition_ce_grad(model, logits, col, cat):
    """Cross-entropy of the generator's raw logits on each row's condition
    column against the requested category; returns (loss, dlogits)."""
    n = logits.shape[0]
    grad = np.zeros_like(logits)
    loss = 0.0
    for i, span in enumerate(model.conditions.spans):
        rows = np.flatnonzero(col == i)
        if rows.size == 0:
            continue
        block = logits[rows, span.start:span.start + span.width]
        p = softmax(block)
        target = cat[rows]
        loss -= float(np.sum(np.log(np.maximum(p[np.arange(rows.size), target], 1e-300))))
        p[np.arange(rows.size), target] -= 1.0
        grad[rows, span.start:span.start + span.width] = p / n
    return loss / n, grad


def discriminator_loss_grad(D: Mlp, real_in, fake_in):
    """Smoothed non-saturating discriminator loss on packed real and fake
    inputs, and its gradients w.r.t. ``D.params()``."""
    nb = real_in.shape[0]
    s, dcache = D.forward(np.vstack([real_in, fake_in]))
    s_r, s_f = s[:nb, 0], s[nb:, 0]
    loss = float(np.mean(REAL_TARGET * _softplus(-s_r) + (1 - REAL_TARGET) * _softplus(s_r))
                 + np.mean(_softplus(s_f)))
    ds = np.concatenate([(_sigmoid(s_r) - REAL_TARGET) / nb, _sigmoid(s_f) / fake_in.shape[0]])[:, None]
    grads, _ = D.backward(dcache, ds)
    return loss, grads


def generator_loss_grad(model: CtganModel, z, C, col, cat, rng=None, hard=False, noise=None):
    """Generator loss ``mean softplus(-D(fake)) + condition cross-entropy``
    and its gradients w.r.t. ``model.generator.params()``; the
    discriminator is held fixed. ``noise`` fixes the Gumbel draws."""
    G, D, head = model.generator, model.discriminator, model.head
    pac = int(model.config.pac)
    logits, gcache = G.forward(np.hstack([z, C]))
    fake, soft = head.forward(logits, rng=rng, hard=hard, noise=noise)
    s, dcache = D.forward(_pack(np.hstack([fake, C]), pac))
    s = s[:, 0]
    ce, dlogits_ce = _condition_ce_grad(model, logits, col, cat)
    loss = float(np.mean(_softplus(-s))) + ce
    _, dx = D.backward(dcache, ((_sigmoid(s) - 1.0) / s.shape[0])[:, None], need_param_grads=False)
    dx = dx.reshape(z.shape[0], -1)
    dlogits = head.backward(logits, fake, soft, dx[:, :model.layout.width]) + dlogits_ce
    grads, _ = G.backward(gcache, dlogits)
    return loss, grads


def train_ctgan(train: TabularDataset, cfg: CtganConfig | None = None, model: CtganModel | None = None) -> CtganModel:
    """Adversarial training; returns the fitted model with per-epoch mean
    losses in ``model.log``.

    Each step draws conditions by training-by-sampling, real rows matching
    them, and performs one discriminator and one generator Adam update. The
    discriminator scores packs of ``cfg.pac`` rows at a time. With
    ``cfg.ema_decay`` set, the returned generator holds the exponential
    moving average of its weights over all updates.
    """
    cfg = cfg or CtganConfig()
    model = model or build_model(train, cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    E_real = model.layout.encode_dataset(train, rng)
    cond = model.conditions
    cond.index_rows(train.X, train.y)
    B = int(cfg.batch_size)
    steps = cfg.steps_per_epoch or max(1, train.row_count // B)
    G, D = model.generator, model.discriminator
    g_opt = AdamState.for_params(G.params(), cfg.learning_rate, *cfg.adam_betas)
    d_opt = AdamState.for_params(D.params(), cfg.learning_rate, *cfg.adam_betas)
    pac = int(cfg.pac)
    hard = bool(cfg.straight_through)
    ema = [q.copy() for q in G.params()] if cfg.ema_decay else None

    for epoch in range(int(cfg.epochs)):
        d_sum = g_sum = 0.0
        for _ in range(steps):
            # discriminator update on real and generated rows together
            col, cat = cond.draw(B, rng)
            C = cond.vector(col, cat)
            real = E_real[cond.real_rows(col, cat, rng)]
            fake, _, _, _ = _generate(model, C, rng, hard)
            d_loss, d_grads = discriminator_loss_grad(D, _pack(np.hstack([real, C]), pac),
                                                      _pack(np.hstack([fake, C]), pac))
            if not math.isfinite(d_loss):
                raise NumericalError(f"discriminator loss became {d_loss} in epoch {epoch}")
            adam_step(D.params(), d_grads, d_opt)

            # generator update through the frozen discriminator
            col, cat = cond.draw(B, rng)
            C = cond.vector(col, cat)
            z = rng.standard_normal((B, cfg.latent_dim))
            g_loss, g_grads = generator_loss_grad(model, z, C, col, cat, rng=rng, hard=hard)
            adam_step(G.params(), g_grads, g_opt)
            if ema is not None:
                for e, q in zip(ema, G.params()):
                    e *= cfg.ema_decay
                    e += (1.0 - cfg.ema_decay) * q
            d_sum += d_loss
            g_sum += g_loss
        model.log["epoch"].append(epoch)
        model.log["d_loss"].append(d_sum / steps)
        model.log["g_loss"].append(g_sum / steps)
    if ema is not None:
        for q, e in zip(G.params(), ema):
            q[...] = e
    return model


def sample(model: CtganModel, n, condition=None, seed=None) -> SyntheticBatch:
    """Draw ``n`` decoded rows.

    ``condition`` is ``(column name, category)``. Conditioning on the label
    hard-sets the emitted labels to that category; the share of rows whose
    decoded value already matched is kept as ``extra["condition_match"]``.
    """
    seed = model.config.seed + 1 if seed is None else int(seed)
    rng = np.random.default_rng([seed, 2])
    cond = model.conditions
    n = int(n)
    if n < 0:
        raise ConfigError("n must be non-negative")
    if condition is not None:
        name, category = condition
        if name not in cond.names:
            raise ConfigError(f"{name!r} is not a condition column; choose from {cond.names}")
        i = cond.names.index(name)
        if not 0 <= int(category) < cond.sizes[i]:
            raise ConfigError(f"category {category} out of range for {name!r}")
        col = np.full(n, i)
        cat = np.full(n, int(category))
    else:
        col, cat = cond.draw(n, rng, by_log=False)
    p = model.layout.n_features
    if n == 0:
        return SyntheticBatch(np.empty((0, p)), np.empty(0, np.int64), CTGAN, seed,
                              extra={"condition": None if condition is None else list(condition)})
    out, _, _, _ = _generate(model, cond.vector(col, cat), rng, hard=True)
    X, y = model.layout.decode(out)
    extra = {"condition": None if condition is None else [condition[0], int(condition[1])]}
    if condition is not None:
        span = cond.spans[col[0]]
        got = y if span.source == LABEL_INDEX else X[:, span.source].astype(np.int64)
        extra["condition_match"] = float(np.mean(got == cat))
        if span.source == LABEL_INDEX:
            y = np.full(n, int(condition[1]), dtype=np.int64)
    return SyntheticBatch(X, y, CTGAN, seed, extra=extra)


def discriminator_accuracy(model: CtganModel, real: TabularDataset, n=1000, seed=0):
    """Share of correctly classified packs for a balanced mix of real and
    freshly generated rows (threshold at logit 0). ``n`` is rounded down to
    a multiple of the pack size."""
    rng = np.random.default_rng([seed, 3])
    pac = int(model.config.pac)
    n = max(pac, int(n) // pac * pac)
    cond = model.conditions
    cond.index_rows(real.X, real.y)
    col, cat = cond.draw(n, rng)
    C = cond.vector(col, cat)
    E_real = model.layout.encode(real.X, real.y, rng)[cond.real_rows(col, cat, rng)]
    fake, _, _, _ = _generate(model, C, rng, model.config.straight_through)
    s_r, _ = model.discriminator.forward(_pack(np.hstack([E_real, C]), pac))
    s_f, _ = model.discriminator.forward(_pack(np.hstack([fake, C]), pac))
    return 0.5 * (float(np.mean(s_r > 0)) + float(np.mean(s_f < 0)))
