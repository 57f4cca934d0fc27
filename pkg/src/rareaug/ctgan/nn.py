"""Small fully connected networks with hand-written backprop and Adam.

Only what the tabular GAN needs: dense layers, a handful of activations,
and a span-wise output head (tanh for scalar spans, Gumbel-softmax for
one-hot spans).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._jit import njit, pick
from ..errors import NumericalError, ShapeError

RELU = "relu"
LEAKY_RELU = "leaky_relu"
TANH = "tanh"
SIGMOID = "sigmoid"
IDENTITY = "identity"
ACTIVATIONS = (RELU, LEAKY_RELU, TANH, SIGMOID, IDENTITY)
LEAK = 0.2


def _act(name, z):
    if name == RELU:
        return np.maximum(z, 0.0)
    if name == LEAKY_RELU:
        return np.where(z > 0, z, LEAK * z)
    if name == TANH:
        return np.tanh(z)
    if name == SIGMOID:
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if name == IDENTITY:
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, z, a, g):
    """Gradient w.r.t. the pre-activation given ``g`` w.r.t. the output."""
    if name == RELU:
        return g * (z > 0)
    if name == LEAKY_RELU:
        return g * np.where(z > 0, 1.0, LEAK)
    if name == TANH:
        return g * (1.0 - a * a)
    if name == SIGMOID:
        return g * a * (1.0 - a)
    return g


@dataclass
class Dense:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray
    activation: str = IDENTITY

    @classmethod
    def init(cls, fan_in, fan_out, activation, rng):
        # U(+-1/sqrt(fan_in)), the torch.nn.Linear default
        bound = 1.0 / np.sqrt(fan_in)
        return cls(rng.uniform(-bound, bound, (fan_in, fan_out)), rng.uniform(-bound, bound, fan_out), activation)


class Mlp:
    """Chain of dense layers. ``forward`` returns the output and a cache
    that ``backward`` consumes."""

    def __init__(self, layers):
        self.layers = list(layers)
        for a, b in zip(self.layers, self.layers[1:]):
            if a.W.shape[1] != b.W.shape[0]:
                raise ShapeError("layer dimensions do not chain")

    @classmethod
    def build(cls, sizes, hidden_activation, output_activation, rng):
        layers = []
        for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
            act = output_activation if i == len(sizes) - 2 else hidden_activation
            layers.append(Dense.init(a, b, act, rng))
        return cls(layers)

    @property
    def in_dim(self):
        return self.layers[0].W.shape[0]

    @property
    def out_dim(self):
        return self.layers[-1].W.shape[1]

    def params(self):
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"expected input width {self.in_dim}, got shape {x.shape}")
        cache = []
        a = x
        for layer in self.layers:
            z = a @ layer.W + layer.b
            out = _act(layer.activation, z)
            cache.append((a, z, out))
            a = out
        if not np.all(np.isfinite(a)):
            raise NumericalError("non-finite activations in forward pass")
        return a, cache

    def backward(self, cache, grad_out, need_param_grads=True):
        """Returns ``(param_grads, grad_input)`` with grads ordered as
        ``params()``. ``need_param_grads=False`` only propagates to the
        input (param_grads is then empty)."""
        g = np.asarray(grad_out, dtype=np.float64)
        grads = []
        for layer, (a_in, z, out) in zip(reversed(self.layers), reversed(cache)):
            gz = _act_grad(layer.activation, z, out, g)
            if need_param_grads:
                grads.append(gz.sum(axis=0))
                grads.append(a_in.T @ gz)
            g = gz @ layer.W.T
        grads.reverse()
        return grads, g

    def to_dict(self):
        return [{"W": l.W.tolist(), "b": l.b.tolist(), "activation": l.activation} for l in self.layers]

    @classmethod
    def from_dict(cls, d):
        return cls([Dense(np.asarray(l["W"], float), np.asarray(l["b"], float), l["activation"]) for l in d])


def backprop(network: Mlp, inputs, grad_output):
    """Parameter gradients of ``sum(grad_output * network(inputs))``."""
    _, cache = network.forward(inputs)
    grads, _ = network.backward(cache, grad_output)
    return grads


# -- output head --------------------------------------------------------------


def softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


class OutputHead:
    """Per-span activations on the generator's raw output.

    ``spans`` is a list of ``(start, width, kind)`` with kind ``"tanh"`` or
    ``"softmax"``. Softmax spans use Gumbel-softmax with temperature
    ``tau``; ``hard=True`` emits one-hot argmax values while the backward
    pass still uses the soft sample (straight-through). Spans of equal
    width are processed together.
    """

    def __init__(self, spans, tau=0.2):
        self.spans = [(int(s), int(w), k) for s, w, k in spans]
        self.tau = float(tau)
        self.width = sum(w for _, w, _ in self.spans)
        self.tanh_idx = np.array([s for s, w, k in self.spans if k == "tanh" for s in range(s, s + w)], dtype=np.int64)
        groups = {}
        for s, w, k in self.spans:
            if k != "tanh":
                groups.setdefault(w, []).append(s)
        # (width, index matrix of shape (n_spans, width))
        self.groups = [(w, np.asarray(st, dtype=np.int64)[:, None] + np.arange(w)) for w, st in sorted(groups.items())]

    def forward(self, logits, rng=None, hard=False, noise=None):
        out = np.empty_like(logits)
        out[:, self.tanh_idx] = np.tanh(logits[:, self.tanh_idx])
        soft_parts = {}
        for w, idx in self.groups:
            block = logits[:, idx]  # (n, spans, w)
            if noise is not None:
                g = noise[:, idx]
            elif rng is not None:
                g = -np.log(-np.log(rng.uniform(1e-12, 1.0, block.shape)))
            else:
                g = 0.0
            y = softmax((block + g) / self.tau)
            soft_parts[w] = y
            if hard:
                y = np.eye(w)[np.argmax(y, axis=-1)]
            out[:, idx] = y
        return out, soft_parts

    def backward(self, logits, out, soft_parts, grad_out):
        g = np.empty_like(grad_out)
        a = out[:, self.tanh_idx]
        g[:, self.tanh_idx] = grad_out[:, self.tanh_idx] * (1.0 - a * a)
        for w, idx in self.groups:
            y = soft_parts[w]
            go = grad_out[:, idx]
            g[:, idx] = y * (go - np.sum(go * y, axis=-1, keepdims=True)) / self.tau
        return g


# -- Adam ---------------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def for_params(cls, params, lr=2e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], lr, beta1, beta2, eps)


@njit
def _adam_nb(p, g, m, v, lr, b1, b2, c1, c2, eps):
    for i in range(p.shape[0]):
        mi = b1 * m[i] + (1.0 - b1) * g[i]
        vi = b2 * v[i] + (1.0 - b2) * g[i] * g[i]
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)


def _adam_np(p, g, m, v, lr, b1, b2, c1, c2, eps):
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


_adam_kernel = pick(_adam_nb, _adam_np)


def adam_step(params, grads, state: AdamState):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimiser state differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        # flat views; parameters and moments are C-contiguous
        _adam_kernel(p.reshape(-1), np.ascontiguousarray(g, dtype=np.float64).reshape(-1), m.reshape(-1),
                     v.reshape(-1), state.lr, b1, b2, c1, c2, state.eps)
    return params, state
