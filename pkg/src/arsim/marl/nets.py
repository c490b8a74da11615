"""Small fully connected networks with hand-written backpropagation."""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

from ..errors import InputError, NumericError

ACTIVATIONS = ("tanh", "relu", "linear")
CHECKPOINT_VERSION = 1


def _act(kind, z):
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(kind, z, a):
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "relu":
        return (z > 0).astype(z.dtype)
    return np.ones_like(z)


class NeuralNet:
    """Affine layers; ``activation`` on hidden layers, identity on output."""

    def __init__(self, sizes, activation="tanh", rng=None, params=None, dtype=np.float64):
        if len(sizes) < 2:
            raise InputError("a network needs at least input and output sizes")
        if activation not in ACTIVATIONS:
            raise InputError(f"unknown activation {activation!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.activation = activation
        self.dtype = dtype
        if params is not None:
            self.params = [np.array(p, dtype=dtype) for p in params]
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            self.params = []
            for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
                scale = np.sqrt(1.0 / n_in)
                self.params.append(rng.uniform(-scale, scale, size=(n_in, n_out)).astype(dtype))
                self.params.append(np.zeros(n_out, dtype=dtype))
        self._check_shapes()

    def _check_shapes(self):
        expect = []
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            expect += [(n_in, n_out), (n_out,)]
        got = [p.shape for p in self.params]
        if got != expect:
            raise InputError(f"parameter shapes {got} do not match layer sizes {self.sizes}")

    @property
    def n_layers(self):
        return len(self.sizes) - 1

    def copy(self):
        return NeuralNet(self.sizes, self.activation, params=[p.copy() for p in self.params], dtype=self.dtype)

    def forward(self, x, keep=False):
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise InputError(f"input width {x.shape[1]} != {self.sizes[0]}")
        cache = [x]
        a = x
        for k in range(self.n_layers):
            z = a @ self.params[2 * k] + self.params[2 * k + 1]
            last = k == self.n_layers - 1
            a = z if last else _act(self.activation, z)
            if keep:
                cache.append((z, a))
        out = a[0] if squeeze else a
        return (out, cache) if keep else out

    def backward(self, cache, grad_out, want_input=False):
        """Gradients of a scalar loss given ``dL/d(output)`` for a batch."""
        grads = [None] * len(self.params)
        g = np.asarray(grad_out, dtype=self.dtype)
        if g.ndim == 1:
            g = g[None, :]
        for k in reversed(range(self.n_layers)):
            z, a = cache[k + 1]
            if k != self.n_layers - 1:
                g = g * _act_grad(self.activation, z, a)
            prev = cache[k] if k == 0 else cache[k][1]
            grads[2 * k] = prev.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0 or want_input:
                g = g @ self.params[2 * k].T
        return (grads, g) if want_input else grads

    def soft_update_from(self, online: "NeuralNet", tau):
        for t, o in zip(self.params, online.params):
            t *= 1.0 - tau
            t += tau * o

    def all_finite(self):
        return all(np.all(np.isfinite(p)) for p in self.params)


def masked_softmax(logits, mask):
    """Softmax restricted to ``mask``; masked entries are exactly zero."""
    logits = np.asarray(logits, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not np.all(mask.any(axis=-1)):
        raise InputError("every row needs at least one unmasked action")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


class Adam:
    def __init__(self, net: NeuralNet, lr, beta1=0.9, beta2=0.999, eps=1e-8, max_norm=None):
        self.lr = lr
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.max_norm = max_norm
        self.m = [np.zeros_like(p) for p in net.params]
        self.v = [np.zeros_like(p) for p in net.params]
        self.t = 0

    def step(self, net: NeuralNet, grads):
        if self.max_norm is not None:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if norm > self.max_norm:
                grads = [g * (self.max_norm / norm) for g in grads]
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(net.params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, net: NeuralNet, lr, max_norm=None):
        self.lr = lr
        self.max_norm = max_norm

    def step(self, net: NeuralNet, grads):
        if self.max_norm is not None:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if norm > self.max_norm:
                grads = [g * (self.max_norm / norm) for g in grads]
        for p, g in zip(net.params, grads):
            p -= self.lr * g


def check_finite(value, what):
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite {what}: {value!r}"[:200])


def save_checkpoint(path, nets: dict, meta: dict = None):
    """Write named networks to an ``.npz`` container (exact float64 round trip)."""
    arrays = {}
    header = {"version": CHECKPOINT_VERSION, "nets": {}, "meta": meta or {}}
    for name, net in nets.items():
        header["nets"][name] = {"sizes": list(net.sizes), "activation": net.activation, "dtype": np.dtype(net.dtype).str}
        for k, p in enumerate(net.params):
            arrays[f"{name}/{k}"] = p
    arrays["__header__"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise InputError(f"checkpoint not found: {path}")
    with np.load(path) as data:
        header = json.loads(bytes(data["__header__"]).decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise InputError(f"unsupported checkpoint version {header.get('version')}")
        nets = {}
        for name, spec in header["nets"].items():
            n = 2 * (len(spec["sizes"]) - 1)
            params = [data[f"{name}/{k}"] for k in range(n)]
            nets[name] = NeuralNet(spec["sizes"], spec["activation"], params=params, dtype=np.dtype(spec["dtype"]))
    return nets, header["meta"]
