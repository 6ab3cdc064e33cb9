"""Minimal differentiable kernel: dense layers, a GRU cell, first-order
optimizers, and a finite-difference gradient checker.

Everything is float64 numpy with hand-written backward passes; the sizes in
this project are desk-scale, so clarity and checkable gradients win over
throughput. Parameters live in plain dicts of arrays keyed by block name,
which is also the unit of the checkpoint format.

Checkpoint layout (little-endian): magic ``XDRM``, version u16, then per
block u16 name length, the UTF-8 name, u32 rows, u32 cols, rows*cols f64.
Vectors are stored as one row.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class NeuralError(Exception):
    pass


class ShapeMismatch(NeuralError):
    pass


class NumericsError(NeuralError):
    """A public operation produced a NaN or Inf."""


CHECKPOINT_MAGIC = b"XDRM"
CHECKPOINT_VERSION = 1

_SIG_CLAMP = 60.0  # |z| beyond this saturates sigmoid/tanh exactly enough


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -_SIG_CLAMP, _SIG_CLAMP)))


_ACTIVATIONS = {
    "identity": (lambda z: z, lambda z, y: np.ones_like(z)),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, y: (z > 0).astype(float)),
    "tanh": (np.tanh, lambda z, y: 1.0 - y * y),
    "sigmoid": (sigmoid, lambda z, y: y * (1.0 - y)),
}


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericsError(f"{name} produced non-finite values")


def init_uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class DenseLayer:
    """y = act(x @ w + b), with exact analytic gradients."""

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        activation: str = "identity",
        rng: np.random.Generator | None = None,
    ) -> None:
        if activation not in _ACTIVATIONS:
            raise NeuralError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.w = init_uniform(rng, in_dim, (in_dim, out_dim))
        self.b = init_uniform(rng, in_dim, (out_dim,))

    def params(self) -> dict[str, np.ndarray]:
        return {"w": self.w, "b": self.b}

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.in_dim:
            raise ShapeMismatch(f"expected input dim {self.in_dim}, got {x.shape[1]}")
        z = x @ self.w + self.b
        act, _ = _ACTIVATIONS[self.activation]
        y = act(z)
        _check_finite("dense forward", y)
        return y, (x, z, y)

    def backward(
        self, cache: tuple, dy: np.ndarray
    ) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        x, z, y = cache
        dy = np.atleast_2d(np.asarray(dy, dtype=float))
        if dy.shape != y.shape:
            raise ShapeMismatch(f"dy shape {dy.shape} != output shape {y.shape}")
        _, dact = _ACTIVATIONS[self.activation]
        dz = dy * dact(z, y)
        dw = x.T @ dz
        db = dz.sum(axis=0)
        dx = dz @ self.w.T
        _check_finite("dense backward", dx, dw, db)
        return dx, {"w": dw, "b": db}


class GruCell:
    """Single GRU cell: update gate z, reset gate r, candidate c,
    h = (1 - z) * h_prev + z * c."""

    GATES = ("z", "r", "h")

    def __init__(
        self, in_dim: int, hidden_dim: int, rng: np.random.Generator | None = None
    ) -> None:
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        self._p: dict[str, np.ndarray] = {}
        for g in self.GATES:
            self._p[f"w{g}"] = init_uniform(rng, in_dim, (in_dim, hidden_dim))
            self._p[f"u{g}"] = init_uniform(rng, hidden_dim, (hidden_dim, hidden_dim))
            self._p[f"b{g}"] = np.zeros(hidden_dim)

    def params(self) -> dict[str, np.ndarray]:
        return self._p

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self._p.items()}

    def step(self, x: np.ndarray, h_prev: np.ndarray) -> tuple[np.ndarray, tuple]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h_prev = np.atleast_2d(np.asarray(h_prev, dtype=float))
        if x.shape[1] != self.in_dim:
            raise ShapeMismatch(f"expected input dim {self.in_dim}, got {x.shape[1]}")
        if h_prev.shape[1] != self.hidden_dim:
            raise ShapeMismatch(
                f"expected hidden dim {self.hidden_dim}, got {h_prev.shape[1]}"
            )
        p = self._p
        z = sigmoid(x @ p["wz"] + h_prev @ p["uz"] + p["bz"])
        r = sigmoid(x @ p["wr"] + h_prev @ p["ur"] + p["br"])
        rh = r * h_prev
        c = np.tanh(x @ p["wh"] + rh @ p["uh"] + p["bh"])
        h = (1.0 - z) * h_prev + z * c
        _check_finite("gru step", h)
        return h, (x, h_prev, z, r, rh, c)

    def backward_step(
        self, cache: tuple, dh: np.ndarray, grads: dict[str, np.ndarray]
    ) -> tuple[np.ndarray, np.ndarray]:
        """Accumulate parameter gradients for one step; returns (dx, dh_prev)."""
        x, h_prev, z, r, rh, c = cache
        p = self._p
        dh = np.atleast_2d(np.asarray(dh, dtype=float))
        dz = dh * (c - h_prev)
        dc = dh * z
        dh_prev = dh * (1.0 - z)
        dac = dc * (1.0 - c * c)
        grads["wh"] += x.T @ dac
        grads["uh"] += rh.T @ dac
        grads["bh"] += dac.sum(axis=0)
        drh = dac @ p["uh"].T
        dr = drh * h_prev
        dh_prev = dh_prev + drh * r
        dar = dr * r * (1.0 - r)
        grads["wr"] += x.T @ dar
        grads["ur"] += h_prev.T @ dar
        grads["br"] += dar.sum(axis=0)
        dh_prev = dh_prev + dar @ p["ur"].T
        daz = dz * z * (1.0 - z)
        grads["wz"] += x.T @ daz
        grads["uz"] += h_prev.T @ daz
        grads["bz"] += daz.sum(axis=0)
        dh_prev = dh_prev + daz @ p["uz"].T
        dx = dac @ p["wh"].T + dar @ p["wr"].T + daz @ p["wz"].T
        return dx, dh_prev

    def run_sequence(
        self, xs: list[np.ndarray], h0: np.ndarray
    ) -> tuple[np.ndarray, list[tuple]]:
        """Feed a sequence; returns final hidden state and per-step caches."""
        h = np.atleast_2d(h0)
        caches = []
        for x in xs:
            h, cache = self.step(x, h)
            caches.append(cache)
        return h, caches

    def backward_sequence(
        self,
        caches: list[tuple],
        dh_final: np.ndarray | None = None,
        dh_steps: list[np.ndarray] | None = None,
    ) -> tuple[dict[str, np.ndarray], list[np.ndarray], np.ndarray]:
        """Backprop through a cached sequence.

        ``dh_final`` is the gradient at the last hidden state; ``dh_steps``
        optionally injects an extra gradient at every step's hidden output
        (needed when a stacked cell consumes this cell's outputs). Returns
        (param grads, per-step input gradients, gradient at the initial
        hidden state).
        """
        grads = self.zero_grads()
        batch = caches[0][0].shape[0]
        dh = np.zeros((batch, self.hidden_dim)) if dh_final is None else dh_final
        dxs: list[np.ndarray] = []
        for t in range(len(caches) - 1, -1, -1):
            if dh_steps is not None:
                dh = dh + dh_steps[t]
            dx, dh = self.backward_step(caches[t], dh, grads)
            dxs.append(dx)
        dxs.reverse()
        return grads, dxs, dh


class Optimizer:
    """SGD or Adam over named parameter dicts."""

    def __init__(self, kind: str = "adam", lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if kind not in ("sgd", "adam"):
            raise NeuralError(f"unknown optimizer {kind!r}")
        if lr <= 0:
            raise NeuralError(f"lr must be > 0, got {lr}")
        self.kind = kind
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def update(
        self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
    ) -> None:
        for name, g in grads.items():
            if params[name].shape != g.shape:
                raise ShapeMismatch(
                    f"{name}: param {params[name].shape} vs grad {g.shape}"
                )
        self.t += 1
        for name, g in grads.items():
            p = params[name]
            if self.kind == "sgd":
                p -= self.lr * g
                continue
            m = self._m.setdefault(name, np.zeros_like(p))
            v = self._v.setdefault(name, np.zeros_like(p))
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            _check_finite(f"optimizer update {name}", p)


@dataclass
class GradCheckReport:
    per_param: dict[str, float]
    max_rel_error: float

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def grad_check(
    loss_fn,
    params: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    eps: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn`` is re-evaluated with each parameter entry perturbed in
    place, so it must close over the same arrays that ``params`` holds.
    """
    per_param: dict[str, float] = {}
    worst = 0.0
    for name, p in params.items():
        a = analytic[name]
        if a.shape != p.shape:
            raise ShapeMismatch(f"{name}: analytic {a.shape} vs param {p.shape}")
        err = 0.0
        flat = p.reshape(-1)
        aflat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn()
            flat[i] = orig - eps
            down = loss_fn()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            rel = abs(aflat[i] - numeric) / (abs(aflat[i]) + abs(numeric) + 1e-12)
            err = max(err, rel)
        per_param[name] = err
        worst = max(worst, err)
    return GradCheckReport(per_param, worst)


def save_params(path: str | Path, params: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<H", CHECKPOINT_VERSION))
        for name in sorted(params):
            arr = np.atleast_2d(np.asarray(params[name], dtype="<f8"))
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(arr.tobytes(order="C"))


def load_params(path: str | Path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise NeuralError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise NeuralError(f"{path}: unsupported checkpoint version {version}")
    pos = 6
    while pos < len(raw):
        (name_len,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos : pos + name_len].decode("utf-8")
        pos += name_len
        rows, cols = struct.unpack_from("<II", raw, pos)
        pos += 8
        count = rows * cols
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).copy()
        pos += count * 8
        out[name] = arr.reshape(rows, cols)
    return out


def load_into(params: dict[str, np.ndarray], path: str | Path) -> None:
    """Copy a checkpoint into existing parameter arrays, shape-checked."""
    stored = load_params(path)
    missing = set(params) - set(stored)
    if missing:
        raise NeuralError(f"checkpoint lacks blocks {sorted(missing)}")
    for name, target in params.items():
        src = stored[name].reshape(target.shape)
        np.copyto(target, src)
