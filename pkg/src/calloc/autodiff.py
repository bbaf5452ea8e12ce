"""Reverse-mode differentiation over dense 2-D arrays.

Every value is a ``(rows, cols)`` numpy array. Operations executed while a
:class:`Tape` is active, and touching at least one tensor that requires a
gradient, are recorded in creation order; :meth:`Tape.backward` walks that
record in reverse and accumulates gradients into per-tape buffers. Outside a
tape the same functions are plain forward computations with no side effects,
so a frozen network can be evaluated from several threads at once.

Arrays keep the dtype they are given. Models store float32 parameters; the
gradient checker runs on float64 copies.
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "RngStream",
    "GradCheckReport",
    "matmul",
    "transpose",
    "add",
    "add_bias",
    "add_const",
    "relu",
    "row_softmax",
    "scale",
    "dropout",
    "gaussian_noise",
    "take_rows",
    "cross_entropy",
    "mse",
    "grad_check",
]

_active_tape: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "calloc_active_tape", default=None
)
_kink_log: contextvars.ContextVar["list | None"] = contextvars.ContextVar(
    "calloc_kink_log", default=None
)


class Tensor:
    """A 2-D array that can take part in a recorded computation."""

    __slots__ = ("value", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(value)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {arr.shape}")
        self.value = arr
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def item(self) -> float:
        if self.value.size != 1:
            raise ValueError(f"item() needs a single element, shape is {self.shape}")
        return float(self.value.reshape(()))

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor(value)
    tape = _active_tape.get()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        tape.nodes.append(out)
    return out


class Tape:
    """Records operations inside a ``with`` block and back-propagates through them."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._grads: dict[int, np.ndarray] = {}
        self._keep: dict[int, Tensor] = {}
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc):
        _active_tape.reset(self._token)
        self._token = None
        return False

    def backward(self, loss: Tensor) -> "Tape":
        if loss.shape != (1, 1):
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self.nodes or loss._backward is None or not any(n is loss for n in reversed(self.nodes)):
            raise RuntimeError("loss was not recorded on this tape; run the forward pass inside the tape first")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        keep: dict[int, Tensor] = {id(loss): loss}
        for node in reversed(self.nodes):
            g = grads.get(id(node))
            if g is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                k = id(parent)
                if k in grads:
                    grads[k] = grads[k] + pg
                else:
                    grads[k] = pg
                    keep[k] = parent
        self._grads = grads
        self._keep = keep
        return self

    def grad(self, t: Tensor) -> np.ndarray:
        """Gradient of the last back-propagated loss w.r.t. ``t`` (zeros if unrelated)."""
        g = self._grads.get(id(t))
        if g is None:
            return np.zeros_like(t.value)
        return g


class RngStream:
    """Seeded random source for dropout masks and noise draws.

    Child streams derived with :meth:`spawn` are independent of the parent and
    of each other, and depend only on ``(seed, key)``.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self.counter = 0
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(key))

    def random(self, shape) -> np.ndarray:
        self.counter += 1
        return self.generator.random(shape)

    def normal(self, shape, sigma: float) -> np.ndarray:
        self.counter += 1
        return self.generator.normal(0.0, sigma, shape)

    def permutation(self, n: int) -> np.ndarray:
        self.counter += 1
        return self.generator.permutation(n)

    def integers(self, low: int, high: int, size=None):
        self.counter += 1
        return self.generator.integers(low, high, size)


# -- forward operations -------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value

    def backward(g):
        return (g @ bv.T if a.requires_grad else None, av.T @ g if b.requires_grad else None)

    return _make(av @ bv, (a, b), backward)


def transpose(x) -> Tensor:
    x = _as_tensor(x)
    return _make(x.value.T, (x,), lambda g: (g.T,))


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    return _make(a.value + b.value, (a, b), lambda g: (g, g))


def add_bias(x, b) -> Tensor:
    x, b = _as_tensor(x), _as_tensor(b)
    if b.shape != (1, x.shape[1]):
        raise ValueError(f"bias must have shape (1, {x.shape[1]}), got {b.shape}")
    return _make(x.value + b.value, (x, b), lambda g: (g, g.sum(axis=0, keepdims=True)))


def add_const(x, c) -> Tensor:
    """Add a constant array (no gradient flows into ``c``)."""
    x = _as_tensor(x)
    c = np.asarray(c, dtype=x.dtype)
    if c.shape != x.shape:
        raise ValueError(f"constant must have shape {x.shape}, got {c.shape}")
    return _make(x.value + c, (x,), lambda g: (g,))


def relu(x) -> Tensor:
    # subgradient at exactly 0 is 0
    x = _as_tensor(x)
    on = x.value > 0
    log = _kink_log.get()
    if log is not None:
        log.append(on.copy())
    return _make(np.where(on, x.value, 0).astype(x.dtype, copy=False), (x,), lambda g: (g * on,))


def row_softmax(x) -> Tensor:
    x = _as_tensor(x)
    if x.shape[1] == 0:
        raise ValueError("softmax over an empty row")
    z = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _make(y, (x,), backward)


def scale(x, c: float) -> Tensor:
    x = _as_tensor(x)
    c = x.dtype.type(c)
    return _make(x.value * c, (x,), lambda g: (g * c,))


def dropout(x, rate: float, train: bool, rng: RngStream | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1/(1-rate)``; identity when not training."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = _as_tensor(x)
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an RngStream")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    return _make(x.value * keep, (x,), lambda g: (g * keep,))


def gaussian_noise(x, sigma: float, train: bool, rng: RngStream | None = None) -> Tensor:
    """Additive N(0, sigma^2) noise in training mode; differentiates as identity."""
    if sigma < 0:
        raise ValueError(f"noise sigma must be >= 0, got {sigma}")
    x = _as_tensor(x)
    if not train or sigma == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode noise needs an RngStream")
    noise = rng.normal(x.shape, sigma).astype(x.dtype)
    return _make(x.value + noise, (x,), lambda g: (g,))


def take_rows(x, idx) -> Tensor:
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    n = x.shape[0]

    def backward(g):
        out = np.zeros_like(x.value)
        np.add.at(out, idx, g)
        return (out,)

    if idx.size and (idx.min() < -n or idx.max() >= n):
        raise IndexError("row index out of range")
    return _make(x.value[idx], (x,), backward)


def cross_entropy(logits, labels, reduction: str = "mean") -> Tensor:
    """Softmax cross-entropy against integer class labels."""
    logits = _as_tensor(logits)
    labels = np.asarray(labels, dtype=np.intp).reshape(-1)
    b, c = logits.shape
    if labels.shape[0] != b:
        raise ValueError(f"{labels.shape[0]} labels for {b} rows")
    if b == 0:
        raise ValueError("cross entropy over an empty batch")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError("label out of range")
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    rows = np.arange(b)
    total = -logp[rows, labels].sum()
    if reduction == "mean":
        denom = b
    elif reduction == "sum":
        denom = 1
    else:
        raise ValueError(f"unknown reduction {reduction!r}")
    value = np.array([[total / denom]], dtype=logits.dtype)

    def backward(g):
        p = np.exp(logp)
        p[rows, labels] -= 1
        return (p * (g[0, 0] / denom),)

    return _make(value, (logits,), backward)


def mse(a, b) -> Tensor:
    """Mean of squared differences over all elements."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"mse shape mismatch: {a.shape} vs {b.shape}")
    diff = a.value - b.value
    n = diff.size
    value = np.array([[np.mean(diff * diff)]], dtype=np.result_type(a.dtype, b.dtype))

    def backward(g):
        d = diff * (2.0 * g[0, 0] / n)
        return (d if a.requires_grad else None, -d if b.requires_grad else None)

    return _make(value, (a, b), backward)


# -- gradient checking --------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    n_skipped: int
    tolerance: float
    worst: tuple[str, tuple[int, int]] | None = None
    per_tensor: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.n_checked > 0 and self.max_rel_error < self.tolerance


def _evaluate(loss_fn) -> tuple[float, list]:
    log: list = []
    token = _kink_log.set(log)
    try:
        value = loss_fn().item()
    finally:
        _kink_log.reset(token)
    return value, log


def _same_pattern(a: list, b: list) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    tolerance: float = 1e-3,
    n_samples: int = 100,
    h: float = 1e-3,
    seed: int = 0,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients with central differences at sampled coordinates.

    ``loss_fn`` rebuilds the scalar loss from the current values of ``tensors``
    (and must be deterministic, e.g. by re-seeding any RngStream it uses).
    Coordinates whose perturbation flips a relu input across zero are skipped
    and replaced by fresh draws. The relative error of one coordinate is
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    tensors = list(tensors)
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    analytic = [tape.grad(t).copy() for t in tensors]
    _, base_pattern = _evaluate(loss_fn)

    rng = np.random.default_rng(seed)
    report = GradCheckReport(0.0, 0, 0, tolerance)
    attempts = 0
    max_attempts = 20 * n_samples
    while report.n_checked < n_samples and attempts < max_attempts:
        ti = attempts % len(tensors)
        attempts += 1
        t = tensors[ti]
        r = int(rng.integers(t.shape[0]))
        c = int(rng.integers(t.shape[1]))
        orig = t.value[r, c]
        t.value[r, c] = orig + h
        f_plus, pat_plus = _evaluate(loss_fn)
        t.value[r, c] = orig - h
        f_minus, pat_minus = _evaluate(loss_fn)
        t.value[r, c] = orig
        if not (_same_pattern(pat_plus, base_pattern) and _same_pattern(pat_minus, base_pattern)):
            report.n_skipped += 1
            continue
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = float(analytic[ti][r, c])
        err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        name = t.name or f"tensor{ti}"
        report.per_tensor[name] = max(report.per_tensor.get(name, 0.0), err)
        if report.worst is None or err > report.max_rel_error:
            report.max_rel_error = err
            report.worst = (name, (r, c))
        report.n_checked += 1
    return report
