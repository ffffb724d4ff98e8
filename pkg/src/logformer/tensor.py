"""Dense tensors with reverse-mode autodiff over the fixed op set the
encoder needs, plus a central-difference gradient oracle.

A Tensor wraps a numpy array; every op records a backward closure on the
implicit tape (the parent graph). backward() walks the graph in reverse
topological order exactly once, accumulating additively into .grad.

Precision is process-global: double is the reference mode for all checking,
single is an optional speed mode (LOGFORMER_PRECISION or set_precision()).
"""

from __future__ import annotations

import contextlib
import os
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .errors import CorruptionError

_DTYPES = {"double": np.float64, "single": np.float32}
_dtype = _DTYPES[os.environ.get("LOGFORMER_PRECISION", "double").strip() or "double"]
_grad_enabled = True

LN_EPS = 1e-5


def set_precision(mode: str) -> None:
    global _dtype
    if mode not in _DTYPES:
        raise ValueError(f"precision must be one of {sorted(_DTYPES)}, got {mode!r}")
    _dtype = _DTYPES[mode]


def get_dtype() -> np.dtype:
    return np.dtype(_dtype)


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / numeric probes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=_dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = self.name or "tensor"
        return f"Tensor({tag}, shape={self.data.shape}, grad={self.requires_grad})"


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _make(data: np.ndarray, parents: Sequence[Tensor],
          backward: Callable[[Tensor], Callable[[], None]]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._parents for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward(out)
    return out


def backward(loss: Tensor) -> None:
    """Populate .grad of every reachable tensor with dLoss/dTensor."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if loss._backward is None and not loss._parents:
        raise ValueError("backward called on a tensor detached from the tape")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward()


# ---------------------------------------------------------------------------
# ops


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def bwd(out):
        def run():
            if a.requires_grad or a._parents:
                _accum(a, out.grad)
            if b.requires_grad or b._parents:
                _accum(b, out.grad)
        return run

    return _make(a.data + b.data, (a, b), bwd)


def add_bias(a: Tensor, v: Tensor) -> Tensor:
    """Broadcast-add a length-n vector over the last axis of a."""
    if v.data.ndim != 1 or v.data.shape[0] != a.data.shape[-1]:
        raise ValueError(f"add_bias: bias {v.data.shape} does not fit {a.data.shape}")

    def bwd(out):
        lead = tuple(range(a.data.ndim - 1))

        def run():
            if a.requires_grad or a._parents:
                _accum(a, out.grad)
            if v.requires_grad or v._parents:
                _accum(v, out.grad.sum(axis=lead))
        return run

    return _make(a.data + v.data, (a, v), bwd)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def bwd(out):
        def run():
            _accum(a, s * out.grad)
        return run

    return _make(a.data * s, (a,), bwd)


def mul_mask(a: Tensor, mask: np.ndarray) -> Tensor:
    """Elementwise multiply by a constant 0/1 mask (broadcastable)."""
    m = np.asarray(mask, dtype=a.data.dtype)

    def bwd(out):
        def run():
            _accum(a, out.grad * m)
        return run

    return _make(a.data * m, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands; use bmm for batched")

    def bwd(out):
        def run():
            if a.requires_grad or a._parents:
                _accum(a, out.grad @ b.data.T)
            if b.requires_grad or b._parents:
                _accum(b, a.data.T @ out.grad)
        return run

    return _make(a.data @ b.data, (a, b), bwd)


def bmm(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    """Batched matmul over the leading axis; optionally a @ b^T."""
    if a.data.ndim != 3 or b.data.ndim != 3:
        raise ValueError("bmm expects 3-D operands")
    bd = np.swapaxes(b.data, -1, -2) if transpose_b else b.data

    def bwd(out):
        def run():
            if a.requires_grad or a._parents:
                _accum(a, out.grad @ np.swapaxes(bd, -1, -2))
            if b.requires_grad or b._parents:
                db = np.swapaxes(a.data, -1, -2) @ out.grad
                _accum(b, np.swapaxes(db, -1, -2) if transpose_b else db)
        return run

    return _make(a.data @ bd, (a, b), bwd)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bwd(out):
        def run():
            _accum(a, (1.0 - out.data * out.data) * out.grad)
        return run

    return _make(y, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(out):
        def run():
            _accum(a, out.data * (1.0 - out.data) * out.grad)
        return run

    return _make(y, (a,), bwd)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    def bwd(out):
        def run():
            _accum(a, out.grad.reshape(a.data.shape))
        return run

    return _make(a.data.reshape(shape), (a,), bwd)


def masked_softmax(a: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis, restricted to columns where mask > 0.

    Masked columns get probability 0; a fully-masked mask yields all-zero
    rows with zero gradient (the caller treats that window as empty).
    """
    n = a.data.shape[-1]
    m = np.ascontiguousarray(np.asarray(mask, dtype=np.float64).reshape(n))
    flat = np.ascontiguousarray(a.data.reshape(-1, n))
    probs = kernels.masked_softmax_fwd(flat, m).reshape(a.data.shape)

    def bwd(out):
        def run():
            p2 = out.data.reshape(-1, n)
            g2 = np.ascontiguousarray(out.grad.reshape(-1, n))
            _accum(a, kernels.masked_softmax_bwd(p2, g2).reshape(a.data.shape))
        return run

    return _make(probs, (a,), bwd)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LN_EPS) -> Tensor:
    d = x.data.shape[-1]
    flat = np.ascontiguousarray(x.data.reshape(-1, d))
    y, xhat, inv_std = kernels.layer_norm_fwd(flat, gain.data, bias.data, eps)

    def bwd(out):
        def run():
            g2 = np.ascontiguousarray(out.grad.reshape(-1, d))
            dx, dgain, dbias = kernels.layer_norm_bwd(g2, xhat, inv_std, gain.data)
            if x.requires_grad or x._parents:
                _accum(x, dx.reshape(x.data.shape))
            if gain.requires_grad or gain._parents:
                _accum(gain, dgain)
            if bias.requires_grad or bias._parents:
                _accum(bias, dbias)
        return run

    return _make(y.reshape(x.data.shape), (x, gain, bias), bwd)


def masked_mean_rows(x: Tensor, mask: np.ndarray) -> Tensor:
    """Mean over rows where mask > 0; returns shape (1, d)."""
    m = np.asarray(mask, dtype=x.data.dtype).reshape(-1, 1)
    n_real = float(m.sum())
    if n_real == 0:
        raise ValueError("masked_mean_rows over an all-masked window")
    y = (x.data * m).sum(axis=0, keepdims=True) / n_real

    def bwd(out):
        def run():
            _accum(x, (m / n_real) * out.grad)
        return run

    return _make(y, (x,), bwd)


def split_heads(x: Tensor, h: int) -> Tensor:
    """(l, d) -> (h, l, d/h)."""
    l, d = x.data.shape
    if d % h:
        raise ValueError(f"split_heads: d={d} not divisible by h={h}")
    dk = d // h
    y = x.data.reshape(l, h, dk).transpose(1, 0, 2)

    def bwd(out):
        def run():
            _accum(x, out.grad.transpose(1, 0, 2).reshape(l, d))
        return run

    return _make(np.ascontiguousarray(y), (x,), bwd)


def merge_heads(x: Tensor) -> Tensor:
    """(h, l, d/h) -> (l, d); inverse of split_heads."""
    h, l, dk = x.data.shape
    y = x.data.transpose(1, 0, 2).reshape(l, h * dk)

    def bwd(out):
        def run():
            _accum(x, out.grad.reshape(l, h, dk).transpose(1, 0, 2))
        return run

    return _make(np.ascontiguousarray(y), (x,), bwd)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack row blocks: [(r_i, d)] -> (sum r_i, d)."""
    parts = list(parts)
    if not parts:
        raise ValueError("concat_rows of an empty sequence")
    offsets = np.cumsum([0] + [p.data.shape[0] for p in parts])

    def bwd(out):
        def run():
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                if p.requires_grad or p._parents:
                    _accum(p, out.grad[lo:hi])
        return run

    return _make(np.concatenate([p.data for p in parts], axis=0), parts, bwd)


def bce_with_logits(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean binary cross-entropy between logits and 0/1 labels (stable form)."""
    z = np.ascontiguousarray(logits.data.reshape(-1))
    if z.size == 0:
        raise ValueError("bce_with_logits on an empty batch")
    y = np.asarray(labels, dtype=z.dtype).reshape(-1)
    if y.shape != z.shape:
        raise ValueError(f"bce_with_logits: {z.shape[0]} logits vs {y.shape[0]} labels")
    loss = kernels.bce_logits_fwd(z, y)

    def bwd(out):
        def run():
            gscale = float(out.grad) / z.size
            _accum(logits, kernels.bce_logits_bwd(z, y, gscale).reshape(logits.data.shape))
        return run

    return _make(np.asarray(loss), (logits,), bwd)


# ---------------------------------------------------------------------------
# gradient oracle


def grad_check(f: Callable[[], Tensor], tensors: Iterable[Tensor],
               eps: float = 1e-5, max_coords: int = 50,
               rng: np.random.Generator | None = None) -> float:
    """Central-difference check of autodiff gradients.

    f re-evaluates the scalar loss from the current tensor values. Samples up
    to max_coords coordinates per tensor and returns the max relative error
    |a - n| / max(|a|, |n|, 1e-8). Meant to run in double precision.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    tensors = list(tensors)
    for t in tensors:
        t.zero_grad()
    out = f()
    if not np.isfinite(out.data).all():
        raise CorruptionError("grad_check: non-finite loss")
    backward(out)
    analytic = {id(t): (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for t in tensors}

    worst = 0.0
    for t in tensors:
        size = t.data.size
        coords = (np.arange(size) if size <= max_coords
                  else rng.choice(size, size=max_coords, replace=False))
        flat = t.data.reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            with no_grad():
                hi = float(f().data)
            flat[i] = orig - eps
            with no_grad():
                lo = float(f().data)
            flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise CorruptionError("grad_check: non-finite probe value")
            numeric = (hi - lo) / (2.0 * eps)
            a = float(analytic[id(t)].reshape(-1)[i])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
