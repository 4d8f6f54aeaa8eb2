"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Operations are plain functions.  When a :class:`Tape` is active (``with Tape()
as tape:``) every operation whose operands require gradients appends a record
to it; :func:`backward` replays the records in reverse order.  Outside a tape
the same functions are ordinary numpy forward passes.
"""
import threading

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Tensor", "Tape", "ShapeError", "NonFiniteError",
    "matmul", "conv2d", "maxpool2d", "relu", "tanh", "add_bias", "add", "sub",
    "mul", "scale", "reduce_sum", "reshape", "absolute", "softmax_cross_entropy",
    "cw_margin", "softmax", "backward", "grad_check",
]


class ShapeError(ValueError):
    pass


class NonFiniteError(ArithmeticError):
    pass


class Tensor:
    """Dense float64 array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class _Record:
    __slots__ = ("op", "inputs", "output", "backward_fn")

    def __init__(self, op, inputs, output, backward_fn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


_local = threading.local()


def _active_tape():
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tape:
    """Ordered record of primitive operations.

    Tapes are thread-local: a tape entered in one thread is invisible to
    operations running in another.
    """

    def __init__(self):
        self.records = []

    def __enter__(self):
        if not hasattr(_local, "stack"):
            _local.stack = []
        _local.stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.stack.pop()
        return False

    def __len__(self):
        return len(self.records)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(op, data, inputs, backward_fn):
    """Wrap ``data`` and record the op on the active tape if needed."""
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    tape = _active_tape()
    if tape is not None and needs:
        tape.records.append(_Record(op, inputs, out, backward_fn))
    return out


# ---------------------------------------------------------------- primitives

def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    A, B = a.data, b.data

    def back(g):
        if A.ndim == 1 and B.ndim == 1:
            return g * B, g * A
        if A.ndim == 1:
            return B @ g, np.outer(A, g)
        if B.ndim == 1:
            return np.outer(g, B), A.T @ g
        return g @ B.T, A.T @ g

    return _make("matmul", A @ B, (a, b), back)


def _same_padding(size, k, stride):
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def conv2d(x, w, stride=1, padding="valid"):
    """2-D cross-correlation. ``x`` is (N, C, H, W); ``w`` is (F, C, kh, kw)."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d: incompatible shapes input {x.shape} and filter {w.shape}")
    if stride not in (1, 2):
        raise ShapeError(f"conv2d: unsupported stride {stride}")
    N, C, H, W_ = x.shape
    F, _, kh, kw = w.shape
    if padding == "same":
        pt, pb = _same_padding(H, kh, stride)
        pl, pr = _same_padding(W_, kw, stride)
    elif padding == "valid":
        pt = pb = pl = pr = 0
    else:
        raise ValueError(f"conv2d: unknown padding {padding!r}")
    X = x.data
    if pt or pb or pl or pr:
        X = np.pad(X, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    Hp, Wp = X.shape[2], X.shape[3]
    if Hp < kh or Wp < kw:
        raise ShapeError(f"conv2d: filter {w.shape} larger than input {x.shape}")
    win = sliding_window_view(X, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    Ho, Wo = win.shape[2], win.shape[3]
    Wt = w.data
    out = np.tensordot(win, Wt, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)

    def back(g):
        gw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
        gxp = np.zeros((N, C, Hp, Wp))
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(g, Wt[:, :, i, j], axes=([1], [0]))
                gxp[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += contrib.transpose(0, 3, 1, 2)
        return gxp[:, :, pt:Hp - pb, pl:Wp - pr], gw

    return _make("conv2d", np.ascontiguousarray(out), (x, w), back)


def maxpool2d(x, window=2, stride=2):
    """Max pooling without padding; ties go to the first index in scan order."""
    x = _as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeError(f"maxpool2d: expected 4-axis input, got {x.shape}")
    N, C, H, W = x.shape
    if H < window or W < window:
        raise ShapeError(f"maxpool2d: window {window} larger than input {x.shape}")
    win = sliding_window_view(x.data, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    Ho, Wo = win.shape[2], win.shape[3]
    flat = win.reshape(N, C, Ho, Wo, window * window)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def back(g):
        gx = np.zeros((N, C, H, W))
        for p in range(window * window):
            i, j = divmod(p, window)
            gx[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += np.where(idx == p, g, 0.0)
        return (gx,)

    return _make("maxpool2d", out, (x,), back)


def relu(x):
    x = _as_tensor(x)
    mask = x.data > 0
    return _make("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def tanh(x):
    x = _as_tensor(x)
    y = np.tanh(x.data)
    return _make("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))


def add_bias(x, b):
    """Add a bias vector along axis 1 (features for 2-D input, channels for 4-D)."""
    x, b = _as_tensor(x), _as_tensor(b)
    if b.data.ndim != 1 or x.data.ndim < 2 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: incompatible shapes {x.shape} and {b.shape}")
    bshape = (1, -1) + (1,) * (x.data.ndim - 2)
    axes = (0,) + tuple(range(2, x.data.ndim))
    return _make("add_bias", x.data + b.data.reshape(bshape), (x, b),
                 lambda g: (g, g.sum(axis=axes)))


def _check_same(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same("add", a, b)
    return _make("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same("sub", a, b)
    return _make("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same("mul", a, b)
    A, B = a.data, b.data
    return _make("mul", A * B, (a, b), lambda g: (g * B, g * A))


def scale(x, c):
    x = _as_tensor(x)
    c = float(c)
    return _make("scale", x.data * c, (x,), lambda g: (g * c,))


def reduce_sum(x):
    x = _as_tensor(x)
    shape = x.shape
    return _make("reduce_sum", np.array(x.data.sum()), (x,),
                 lambda g: (np.broadcast_to(g, shape).copy(),))


def reshape(x, shape):
    x = _as_tensor(x)
    old = x.shape
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {old} to {shape}") from None
    return _make("reshape", y, (x,), lambda g: (g.reshape(old),))


def absolute(x):
    x = _as_tensor(x)
    s = np.sign(x.data)
    return _make("abs", np.abs(x.data), (x,), lambda g: (g * s,))


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(op, logits, labels):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.data.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeError(f"{op}: logits {logits.shape} do not match {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ValueError(f"{op}: label out of range for {logits.shape[1]} classes")
    return labels


def softmax_cross_entropy(logits, labels, reduction="mean"):
    """Cross-entropy of ``softmax(logits)`` against integer labels.

    ``reduction`` is ``"mean"``, ``"sum"`` or ``"none"`` (per-example vector).
    """
    logits = _as_tensor(logits)
    labels = _check_labels("softmax_cross_entropy", logits, labels)
    Z = logits.data
    shifted = Z - Z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(Z.shape[0])
    losses = logsum - shifted[rows, labels]
    p = np.exp(shifted - logsum[:, None])
    p[rows, labels] -= 1.0
    n = Z.shape[0]
    if reduction == "mean":
        return _make("softmax_xent", np.array(losses.mean()), (logits,), lambda g: (p * (g / n),))
    if reduction == "sum":
        return _make("softmax_xent", np.array(losses.sum()), (logits,), lambda g: (p * g,))
    if reduction == "none":
        return _make("softmax_xent", losses, (logits,), lambda g: (p * g[:, None],))
    raise ValueError(f"unknown reduction {reduction!r}")


def cw_margin(logits, labels):
    """Per-example ``max_{i != y} z_i - z_y``; the max picks the lowest index on ties."""
    logits = _as_tensor(logits)
    labels = _check_labels("cw_margin", logits, labels)
    Z = logits.data
    if Z.shape[1] < 2:
        raise ValueError("cw_margin: needs at least two classes")
    rows = np.arange(Z.shape[0])
    masked = Z.copy()
    masked[rows, labels] = -np.inf
    other = masked.argmax(axis=1)
    out = Z[rows, other] - Z[rows, labels]

    def back(g):
        gz = np.zeros_like(Z)
        gz[rows, other] += g
        gz[rows, labels] -= g
        return (gz,)

    return _make("cw_margin", out, (logits,), back)


# ------------------------------------------------------------------ backward

def backward(tape, loss, wrt=()):
    """Populate ``.grad`` on every leaf reached from ``loss``.

    Leaves listed in ``wrt`` that the loss does not depend on get a zero
    gradient. Returns the list of leaves that received gradients.
    """
    if not tape.records:
        raise ValueError("backward: tape is empty")
    if loss.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    produced = {id(r.output) for r in tape.records}
    if id(loss) not in produced:
        raise ValueError("backward: loss was not produced on this tape")
    grads = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.output), None)
        if g is None:
            continue
        in_grads = rec.backward_fn(g)
        for t, gi in zip(rec.inputs, in_grads):
            if not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = np.array(gi, dtype=np.float64, copy=True)
            if key not in produced:
                leaves[key] = t
    for key, t in leaves.items():
        t.grad = grads[key]
    for t in wrt:
        if id(t) not in leaves:
            t.grad = np.zeros_like(t.data)
    return list(leaves.values())


def grad_check(fn, x, h=1e-5):
    """Max relative error between the tape gradient of ``fn`` at ``x`` and
    central differences: ``|a - n| / max(1, |a|, |n|)``.
    """
    if h <= 0:
        raise ValueError("grad_check: h must be positive")
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    xt = Tensor(x0.copy(), requires_grad=True)
    with Tape() as tape:
        out = fn(xt)
    if not np.all(np.isfinite(out.data)):
        raise NonFiniteError("grad_check: non-finite function value")
    if tape.records:
        backward(tape, out, wrt=[xt])
        analytic = xt.grad
    else:
        analytic = np.zeros_like(x0)
    numeric = np.empty_like(x0)
    flat, nflat = x0.reshape(-1), numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(fn(Tensor(x0.copy())).data)
        flat[i] = orig - h
        fm = float(fn(Tensor(x0.copy())).data)
        flat[i] = orig
        nflat[i] = (fp - fm) / (2 * h)
    if not (np.all(np.isfinite(analytic)) and np.all(np.isfinite(numeric))):
        raise NonFiniteError("grad_check: non-finite gradient")
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom)) if x0.size else 0.0
