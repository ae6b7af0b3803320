"""Dense float64 tensors with taped reverse-mode differentiation.

Just enough array math for the embedding model: every primitive records
itself on a :class:`Tape`, and :meth:`Tape.backward` walks the record in
reverse to accumulate exact gradients on the leaves. Everything is
float64 and single-threaded per tape.

Shape rules are deliberately strict. Binary elementwise ops require equal
shapes; the only broadcasts allowed are python scalars, 0-d tensors
(needed for learnable scalar weights) and the matrix-plus-row-vector bias
add. ``relu`` uses subgradient 0 at the origin, and ``power`` with an
exponent below 1 defines its derivative at 0 as 0 so kernels of the form
``x**b`` stay finite on zero distances.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataError


class ShapeMismatch(DataError):
    """Operands have incompatible shapes."""


class NonScalarLoss(DataError):
    """backward() was asked to differentiate a non-scalar value."""


class Tensor:
    """A float64 array with an optional gradient slot, bound to one tape."""

    __slots__ = ("data", "grad", "tape")

    def __init__(self, data, tape: "Tape"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.tape = tape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


class Tape:
    """Append-only record of primitive applications, in execution order."""

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def leaf(self, data) -> Tensor:
        return Tensor(data, self)

    def _push(self, data: np.ndarray, inputs: tuple[Tensor, ...], backward: Callable) -> Tensor:
        out = Tensor(data, self)
        self._nodes.append((out, inputs, backward))
        return out

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) on every reachable leaf's ``grad``.

        Visits each recorded node exactly once, in reverse order of
        creation, which is a valid topological order by construction.
        """
        if loss.tape is not self:
            raise ValueError("loss does not belong to this tape")
        if loss.data.shape != ():
            raise NonScalarLoss(f"loss has shape {loss.data.shape}, expected a scalar")
        loss.grad = np.ones(())
        for out, inputs, bwd in reversed(self._nodes):
            g = out.grad
            if g is None:
                continue
            for tensor, piece in zip(inputs, bwd(g)):
                if piece is None:
                    continue
                if tensor.grad is None:
                    tensor.grad = np.zeros_like(tensor.data)
                tensor.grad += piece


def _same_tape(*tensors: Tensor) -> Tape:
    tape = tensors[0].tape
    for t in tensors[1:]:
        if t.tape is not tape:
            raise ValueError("operands come from different tapes")
    return tape


def _as_scalar(value) -> float:
    return float(value)


# ---------------------------------------------------------------------------
# Binary primitives
# ---------------------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = _as_scalar(b)
        return a.tape._push(a.data + c, (a,), lambda g: (g,))
    tape = _same_tape(a, b)
    if a.shape == b.shape:
        return tape._push(a.data + b.data, (a, b), lambda g: (g, g))
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return tape._push(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)))
    if b.ndim == 2 and a.ndim == 1 and b.shape[1] == a.shape[0]:
        return tape._push(a.data + b.data, (a, b), lambda g: (g.sum(axis=0), g))
    if a.ndim == 0 or b.ndim == 0:
        small, big = (a, b) if a.ndim == 0 else (b, a)
        out = a.data + b.data

        def bwd(g, small=small, big=big, a_is_small=a.ndim == 0):
            gs = g.sum()
            return (gs, g) if a_is_small else (g, gs)

        return tape._push(out, (a, b), bwd)
    raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")


def sub(a, b) -> Tensor:
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        c = _as_scalar(b)
        return a.tape._push(a.data - c, (a,), lambda g: (g,))
    if not isinstance(a, Tensor) and isinstance(b, Tensor):
        c = _as_scalar(a)
        return b.tape._push(c - b.data, (b,), lambda g: (-g,))
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}")
    return tape._push(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = _as_scalar(b)
        return a.tape._push(a.data * c, (a,), lambda g: (g * c,))
    tape = _same_tape(a, b)
    if a.shape == b.shape:
        da, db = a.data, b.data
        return tape._push(da * db, (a, b), lambda g: (g * db, g * da))
    if a.ndim == 0 or b.ndim == 0:
        da, db = a.data, b.data

        def bwd(g):
            ga = g * db
            gb = g * da
            if a.ndim == 0:
                ga = ga.sum()
            if b.ndim == 0:
                gb = np.asarray(gb).sum()
            return (ga, gb)

        return tape._push(da * db, (a, b), bwd)
    raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    da, db = a.data, b.data
    return tape._push(da @ db, (a, b), lambda g: (g @ db.T, da.T @ g))


# ---------------------------------------------------------------------------
# Elementwise primitives
# ---------------------------------------------------------------------------


def exp(t: Tensor) -> Tensor:
    out = np.exp(t.data)
    return t.tape._push(out, (t,), lambda g: (g * out,))


def log(t: Tensor) -> Tensor:
    data = t.data
    return t.tape._push(np.log(data), (t,), lambda g: (g / data,))


def power(t: Tensor, exponent: float) -> Tensor:
    """Elementwise ``t ** p`` for a constant float exponent.

    The derivative at 0 is defined as 0 whenever ``p < 1`` (where the
    true one-sided derivative diverges) and takes its analytic value
    otherwise.
    """
    p = float(exponent)
    data = t.data
    out = np.power(data, p)

    def bwd(g):
        if p < 1.0:
            safe = np.where(data == 0.0, 1.0, data)
            d = p * np.power(safe, p - 1.0)
            d = np.where(data == 0.0, 0.0, d)
        else:
            d = p * np.power(data, p - 1.0)
        return (g * d,)

    return t.tape._push(out, (t,), bwd)


def relu(t: Tensor) -> Tensor:
    data = t.data
    mask = data > 0
    return t.tape._push(np.where(mask, data, 0.0), (t,), lambda g: (g * mask,))


def sigmoid(t: Tensor) -> Tensor:
    x = t.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return t.tape._push(out, (t,), lambda g: (g * out * (1.0 - out),))


def clamp(t: Tensor, lo: float, hi: float) -> Tensor:
    data = t.data
    mask = (data >= lo) & (data <= hi)
    return t.tape._push(np.clip(data, lo, hi), (t,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# Reductions, reshaping, gather/scatter
# ---------------------------------------------------------------------------


def sum(t: Tensor, axis: Optional[int] = None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    if axis is None:
        return t.tape._push(t.data.sum(), (t,), lambda g: (np.broadcast_to(g, t.shape).copy(),))
    shape = t.shape

    def bwd(g):
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return t.tape._push(t.data.sum(axis=axis), (t,), bwd)


def mean(t: Tensor, axis: Optional[int] = None) -> Tensor:
    n = t.data.size if axis is None else t.shape[axis]
    return mul(sum(t, axis=axis), 1.0 / n)


def squared_norm(t: Tensor) -> Tensor:
    data = t.data
    return t.tape._push(np.asarray((data * data).sum()), (t,), lambda g: (g * 2.0 * data,))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tape = _same_tape(*tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, offsets, axis=axis))

    return tape._push(data, tuple(tensors), bwd)


def index_select(t: Tensor, index) -> Tensor:
    """Gather rows (axis 0). Backward scatter-adds into the source rows."""
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeMismatch("index_select expects a 1-D index array")
    shape = t.shape

    def bwd(g):
        buf = np.zeros(shape)
        np.add.at(buf, idx, g)
        return (buf,)

    return t.tape._push(t.data[idx], (t,), bwd)


def scatter_add(t: Tensor, index, size: int) -> Tensor:
    """Sum rows of ``t`` into ``size`` output rows grouped by ``index``."""
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1 or idx.shape[0] != t.shape[0]:
        raise ShapeMismatch(f"scatter_add: index {idx.shape} vs rows {t.shape}")
    out = np.zeros((size,) + t.shape[1:])
    np.add.at(out, idx, t.data)
    return t.tape._push(out, (t,), lambda g: (g[idx],))


def row_standardize(t: Tensor, eps: float = 1e-8) -> Tensor:
    """Zero-mean, unit-variance rows: ``(x - mean_row) / sqrt(var_row + eps)``.

    Keeps representations on a common scale regardless of how many
    neighbor contributions were summed into them.
    """
    if t.ndim != 2:
        raise ShapeMismatch(f"row_standardize expects a matrix, got {t.shape}")
    x = t.data
    mu = x.mean(axis=1, keepdims=True)
    centered = x - mu
    sigma = np.sqrt(centered.var(axis=1, keepdims=True) + eps)
    y = centered / sigma

    def bwd(g):
        g_mean = g.mean(axis=1, keepdims=True)
        gy_mean = (g * y).mean(axis=1, keepdims=True)
        return ((g - g_mean - y * gy_mean) / sigma,)

    return t.tape._push(y, (t,), bwd)


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def grad_check(
    build: Callable[[Tape, list[Tensor]], Tensor],
    leaves: list[np.ndarray],
    h: float = 1e-5,
    rng: Optional[np.random.Generator] = None,
    max_coords: Optional[int] = None,
) -> float:
    """Max relative error of taped gradients vs central finite differences.

    ``build(tape, tensors)`` must construct a scalar loss from leaf
    tensors wrapping the given arrays. When ``max_coords`` is set, only
    that many randomly sampled coordinates per leaf are probed. The error
    metric is ``|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)``.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in leaves]
    tape = Tape()
    tensors = [tape.leaf(a) for a in arrays]
    loss = build(tape, tensors)
    tape.backward(loss)
    grads = [np.zeros_like(a) if t.grad is None else t.grad for a, t in zip(arrays, tensors)]

    def value() -> float:
        probe = Tape()
        return float(build(probe, [probe.leaf(a) for a in arrays]).data)

    worst = 0.0
    for arr, grad in zip(arrays, grads):
        n = arr.size
        if n == 0:
            continue
        if max_coords is not None and n > max_coords:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = range(n)
        for i in coords:
            orig = arr.flat[i]
            arr.flat[i] = orig + h
            f_plus = value()
            arr.flat[i] = orig - h
            f_minus = value()
            arr.flat[i] = orig
            g_fd = (f_plus - f_minus) / (2.0 * h)
            g_ad = grad.flat[i]
            err = abs(g_ad - g_fd) / max(1.0, abs(g_ad), abs(g_fd))
            worst = max(worst, err)
    return worst
