"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every differentiable op appends its output to the active :class:`Tape`;
:func:`backward` walks that tape in exact reverse order.  Gradients are
accumulated into ``Tensor.grad`` (call :meth:`Tensor.zero_grad` or
:meth:`Tape.clear` with ``zero_grads=True`` between steps).

Example::

    >>> x = Tensor([[1.0, 2.0]], requires_grad=True)
    >>> backward(sum(x * x) * 0.5)
    >>> x.grad
    array([[1., 2.]])
"""
from __future__ import annotations

import contextlib
import warnings
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, DegenerateRowWarning, DimensionError, NumericError

SELU_SCALE = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772


class Tape:
    """Ordered record of executed differentiable operations."""

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []
        self._ids: set[int] = set()

    def record(self, node: "Tensor") -> None:
        self.nodes.append(node)
        self._ids.add(id(node))

    def __contains__(self, node: "Tensor") -> bool:
        return id(node) in self._ids

    def __len__(self) -> int:
        return len(self.nodes)

    def clear(self, zero_grads: bool = False, params: Iterable["Tensor"] = ()) -> None:
        """Forget recorded ops. Parameter values are never touched."""
        self.nodes.clear()
        self._ids.clear()
        if zero_grads:
            for p in params:
                p.zero_grad()


_active_tape = Tape()
_grad_enabled = True


def get_tape() -> Tape:
    return _active_tape


@contextlib.contextmanager
def use_tape(tape: Tape):
    global _active_tape
    prev, _active_tape = _active_tape, tape
    try:
        yield tape
    finally:
        _active_tape = prev


@contextlib.contextmanager
def no_grad():
    """Disable recording; results are plain constants."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __truediv__(self, o): return div(self, o)
    def __rtruediv__(self, o): return div(o, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, o): return matmul(self, o)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(arr: np.ndarray, op: str) -> None:
    # a finite sum proves every entry finite; only overflow needs the full scan
    if not np.isfinite(np.add.reduce(arr, axis=None)) and not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite value produced by {op}")


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.name = None
    out._parents = ()
    out._backward = None
    needs = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    out.grad = None
    if needs:
        out._parents = tuple(parents)
        out._backward = backward_fn
        _active_tape.record(out)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------- arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None),
                 "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    if np.any(b.data == 0):
        raise NumericError("division by zero")
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)),
                 "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _make(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T if a.requires_grad else None,
                            a.data.T @ g if b.requires_grad else None),
                 "matmul")


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def spmm(op, h) -> Tensor:
    """Constant (sparse or dense) matrix times a tensor; gradient flows into ``h`` only."""
    h = as_tensor(h)
    if op.shape[1] != h.shape[0]:
        raise DimensionError(f"spmm: operator {op.shape} vs tensor {h.shape}")
    return _make(np.asarray(op @ h.data), (h,), lambda g: (np.asarray(op.T @ g),), "spmm")


def take_rows(a, idx) -> Tensor:
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(a.data[idx], (a,), bw, "take_rows")


# ---------------------------------------------------------------- pointwise

def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise NumericError("log of non-positive value")
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise NumericError("sqrt of negative value")
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def square(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def relu(a) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    return _make(np.where(pos, a.data, 0.0), (a,), lambda g: (g * pos,), "relu")


def elu(a, alpha: float = 1.0) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    em1 = np.expm1(np.minimum(a.data, 0.0))
    out = np.where(pos, a.data, alpha * em1)
    return _make(out, (a,), lambda g: (g * np.where(pos, 1.0, alpha * (em1 + 1.0)),), "elu")


def selu(a) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    em1 = np.expm1(np.minimum(a.data, 0.0))
    out = SELU_SCALE * np.where(pos, a.data, SELU_ALPHA * em1)
    d = SELU_SCALE * np.where(pos, 1.0, SELU_ALPHA * (em1 + 1.0))
    return _make(out, (a,), lambda g: (g * d,), "selu")


def silu(a) -> Tensor:
    a = as_tensor(a)
    sig = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    out = a.data * sig
    return _make(out, (a,), lambda g: (g * (sig * (1.0 + a.data * (1.0 - sig))),), "silu")


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu, "elu": elu, "selu": selu, "silu": silu,
}


# ---------------------------------------------------------------- reductions

def sum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(np.asarray(out), (a,), bw, "sum")


def mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def frobenius_norm(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(np.sum(a.data * a.data))
    # subgradient 0 at the origin
    scale = 0.0 if out == 0 else 1.0 / out
    return _make(np.asarray(out), (a,), lambda g: (g * a.data * scale,), "frobenius_norm")


def trace_quadratic(s, m) -> Tensor:
    """Tr(SᵀMS) for dense ``m`` (constant or differentiable)."""
    s, m = as_tensor(s), as_tensor(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[1] != s.shape[0]:
        raise DimensionError(f"trace_quadratic: S {s.shape} vs M {m.shape}")
    ms = m.data @ s.data
    out = np.asarray(np.sum(s.data * ms))
    return _make(out, (s, m),
                 lambda g: (g * (ms + m.data.T @ s.data), g * (s.data @ s.data.T)),
                 "trace_quadratic")


# ---------------------------------------------------------------- row-wise

def rowwise_softmax(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"rowwise_softmax expects n×K with n,K ≥ 1, got {a.shape}")
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)
    return _make(out, (a,),
                 lambda g: (out * (g - np.sum(g * out, axis=1, keepdims=True)),),
                 "rowwise_softmax")


def log_softmax(a) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse
    p = np.exp(out)
    return _make(out, (a,), lambda g: (g - p * g.sum(axis=1, keepdims=True),), "log_softmax")


def logsumexp_rows(a) -> Tensor:
    a = as_tensor(a)
    mx = a.data.max(axis=1, keepdims=True)
    e = np.exp(a.data - mx)
    se = e.sum(axis=1, keepdims=True)
    out = (mx + np.log(se))[:, 0]
    return _make(out, (a,), lambda g: (g[:, None] * e / se,), "logsumexp_rows")


def l2_normalize_rows(a) -> Tensor:
    """Scale each row to unit norm; all-zero rows stay zero (with a warning)."""
    a = as_tensor(a)
    norms = np.sqrt(np.sum(a.data * a.data, axis=1, keepdims=True))
    zero = norms[:, 0] == 0
    if np.any(zero):
        warnings.warn(f"{int(zero.sum())} zero-norm row(s) mapped to zero", DegenerateRowWarning,
                      stacklevel=2)
    safe = np.where(norms == 0, 1.0, norms)
    out = a.data / safe

    def bw(g):
        proj = np.sum(out * g, axis=1, keepdims=True)
        return ((g - out * proj) / safe,)

    return _make(out, (a,), bw, "l2_normalize_rows")


def cosine_matrix(a, b) -> Tensor:
    """Pairwise cosine similarity between the rows of ``a`` and ``b``."""
    return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)))


# ---------------------------------------------------------------- backward

def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every reachable leaf tensor.

    Leaves are tensors created with ``requires_grad=True`` (parameters and
    inputs); intermediate results carry no accumulator.
    """
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise ContractError("backward requires a scalar tensor")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor that requires grad")
    if loss._backward is not None and loss not in _active_tape:
        raise ContractError("loss was not produced on the active tape")

    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {id(loss): loss} if loss._backward is None else {}
    for node in reversed(_active_tape.nodes):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pending[key] + pg if key in pending else pg
            if parent._backward is None:
                leaves[key] = parent
    for key, leaf in leaves.items():
        leaf.grad = leaf.grad + pending[key]
