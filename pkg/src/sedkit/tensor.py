"""Dense float64 tensors with reverse-mode automatic differentiation.

This is deliberately small: just enough machinery to make the losses in
this package differentiable and checkable against central finite
differences. Values are contiguous float64 numpy arrays; the graph is an
explicit :class:`Tape` whose nodes are appended in forward order, so
creation order is already a topological order.

Conventions:

* constants are built with ``Tensor(data)`` and are never tracked;
* differentiable leaves are built with ``tape.variable(data)``;
* an op output is recorded on a tape iff at least one input is tracked;
* a tape stays usable after ``backward``; each call recomputes gradients
  from scratch (no accumulation across calls).

Binary ops require equal shapes or a size-1 ("scalar") operand. There is
no general broadcasting on purpose: every image-shaped quantity in this
package shares one shape per resolution level.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

_EW_BINARY = ("add", "sub", "mul", "div")
_EW_UNARY = ("exp", "log", "abs", "neg")
_EW_SCALAR = ("scalar-mul", "scalar-add")


class _Node:
    __slots__ = ("op", "inputs", "grad_fn", "shape")

    def __init__(self, op, inputs, grad_fn, shape):
        self.op = op
        self.inputs = inputs
        self.grad_fn = grad_fn
        self.shape = shape


class Tape:
    """Ordered record of differentiable operations.

    ``nodes[i]`` was created before ``nodes[j]`` for i < j, and every
    node's inputs precede it, so a single reverse sweep in ``backward``
    visits nodes in valid reverse-topological order.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.gradients: Optional[list[Optional[np.ndarray]]] = None

    def variable(self, data) -> "Tensor":
        """Register a differentiable leaf holding a copy of ``data``."""
        t = Tensor(data, tape=self, node_id=len(self.nodes))
        self.nodes.append(_Node("leaf", (), None, t.shape))
        return t

    def __len__(self):
        return len(self.nodes)


class Tensor:
    """Immutable dense float64 array, optionally linked to a tape node."""

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data, tape: Optional[Tape] = None, node_id: Optional[int] = None):
        arr = np.array(data, dtype=np.float64, order="C")
        arr.setflags(write=False)
        self.data = arr
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def requires_grad(self) -> bool:
        return self.tape is not None

    @property
    def grad(self) -> Optional[np.ndarray]:
        """Gradient from the most recent ``backward`` on this tensor's tape."""
        if self.tape is None or self.tape.gradients is None:
            return None
        return self.tape.gradients[self.node_id]

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        if self.size != 1:
            raise ValueError(f"item() requires a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        tracked = f", node_id={self.node_id}" if self.tape is not None else ""
        return f"Tensor(shape={self.shape}{tracked})"

    # operator sugar; all routing goes through the module-level ops
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __abs__(self):
        return absolute(self)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _check_no_nan(op: str, out: np.ndarray) -> np.ndarray:
    if np.isnan(out).any():
        raise FloatingPointError(f"{op}: NaN in result")
    return out


def _result(op: str, out_data: np.ndarray, inputs: Sequence[Tensor],
            grad_fn: Callable) -> Tensor:
    """Wrap ``out_data``; record a node if any input is tracked."""
    out_data = _check_no_nan(op, np.asarray(out_data, dtype=np.float64))
    tapes = {t.tape for t in inputs if t.tape is not None}
    if not tapes:
        return Tensor(out_data)
    if len(tapes) > 1:
        raise ValueError(f"{op}: operands belong to different tapes")
    tape = tapes.pop()
    node_id = len(tape.nodes)
    ids = tuple(t.node_id if t.tape is tape else None for t in inputs)
    out = Tensor(out_data, tape=tape, node_id=node_id)
    tape.nodes.append(_Node(op, ids, grad_fn, out.shape))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    # only scalar broadcast exists, so a shape mismatch means "sum everything"
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


def _binary_check(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# elementwise ops

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_check("add", a, b)

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result("add", a.data + b.data, (a, b), grad_fn)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_check("sub", a, b)

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result("sub", a.data - b.data, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_check("mul", a, b)
    ad, bd = a.data, b.data

    def grad_fn(g):
        return _unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)

    return _result("mul", ad * bd, (a, b), grad_fn)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_check("div", a, b)
    if (b.data == 0).any():
        raise ZeroDivisionError("div: division by zero")
    ad, bd = a.data, b.data

    def grad_fn(g):
        return _unbroadcast(g / bd, a.shape), _unbroadcast(-g * ad / (bd * bd), b.shape)

    return _result("div", ad / bd, (a, b), grad_fn)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def grad_fn(g):
        return (-g,)

    return _result("neg", -a.data, (a,), grad_fn)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)

    def grad_fn(g):
        return (g * out,)

    return _result("exp", out, (a,), grad_fn)


def log(a) -> Tensor:
    a = _as_tensor(a)
    if (a.data <= 0).any():
        raise ValueError("log: non-positive value")
    ad = a.data

    def grad_fn(g):
        return (g / ad,)

    return _result("log", np.log(ad), (a,), grad_fn)


def absolute(a) -> Tensor:
    """|a|, with the subgradient at 0 defined as 0."""
    a = _as_tensor(a)
    sign = np.sign(a.data)

    def grad_fn(g):
        return (g * sign,)

    return _result("abs", np.abs(a.data), (a,), grad_fn)


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = _as_tensor(a)
    pos = a.data >= 0

    def grad_fn(g):
        return (np.where(pos, g, slope * g),)

    return _result("leaky_relu", np.where(pos, a.data, slope * a.data), (a,), grad_fn)


def elementwise(op_kind: str, a, b=None) -> Tensor:
    """Dispatch an elementwise op by name.

    ``op_kind`` is one of add/sub/mul/div/exp/log/abs/neg/scalar-mul/
    scalar-add; binary kinds take two tensors (equal shapes or a scalar
    operand), scalar kinds take a tensor and a Python number.
    """
    if op_kind in _EW_BINARY:
        if b is None:
            raise ValueError(f"elementwise: {op_kind} needs two operands")
        return {"add": add, "sub": sub, "mul": mul, "div": div}[op_kind](a, b)
    if op_kind in _EW_UNARY:
        if b is not None:
            raise ValueError(f"elementwise: {op_kind} takes one operand")
        return {"exp": exp, "log": log, "abs": absolute, "neg": neg}[op_kind](a)
    if op_kind in _EW_SCALAR:
        if not isinstance(b, (int, float)):
            raise ValueError(f"elementwise: {op_kind} needs a Python number")
        return mul(a, float(b)) if op_kind == "scalar-mul" else add(a, float(b))
    raise ValueError(f"elementwise: unknown op kind {op_kind!r}")


# ---------------------------------------------------------------------------
# reductions

def _check_nonempty(op: str, a: Tensor) -> None:
    if a.size == 0:
        raise ValueError(f"{op}: empty reduction")


def sum_(a, axis: Optional[int] = None) -> Tensor:
    a = _as_tensor(a)
    _check_nonempty("sum", a)
    shape = a.shape

    def grad_fn(g):
        if axis is None:
            return (np.full(shape, np.asarray(g).reshape(())),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _result("sum", np.asarray(a.data.sum(axis=axis)), (a,), grad_fn)


def mean(a, axis: Optional[int] = None) -> Tensor:
    a = _as_tensor(a)
    _check_nonempty("mean", a)
    shape = a.shape
    n = a.size if axis is None else shape[axis]

    def grad_fn(g):
        if axis is None:
            return (np.full(shape, np.asarray(g).reshape(()) / n),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy() / n,)

    return _result("mean", np.asarray(a.data.mean(axis=axis)), (a,), grad_fn)


def _nondiff_reduce(op: str, a, axis) -> Tensor:
    a = _as_tensor(a)
    _check_nonempty(op, a)
    if a.requires_grad:
        raise ValueError(f"{op}: non-differentiable reduction on a taped tensor; detach first")
    fn = np.max if op == "max" else np.min
    return Tensor(np.asarray(fn(a.data, axis=axis)))


def reduce(op_kind: str, a, axis: Optional[int] = None) -> Tensor:
    """Dispatch a reduction by name: sum/mean (differentiable), min/max (not)."""
    if op_kind == "sum":
        return sum_(a, axis)
    if op_kind == "mean":
        return mean(a, axis)
    if op_kind in ("min", "max"):
        return _nondiff_reduce(op_kind, a, axis)
    raise ValueError(f"reduce: unknown op kind {op_kind!r}")


# ---------------------------------------------------------------------------
# structural and fused ops

def softmax(a, axis: int) -> Tensor:
    """Stable softmax along ``axis``; output sums to 1 along that axis."""
    a = _as_tensor(a)
    if not np.isfinite(a.data).all():
        raise ValueError("softmax: input must be finite")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _result("softmax", out, (a,), grad_fn)


def gather(a, indices) -> Tensor:
    """Select elements of flattened ``a`` at ``indices`` (1-D int array)."""
    a = _as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= a.size):
        raise IndexError("gather: index out of range")
    shape = a.shape

    def grad_fn(g):
        full = np.zeros(int(np.prod(shape)))
        np.add.at(full, idx, g)
        return (full.reshape(shape),)

    return _result("gather", a.data.reshape(-1)[idx], (a,), grad_fn)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.shape

    def grad_fn(g):
        return (np.asarray(g).reshape(old),)

    return _result("reshape", a.data.reshape(shape), (a,), grad_fn)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    """Stack equal-shape tensors along a new axis."""
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ValueError("stack: need at least one tensor")
    if any(t.shape != ts[0].shape for t in ts):
        raise ValueError("stack: shape mismatch")

    def grad_fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(ts)))

    return _result("stack", np.stack([t.data for t in ts], axis=axis), ts, grad_fn)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def grad_fn(g):
        return g @ bd.T, ad.T @ g

    return _result("matmul", ad @ bd, (a, b), grad_fn)


def affine(x, w, b) -> Tensor:
    """x @ w + b with a per-row bias; one node instead of three."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"affine: incompatible shapes {x.shape} @ {w.shape}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"affine: bias shape {b.shape} != ({w.shape[1]},)")
    xd, wd = x.data, w.data

    def grad_fn(g):
        return g @ wd.T, xd.T @ g, g.sum(axis=0)

    return _result("affine", xd @ wd + b.data, (x, w, b), grad_fn)


# ---------------------------------------------------------------------------
# backward pass and finite-difference checking

def backward(root: Tensor) -> None:
    """Accumulate gradients of the scalar ``root`` into its tape.

    Gradients sum over all paths to each node. The tape stays usable:
    calling backward again (on any scalar node) replaces the stored
    gradients.
    """
    if root.tape is None:
        raise ValueError("backward: tensor is not on a tape")
    if root.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.shape}")
    tape = root.tape
    grads: list[Optional[np.ndarray]] = [None] * len(tape.nodes)
    grads[root.node_id] = np.ones(root.shape)
    for nid in range(root.node_id, -1, -1):
        g = grads[nid]
        node = tape.nodes[nid]
        if g is None or node.grad_fn is None:
            continue
        for iid, ig in zip(node.inputs, node.grad_fn(g)):
            if iid is None or ig is None:
                continue
            if ig.shape != tape.nodes[iid].shape:
                raise AssertionError(
                    f"backward: grad shape {ig.shape} != value shape {tape.nodes[iid].shape} "
                    f"for op {node.op}")
            if grads[iid] is None:
                grads[iid] = ig.copy() if isinstance(ig, np.ndarray) else np.asarray(ig)
            else:
                grads[iid] = grads[iid] + ig
    tape.gradients = grads


def grad_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps one tensor to a scalar tensor and must be finite and
    differentiable in an ``h``-neighborhood of ``x``. The numeric side
    never touches the tape, so it is independent of the analytic path.
    """
    base = np.array(getattr(x, "data", x), dtype=np.float64)
    tape = Tape()
    xv = tape.variable(base)
    y = f(xv)
    if not isinstance(y, Tensor) or y.size != 1:
        raise ValueError("grad_check: f must return a scalar tensor")
    if np.isnan(y.data).any():
        raise FloatingPointError("grad_check: f returned NaN")
    backward(y)
    analytic = xv.grad
    if analytic is None:
        analytic = np.zeros_like(base)

    flat = base.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + h
        yp = f(Tensor(bumped.reshape(base.shape))).item()
        bumped[i] = flat[i] - h
        ym = f(Tensor(bumped.reshape(base.shape))).item()
        if np.isnan(yp) or np.isnan(ym):
            raise FloatingPointError("grad_check: f returned NaN during differencing")
        numeric[i] = (yp - ym) / (2 * h)

    numeric = numeric.reshape(base.shape)
    denom = np.maximum(1e-8, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
