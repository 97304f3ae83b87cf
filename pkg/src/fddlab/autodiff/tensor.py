"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tensor` wraps a numpy array and, when produced by an operation,
remembers the producing op and its parents.  Calling :func:`backward` walks
the graph once in reverse topological order.  Every backward rule is itself
written in terms of tensor operations, so passing ``create_graph=True``
yields gradients that live on the tape and can be differentiated again
(double backpropagation).
"""

from __future__ import annotations

import warnings
from contextlib import contextmanager

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "no_grad",
    "grad_mode",
    "is_grad_enabled",
    "backward",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "tsum",
    "tmean",
    "power",
    "sqrt",
    "exp",
    "log",
    "tanh",
    "sigmoid",
    "relu",
    "leaky_relu",
    "reshape",
    "transpose",
    "broadcast_to",
    "concat",
    "getitem",
    "unfold1d",
    "fold1d",
]


class ShapeError(ValueError):
    """Raised when operand shapes are inconsistent with an operation."""


_GRAD_ENABLED = True


@contextmanager
def grad_mode(enabled: bool):
    """Temporarily enable or disable graph recording."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = bool(enabled)
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def no_grad():
    """Context manager disabling graph recording."""
    return grad_mode(False)


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """Node in the computation graph holding a dense float64 array.

    A tensor with no producing operation is a leaf; gradients accumulate
    only into leaves flagged ``requires_grad``.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "_op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None  # numpy accumulator, filled by Tensor.backward()
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None
        self._op: str | None = None

    # -- construction -------------------------------------------------

    @staticmethod
    def _result(data, parents, vjp, op):
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._vjp = vjp
            out._op = op
        return out

    # -- introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def is_leaf(self) -> bool:
        return self._vjp is None

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A leaf tensor sharing this tensor's values, cut from the graph."""
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = self._op or ("leaf" if not self.requires_grad else "param")
        return f"Tensor({tag}, shape={self.shape})"

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __pow__(self, k):
        return power(self, k)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def backward(self) -> None:
        """Accumulate gradients of this scalar into ``.grad`` of all
        reachable leaves flagged ``requires_grad``."""
        grads = _run_backward(self, create_graph=False)
        for node, g in grads.items():
            if node.is_leaf() and node.requires_grad:
                if node.grad is None:
                    node.grad = g.data.copy()
                else:
                    node.grad += g.data


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# graph traversal
# ---------------------------------------------------------------------------


def _toposort(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS; each node appears exactly once."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, int]] = [(root, 0)]
    while stack:
        node, child = stack[-1]
        if child == 0 and id(node) in seen:
            stack.pop()
            continue
        seen.add(id(node))
        if child < len(node._parents):
            stack[-1] = (node, child + 1)
            parent = node._parents[child]
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, 0))
        else:
            stack.pop()
            order.append(node)
    return order


def _run_backward(loss: Tensor, create_graph: bool) -> dict:
    if loss.size != 1:
        raise ValueError(
            f"backward requires a scalar loss, got shape {loss.shape}"
        )
    topo = _toposort(loss)
    grads: dict[int, Tensor] = {id(loss): Tensor(np.ones_like(loss.data))}
    by_id: dict[int, Tensor] = {id(n): n for n in topo}
    owned: set[int] = set()  # ids whose gradient buffer we may add into in place
    with grad_mode(create_graph):
        for node in reversed(topo):
            g = grads.get(id(node))
            if g is None or node._vjp is None:
                continue
            parent_grads = node._vjp(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                pid = id(parent)
                prev = grads.get(pid)
                if prev is None:
                    grads[pid] = pg
                elif create_graph:
                    grads[pid] = add(prev, pg)
                else:
                    # first-order path: accumulate raw arrays, copying once
                    if pid not in owned:
                        prev = Tensor(prev.data.copy())
                        grads[pid] = prev
                        owned.add(pid)
                    prev.data += pg.data
    return {by_id[i]: g for i, g in grads.items() if i in by_id}


def backward(loss: Tensor, wrt, create_graph: bool = False) -> list[Tensor]:
    """Gradients of a scalar ``loss`` with respect to each tensor in ``wrt``.

    With ``create_graph=True`` the returned gradients are live graph nodes,
    so expressions built from them can be differentiated a second time.
    An unreachable entry yields a zero gradient and a warning.
    """
    single = isinstance(wrt, Tensor)
    targets = [wrt] if single else list(wrt)
    grads = _run_backward(loss, create_graph)
    out = []
    for t in targets:
        g = grads.get(t)
        if g is None:
            warnings.warn(
                f"tensor {t!r} is unreachable from the loss; returning zeros",
                RuntimeWarning,
                stacklevel=2,
            )
            g = Tensor(np.zeros_like(t.data))
        out.append(g)
    return out


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------


def _broadcast_pair(a: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    if a.shape == b.shape:
        return a, b
    shape = np.broadcast_shapes(a.shape, b.shape)
    return broadcast_to(a, shape), broadcast_to(b, shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _broadcast_pair(_as_tensor(a), _as_tensor(b))
    return Tensor._result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _broadcast_pair(_as_tensor(a), _as_tensor(b))
    return Tensor._result(
        a.data - b.data, (a, b), lambda g: (g, neg(g)), "sub"
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _broadcast_pair(_as_tensor(a), _as_tensor(b))
    return Tensor._result(
        a.data * b.data, (a, b), lambda g: (mul(g, b), mul(g, a)), "mul"
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    a, b = _broadcast_pair(_as_tensor(a), _as_tensor(b))
    out = Tensor._result(a.data / b.data, (a, b), None, "div")
    if out.requires_grad:
        out._vjp = lambda g: (div(g, b), neg(div(mul(g, out), b)))
    return out


def neg(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    return Tensor._result(-a.data, (a,), lambda g: (neg(g),), "neg")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(
            f"matmul expects 2-D operands, got {a.shape} @ {b.shape}"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.shape} @ {b.shape}"
        )
    return Tensor._result(
        a.data @ b.data,
        (a, b),
        lambda g: (matmul(g, transpose(b, None)), matmul(transpose(a, None), g)),
        "matmul",
    )


def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    data = a.data.sum(axis=axes, keepdims=keepdims)
    in_shape = a.shape

    def vjp(g):
        gg = g
        if not keepdims and a.ndim:
            kshape = tuple(
                1 if i in axes else s for i, s in enumerate(in_shape)
            )
            gg = reshape(gg, kshape)
        return (broadcast_to(gg, in_shape),)

    return Tensor._result(data, (a,), vjp, "sum")


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    count = 1
    for ax in axes:
        count *= a.shape[ax]
    return mul(tsum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / count))


def power(a: Tensor, k: float) -> Tensor:
    """Elementwise power with a constant exponent."""
    a = _as_tensor(a)
    k = float(k)
    out = Tensor._result(a.data**k, (a,), None, "pow")
    if out.requires_grad:
        out._vjp = lambda g: (mul(g, mul(power(a, k - 1.0), Tensor(k))),)
    return out


def sqrt(a: Tensor) -> Tensor:
    """Elementwise square root; the subgradient at 0 is taken as 0."""
    a = _as_tensor(a)
    out = Tensor._result(np.sqrt(a.data), (a,), None, "sqrt")
    if out.requires_grad:
        out._vjp = lambda g: (mul(g, mul(_safe_recip(out), Tensor(0.5))),)
    return out


def _safe_recip(a: Tensor) -> Tensor:
    """1/x where x > 0, 0 at x == 0; backward uses the same guarded form."""
    data = np.where(a.data > 0.0, 1.0 / np.where(a.data > 0.0, a.data, 1.0), 0.0)
    out = Tensor._result(data, (a,), None, "safe_recip")
    if out.requires_grad:
        out._vjp = lambda g: (neg(mul(g, mul(out, out))),)
    return out


def exp(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor._result(np.exp(a.data), (a,), None, "exp")
    if out.requires_grad:
        out._vjp = lambda g: (mul(g, out),)
    return out


def log(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    return Tensor._result(
        np.log(a.data), (a,), lambda g: (div(g, a),), "log"
    )


def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor._result(np.tanh(a.data), (a,), None, "tanh")
    if out.requires_grad:
        out._vjp = lambda g: (mul(g, sub(Tensor(1.0), mul(out, out))),)
    return out


def sigmoid(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor._result(data, (a,), None, "sigmoid")
    if out.requires_grad:
        out._vjp = lambda g: (mul(g, mul(out, sub(Tensor(1.0), out))),)
    return out


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    mask = Tensor((a.data > 0).astype(np.float64))
    return Tensor._result(
        np.maximum(a.data, 0.0), (a,), lambda g: (mul(g, mask),), "relu"
    )


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    a = _as_tensor(a)
    pos = a.data > 0
    weight = Tensor(np.where(pos, 1.0, slope))
    return Tensor._result(
        np.where(pos, a.data, slope * a.data),
        (a,),
        lambda g: (mul(g, weight),),
        "leaky_relu",
    )


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(shape)
    in_shape = a.shape
    return Tensor._result(
        a.data.reshape(shape), (a,), lambda g: (reshape(g, in_shape),), "reshape"
    )


def transpose(a: Tensor, axes) -> Tensor:
    a = _as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor._result(
        a.data.transpose(axes),
        (a,),
        lambda g: (transpose(g, inverse),),
        "transpose",
    )


def broadcast_to(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(shape)
    if a.shape == shape:
        return a
    in_shape = a.shape
    nadd = len(shape) - len(in_shape)

    def vjp(g):
        axes = tuple(range(nadd)) + tuple(
            nadd + i
            for i, (s_in, s_out) in enumerate(zip(in_shape, shape[nadd:]))
            if s_in == 1 and s_out != 1
        )
        r = tsum(g, axis=axes, keepdims=False) if axes else g
        return (reshape(r, in_shape),)

    return Tensor._result(
        np.broadcast_to(a.data, shape).copy(), (a,), vjp, "broadcast"
    )


def concat(parts, axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    axis = axis % parts[0].ndim
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        outs = []
        for i in range(len(parts)):
            key = tuple(
                slice(offsets[i], offsets[i + 1]) if d == axis else slice(None)
                for d in range(parts[0].ndim)
            )
            outs.append(getitem(g, key))
        return tuple(outs)

    return Tensor._result(
        np.concatenate([p.data for p in parts], axis=axis),
        tuple(parts),
        vjp,
        "concat",
    )


def getitem(a: Tensor, key) -> Tensor:
    """Basic indexing (ints and slices); backward scatters into zeros."""
    a = _as_tensor(a)
    in_shape = a.shape
    return Tensor._result(
        a.data[key].copy() if isinstance(a.data[key], np.ndarray) else a.data[key],
        (a,),
        lambda g: (_scatter(g, in_shape, key),),
        "getitem",
    )


def _scatter(g: Tensor, shape, key) -> Tensor:
    g = _as_tensor(g)
    data = np.zeros(shape, dtype=np.float64)
    data[key] = g.data
    return Tensor._result(
        data, (g,), lambda gg: (getitem(gg, key),), "scatter"
    )


def unfold1d(a: Tensor, width: int) -> Tensor:
    """Sliding windows of a [N, C, L] tensor -> [N, L-width+1, C, width].

    Linear gather; its adjoint is :func:`fold1d`, so arbitrarily high
    derivative orders remain exact.
    """
    a = _as_tensor(a)
    if a.ndim != 3:
        raise ShapeError(f"unfold1d expects [N, C, L], got {a.shape}")
    n, c, length = a.shape
    if width > length:
        raise ShapeError(
            f"window width {width} exceeds signal length {length}"
        )
    view = np.lib.stride_tricks.sliding_window_view(a.data, width, axis=2)
    data = np.ascontiguousarray(view.transpose(0, 2, 1, 3))
    return Tensor._result(
        data, (a,), lambda g: (fold1d(g, length),), "unfold1d"
    )


def fold1d(u: Tensor, length: int) -> Tensor:
    """Adjoint of :func:`unfold1d`: scatter-add windows back to [N, C, L]."""
    u = _as_tensor(u)
    n, nwin, c, width = u.shape
    data = np.zeros((n, c, length), dtype=np.float64)
    src = u.data.transpose(0, 2, 1, 3)  # [N, C, nwin, width]
    for j in range(width):
        data[:, :, j : j + nwin] += src[:, :, :, j]
    return Tensor._result(
        data, (u,), lambda g: (unfold1d(g, width),), "fold1d"
    )
