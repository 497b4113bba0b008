"""
Dense tensors with define-by-run reverse-mode automatic differentiation.

Every differentiable operation records a ``Node`` on the tensor it produces.
Nodes are numbered in construction order, so sorting them in reverse gives a
valid topological order for the backward sweep.
"""

from __future__ import annotations

import itertools
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from swgan_inpaint.errors import GradientError, ShapeError

logger = logging.getLogger(__name__)

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
Axes = Union[None, int, Sequence[int]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_sequence = itertools.count()
_default_dtype = np.dtype(np.float64)
_grad_enabled = True


def set_default_dtype(dtype) -> None:
    """Set the dtype used for tensors created without an explicit dtype."""
    global _default_dtype
    resolved = np.dtype(dtype)
    if resolved not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported tensor dtype {resolved}; use float32 or float64")
    _default_dtype = resolved


@contextmanager
def default_dtype(dtype) -> Iterator[None]:
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


@contextmanager
def no_grad() -> Iterator[None]:
    """Build no graph inside the block; results are constants."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


@dataclass(eq=False)
class Node:
    """Operation record: inputs plus the local gradient rule."""

    op: str
    inputs: Tuple["Tensor", ...]
    backward_fn: BackwardFn
    order: int = field(default_factory=lambda: next(_sequence))


class Tensor:
    """N-dimensional array of reals with an optional gradient slot."""

    def __init__(self, data: ArrayLike, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.array(data, dtype=dtype or _default_dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.producer: Optional[Node] = None

    @classmethod
    def _result(
        cls,
        data: np.ndarray,
        inputs: Tuple["Tensor", ...],
        backward_fn: BackwardFn,
        op: str,
    ) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = _grad_enabled and any(t.requires_grad for t in inputs)
        out.producer = Node(op, inputs, backward_fn) if out.requires_grad else None
        return out

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self.producer is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out.producer = None
        return out

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # -- operators -----------------------------------------------------

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def sum(self, axes: Axes = None, keepdims: bool = False) -> "Tensor":
        return reduce_sum(self, axes, keepdims)

    def mean(self, axes: Axes = None, keepdims: bool = False) -> "Tensor":
        return reduce_mean(self, axes, keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def abs(self) -> "Tensor":
        return abs_(self)

    def backward(self) -> None:
        backward(self)


def as_tensor(value: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    """Wrap constants; tensors pass through unchanged."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


def zeros_like(t: Tensor) -> Tensor:
    return Tensor(np.zeros_like(t.data), dtype=t.dtype)


# -- broadcasting helpers ----------------------------------------------


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a.shape, b.shape))
    except ValueError:
        raise ShapeError(
            f"{op}: shapes {a.shape} and {b.shape} are not broadcast-compatible"
        ) from None


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- element-wise binary ops -------------------------------------------


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "add")

    def backward_fn(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return Tensor._result(a.data + b.data, (a, b), backward_fn, "add")


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "sub")

    def backward_fn(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return Tensor._result(a.data - b.data, (a, b), backward_fn, "sub")


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "mul")

    def backward_fn(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return Tensor._result(a.data * b.data, (a, b), backward_fn, "mul")


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "div")

    def backward_fn(g):
        ga = unbroadcast(g / b.data, a.shape)
        gb = unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return Tensor._result(a.data / b.data, (a, b), backward_fn, "div")


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return Tensor._result(-a.data, (a,), lambda g: (-g,), "neg")


def _pair(a: ArrayLike, b: ArrayLike) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


# -- linear algebra ----------------------------------------------------


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

    def backward_fn(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor._result(a.data @ b.data, (a, b), backward_fn, "matmul")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        data = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError(f"cannot reshape {a.shape} into {tuple(shape)}") from None
    return Tensor._result(data, (a,), lambda g: (g.reshape(a.shape),), "reshape")


# -- reductions --------------------------------------------------------


def _normalize_axes(a: Tensor, axes: Axes) -> Tuple[int, ...]:
    if axes is None:
        return tuple(range(a.ndim))
    if isinstance(axes, int):
        axes = (axes,)
    resolved = []
    for axis in axes:
        if not -a.ndim <= axis < a.ndim:
            raise ShapeError(f"invalid axis {axis} for tensor of shape {a.shape}")
        resolved.append(axis % a.ndim)
    if len(set(resolved)) != len(resolved):
        raise ShapeError(f"repeated axis in {tuple(axes)}")
    return tuple(sorted(resolved))


def reduce_sum(a: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:
    axes_t = _normalize_axes(a, axes)
    kept = tuple(1 if i in axes_t else n for i, n in enumerate(a.shape))

    def backward_fn(g):
        return (np.broadcast_to(g.reshape(kept), a.shape).copy(),)

    data = a.data.sum(axis=axes_t, keepdims=keepdims)
    return Tensor._result(np.asarray(data), (a,), backward_fn, "reduce_sum")


def reduce_mean(a: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:
    axes_t = _normalize_axes(a, axes)
    kept = tuple(1 if i in axes_t else n for i, n in enumerate(a.shape))
    count = int(np.prod([a.shape[i] for i in axes_t], dtype=np.int64))
    if count == 0:
        raise ShapeError(f"mean over empty axes of shape {a.shape}")

    def backward_fn(g):
        return (np.broadcast_to(g.reshape(kept) / count, a.shape).copy(),)

    data = a.data.mean(axis=axes_t, keepdims=keepdims)
    return Tensor._result(np.asarray(data), (a,), backward_fn, "reduce_mean")


# -- element-wise nonlinearities ---------------------------------------


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    # derivative at exactly 0 takes the slope branch
    positive = a.data > 0
    data = np.where(positive, a.data, a.data * slope)

    def backward_fn(g):
        return (np.where(positive, g, g * slope),)

    return Tensor._result(data, (a,), backward_fn, "leaky_relu")


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def backward_fn(g):
        return (g * (1.0 - data * data),)

    return Tensor._result(data, (a,), backward_fn, "tanh")


def abs_(a: Tensor) -> Tensor:
    # np.sign(0) == 0 fixes the subgradient at the kink
    return Tensor._result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def square(a: Tensor) -> Tensor:
    return Tensor._result(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,), "square")


# -- backward sweep ----------------------------------------------------


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable leaf that requires it.

    Leaf gradients accumulate across calls; call ``zero_grad`` to reset.
    """
    if loss.data.size != 1:
        raise GradientError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        logger.debug("backward() on a tensor without requires_grad; nothing to do")
        return

    seed = np.ones_like(loss.data)
    if loss.producer is None:
        _accumulate(loss, seed)
        return

    outputs: Dict[int, Tensor] = {}
    leaves: Dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if t.producer is None:
            leaves[id(t)] = t
            continue
        if t.producer.order in outputs:
            continue
        outputs[t.producer.order] = t
        stack.extend(t.producer.inputs)

    grads: Dict[int, np.ndarray] = {id(loss): seed}
    for order in sorted(outputs, reverse=True):
        out = outputs[order]
        g = grads.pop(id(out), None)
        if g is None:
            continue
        node = out.producer
        for inp, g_in in zip(node.inputs, node.backward_fn(g)):
            if g_in is None or not inp.requires_grad:
                continue
            key = id(inp)
            grads[key] = grads[key] + g_in if key in grads else g_in

    for key, leaf in leaves.items():
        if leaf.requires_grad and key in grads:
            _accumulate(leaf, grads[key])


def _accumulate(leaf: Tensor, g: np.ndarray) -> None:
    g = np.asarray(g, dtype=leaf.dtype).reshape(leaf.shape)
    leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
