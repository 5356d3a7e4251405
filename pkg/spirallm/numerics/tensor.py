"""Reverse-mode differentiation over numpy buffers.

Every op returns an ``NdValue`` that remembers its parents and a closure
mapping the output gradient to parent gradients. ``backward`` walks the
recorded graph in reverse topological order. Recording is skipped inside
``no_grad()`` so frozen inference builds no graph at all.
"""

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import DimensionError, NumericError, UsageError

ArrayLike = Union["NdValue", np.ndarray, float, int]

_state = threading.local()

MASK_VALUE = -1e9


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


def default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


@contextmanager
def no_grad():
    """Disable graph recording on the current thread."""
    previous = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@contextmanager
def check_mode():
    """Create parameters in 64-bit precision, for gradient verification."""
    previous = default_dtype()
    _state.dtype = np.dtype(np.float64)
    try:
        yield
    finally:
        _state.dtype = previous


class NdValue:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: Tuple["NdValue", ...] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
        op: str = "leaf",
    ):
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(default_dtype())
        self.data = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.op = op

    def __repr__(self) -> str:
        return f"NdValue(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Populate ``grad`` on every reachable node that requires it."""
        if self.data.size != 1:
            raise UsageError(f"backward needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise UsageError("loss does not depend on any trainable value")

        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # interior buffers are not needed once propagated
                    node.grad = None

    # operator sugar
    def __add__(self, other: ArrayLike) -> "NdValue":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: ArrayLike) -> "NdValue":
        return add(self, scale(as_value(other, self.dtype), -1.0))

    def __rsub__(self, other: ArrayLike) -> "NdValue":
        return add(as_value(other, self.dtype), scale(self, -1.0))

    def __mul__(self, other: ArrayLike) -> "NdValue":
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "NdValue":
        return scale(self, -1.0)

    def __matmul__(self, other: "NdValue") -> "NdValue":
        return matmul(self, other)

    def __getitem__(self, index) -> "NdValue":
        return slice_(self, index)


def as_value(x: ArrayLike, dtype: Optional[np.dtype] = None) -> NdValue:
    if isinstance(x, NdValue):
        return x
    return NdValue(np.asarray(x, dtype=dtype or default_dtype()))


def parameter(
    rng: np.random.Generator,
    shape: Sequence[int],
    std: float = 0.02,
    init: str = "normal",
) -> NdValue:
    """A trainable leaf in the current default precision."""
    dtype = default_dtype()
    if init == "zeros":
        data = np.zeros(shape, dtype=dtype)
    elif init == "ones":
        data = np.ones(shape, dtype=dtype)
    else:
        data = (rng.standard_normal(shape) * std).astype(dtype)
    return NdValue(data, requires_grad=True, op="param")


def _result(
    data: np.ndarray,
    parents: Tuple[NdValue, ...],
    backward: Callable[[np.ndarray], None],
    op: str,
) -> NdValue:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by {op}")
    track = grad_enabled() and any(p.requires_grad for p in parents)
    if not track:
        return NdValue(data, op=op)
    return NdValue(data, requires_grad=True, parents=parents, backward=backward, op=op)


def _accumulate(node: NdValue, grad: np.ndarray) -> None:
    if not node.requires_grad:
        return
    grad = grad.astype(node.dtype, copy=False)
    if node.grad is None:
        node.grad = grad.copy()
    else:
        node.grad = node.grad + grad


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` back down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: NdValue, b: NdValue, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


def add(a: ArrayLike, b: ArrayLike) -> NdValue:
    a = as_value(a)
    b = as_value(b, a.dtype)
    _broadcast_shape(a, b, "add")

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), backward, "add")


def mul(a: ArrayLike, b: ArrayLike) -> NdValue:
    a = as_value(a)
    b = as_value(b, a.dtype)
    _broadcast_shape(a, b, "mul")

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward, "mul")


def scale(a: NdValue, c: float) -> NdValue:
    def backward(g):
        _accumulate(a, g * c)

    return _result(a.data * a.dtype.type(c), (a,), backward, "scale")


def matmul(a: NdValue, b: NdValue) -> NdValue:
    """Batched matrix product with numpy broadcasting over leading axes."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")

    def backward(g):
        _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _result(a.data @ b.data, (a, b), backward, "matmul")


def concat(values: Sequence[NdValue], axis: int = -1) -> NdValue:
    values = list(values)
    try:
        data = np.concatenate([v.data for v in values], axis=axis)
    except ValueError as e:
        raise DimensionError(f"concat: {e}") from e
    sizes = np.cumsum([v.shape[axis] for v in values])[:-1]

    def backward(g):
        for v, part in zip(values, np.split(g, sizes, axis=axis)):
            _accumulate(v, part)

    return _result(data, tuple(values), backward, "concat")


def slice_(a: NdValue, index) -> NdValue:
    try:
        data = a.data[index]
    except IndexError as e:
        raise DimensionError(f"slice: {e}") from e

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        _accumulate(a, full)

    return _result(np.array(data), (a,), backward, "slice")


def reshape(a: NdValue, shape: Sequence[int]) -> NdValue:
    try:
        data = a.data.reshape(shape)
    except ValueError as e:
        raise DimensionError(f"reshape: {e}") from e

    def backward(g):
        _accumulate(a, g.reshape(a.shape))

    return _result(data, (a,), backward, "reshape")


def transpose(a: NdValue, axes: Sequence[int]) -> NdValue:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        _accumulate(a, np.transpose(g, inverse))

    return _result(np.transpose(a.data, axes), (a,), backward, "transpose")


def sum_(a: NdValue, axis=None, keepdims: bool = False) -> NdValue:
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape))

    return _result(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), backward, "sum")


def mean(a: NdValue, axis=None, keepdims: bool = False) -> NdValue:
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return scale(sum_(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def embedding(table: NdValue, ids: np.ndarray) -> NdValue:
    """Gather rows of ``table``; gradients scatter-add back into it."""
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise DimensionError(f"embedding ids must be integers, got {ids.dtype}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DimensionError(
            f"embedding ids outside [0, {table.shape[0]}): {ids.min()}..{ids.max()}"
        )

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        _accumulate(table, full)

    return _result(table.data[ids], (table,), backward, "embedding")


def softmax(a: NdValue, axis: int = -1) -> NdValue:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        _accumulate(a, y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return _result(y, (a,), backward, "softmax")


def log_softmax(a: NdValue, axis: int = -1) -> NdValue:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    y = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        _accumulate(a, g - np.exp(y) * g.sum(axis=axis, keepdims=True))

    return _result(y, (a,), backward, "log_softmax")


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: NdValue) -> NdValue:
    s = _stable_sigmoid(a.data)

    def backward(g):
        _accumulate(a, g * s * (1.0 - s))

    return _result(s, (a,), backward, "sigmoid")


def relu(a: NdValue) -> NdValue:
    def backward(g):
        _accumulate(a, g * (a.data > 0))

    return _result(np.maximum(a.data, 0), (a,), backward, "relu")


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a: NdValue) -> NdValue:
    """Tanh approximation of GELU."""
    x = a.data
    t = np.tanh(_GELU_C * (x + 0.044715 * x**3))
    y = 0.5 * x * (1.0 + t)

    def backward(g):
        dt = (1.0 - t**2) * _GELU_C * (1.0 + 3 * 0.044715 * x**2)
        _accumulate(a, g * (0.5 * (1.0 + t) + 0.5 * x * dt))

    return _result(y, (a,), backward, "gelu")


def rms_norm(a: NdValue, weight: Optional[NdValue] = None, eps: float = 1e-6) -> NdValue:
    """Scale-only root-mean-square normalisation over the last axis."""
    x = a.data
    rms = np.sqrt((x * x).mean(axis=-1, keepdims=True) + eps)
    n = x / rms
    w = weight.data if weight is not None else None
    y = n * w if w is not None else n
    parents = (a,) if weight is None else (a, weight)

    def backward(g):
        gn = g * w if w is not None else g
        ga = (gn - n * (gn * n).mean(axis=-1, keepdims=True)) / rms
        _accumulate(a, ga)
        if weight is not None:
            _accumulate(weight, (g * n).reshape(-1, x.shape[-1]).sum(axis=0))

    return _result(y, parents, backward, "rms_norm")


def dropout(
    a: NdValue, p: float, training: bool, rng: Optional[np.random.Generator]
) -> NdValue:
    """Inverted dropout; identity outside training or when ``p == 0``."""
    if not 0.0 <= p < 1.0:
        raise DimensionError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    if rng is None:
        raise UsageError("dropout in training mode needs a random generator")
    keep = (rng.random(a.shape) >= p).astype(a.dtype) / a.dtype.type(1.0 - p)

    def backward(g):
        _accumulate(a, g * keep)

    return _result(a.data * keep, (a,), backward, "dropout")


def cross_entropy(
    logits: NdValue, targets: np.ndarray, mask: Optional[np.ndarray] = None
) -> NdValue:
    """Mean token cross-entropy over unmasked positions.

    Args:
        logits (NdValue): Scores of shape ``(..., V)``.
        targets (np.ndarray): Integer ids of shape ``(...)``.
        mask (np.ndarray, optional): 1 for positions that count, 0 for padding.

    Returns:
        NdValue: Scalar mean of ``-log softmax(logits)[target]``.
    """
    targets = np.asarray(targets)
    if logits.shape[:-1] != targets.shape:
        raise DimensionError(
            f"cross_entropy: logits {logits.shape} do not match targets {targets.shape}"
        )
    if mask is None:
        mask = np.ones(targets.shape, dtype=logits.dtype)
    mask = np.asarray(mask, dtype=logits.dtype)
    count = max(float(mask.sum()), 1.0)

    x = logits.data
    shifted = x - x.max(axis=-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    loss = np.asarray(-(picked * mask).sum() / count, dtype=logits.dtype)

    def backward(g):
        grad = np.exp(logp)
        np.put_along_axis(
            grad,
            targets[..., None],
            np.take_along_axis(grad, targets[..., None], axis=-1) - 1.0,
            axis=-1,
        )
        _accumulate(logits, g * grad * (mask / count)[..., None])

    return _result(loss, (logits,), backward, "cross_entropy")


def bce_with_logits(
    logits: NdValue, labels: np.ndarray, mask: Optional[np.ndarray] = None
) -> NdValue:
    """Mean binary cross-entropy computed from raw logits."""
    labels = np.asarray(labels, dtype=logits.dtype)
    if labels.shape != logits.shape:
        raise DimensionError(
            f"bce_with_logits: logits {logits.shape} do not match labels {labels.shape}"
        )
    if mask is None:
        mask = np.ones(labels.shape, dtype=logits.dtype)
    mask = np.asarray(mask, dtype=logits.dtype)
    count = max(float(mask.sum()), 1.0)
    x = logits.data
    # softplus(x) - y*x, written to stay finite for large |x|
    per_item = np.maximum(x, 0) - x * labels + np.log1p(np.exp(-np.abs(x)))
    loss = np.asarray((per_item * mask).sum() / count, dtype=logits.dtype)

    def backward(g):
        _accumulate(logits, g * (_stable_sigmoid(x) - labels) * mask / count)

    return _result(loss, (logits,), backward, "bce_with_logits")


def stack_grads(values: Iterable[NdValue]) -> float:
    """Global L2 norm of the gradients currently held by ``values``."""
    total = 0.0
    for v in values:
        if v.grad is not None:
            total += float(np.sum(v.grad.astype(np.float64) ** 2))
    return float(np.sqrt(total))
