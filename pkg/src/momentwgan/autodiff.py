"""Minimal reverse-mode differentiation over numpy arrays.

Every op returns a :class:`Node` holding its value and a closure that maps
the output adjoint to input adjoints.  :func:`backward` walks the graph in
reverse topological order and accumulates adjoints into leaves created with
``requires_grad=True``.

Only the ops needed by the critic, generator and losses are provided:
``add, mul, matmul, conv1d, leaky_relu, dropout, softmax, mean, power_int,
abs, transpose, reshape``.  Broadcasting is limited to a trailing-suffix rule
(bias vectors and scalars) in :func:`add` and :func:`mul`.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    """Select the floating type used for new nodes (float64 or float32)."""
    global _DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dtype}; use float64 or float32")
    _DTYPE = dtype.type


def get_default_dtype():
    return _DTYPE


@contextmanager
def precision(dtype):
    old = _DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(old)


class Node:
    """A value in the computation graph plus its adjoint."""

    __slots__ = ("value", "grad", "requires_grad", "parents", "backward_fn", "op", "name")

    def __init__(self, value, requires_grad=False, parents=(), backward_fn=None, op="leaf", name=None):
        value = np.asarray(value, dtype=_DTYPE)
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.op = op
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_leaf(self):
        return not self.parents

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Node(self.value.copy())

    def item(self):
        if self.value.size != 1:
            raise ValueError(f"item() needs a single-element node, got shape {self.shape}")
        return float(self.value.reshape(()))

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Node<{self.op}{label}>(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power_int(self, exponent)

    def __abs__(self):
        return abs_(self)


def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def _check_finite(op, value):
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"{op}: non-finite value in output")
    return value


def _make(op, value, parents, backward_fn):
    return Node(_check_finite(op, value), parents=parents, backward_fn=backward_fn, op=op)


def _is_suffix(small, big):
    return len(small) <= len(big) and tuple(big[len(big) - len(small):]) == tuple(small)


def _reduce_to(grad, shape):
    """Sum a broadcast gradient back down to a trailing-suffix shape."""
    if grad.shape == tuple(shape):
        return grad
    lead = grad.ndim - len(shape)
    return grad.sum(axis=tuple(range(lead))).reshape(shape)


def _binary_shapes(op, a, b):
    if a.shape == b.shape or _is_suffix(b.shape, a.shape) or _is_suffix(a.shape, b.shape):
        return
    raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# --------------------------------------------------------------------------
# elementwise and linear ops


def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _binary_shapes("add", a, b)

    def backward_fn(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _make("add", a.value + b.value, (a, b), backward_fn)


def mul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _binary_shapes("mul", a, b)

    def backward_fn(g):
        return _reduce_to(g * b.value, a.shape), _reduce_to(g * a.value, b.shape)

    return _make("mul", a.value * b.value, (a, b), backward_fn)


def neg(a) -> Node:
    a = as_node(a)
    return _make("neg", -a.value, (a,), lambda g: (-g,))


def matmul(a, b) -> Node:
    """``a @ b`` for ``a`` of shape (..., n) and a 2-D ``b`` of shape (n, p)."""
    a, b = as_node(a), as_node(b)
    if b.value.ndim != 2 or a.value.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward_fn(g):
        ga = g @ b.value.T
        a2 = a.value.reshape(-1, a.shape[-1])
        gb = a2.T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return _make("matmul", a.value @ b.value, (a, b), backward_fn)


def same_padding(width: int) -> tuple[int, int]:
    """Zero padding that preserves length; the extra cell goes right."""
    total = width - 1
    left = total // 2
    return left, total - left


def conv1d(x, weight, bias=None) -> Node:
    """Multi-channel 1-D convolution with same padding.

    ``x`` is (batch, length, in_channels), ``weight`` is
    (width, in_channels, out_channels) and ``bias`` is (out_channels,).
    The output is (batch, length, out_channels).
    """
    x, weight = as_node(x), as_node(weight)
    if x.value.ndim != 3 or weight.value.ndim != 3 or x.shape[2] != weight.shape[1]:
        raise ValueError(f"conv1d: incompatible shapes {x.shape} and {weight.shape}")
    b, length, cin = x.shape
    width, _, cout = weight.shape
    left, right = same_padding(width)
    padded = np.pad(x.value, ((0, 0), (left, right), (0, 0)))
    # windows: (b, length, cin, width) -> (b, length, width, cin)
    windows = np.lib.stride_tricks.sliding_window_view(padded, width, axis=1)
    cols = np.ascontiguousarray(windows.transpose(0, 1, 3, 2)).reshape(b * length, width * cin)
    w2 = weight.value.reshape(width * cin, cout)
    out = (cols @ w2).reshape(b, length, cout)
    parents = [x, weight]
    if bias is not None:
        bias = as_node(bias)
        if bias.shape != (cout,):
            raise ValueError(f"conv1d: bias shape {bias.shape} does not match {cout} output channels")
        out = out + bias.value
        parents.append(bias)

    def backward_fn(g):
        g2 = g.reshape(b * length, cout)
        gw = (cols.T @ g2).reshape(width, cin, cout)
        gcols = (g2 @ w2.T).reshape(b, length, width, cin)
        gpad = np.zeros_like(padded)
        for t in range(width):
            gpad[:, t:t + length, :] += gcols[:, :, t, :]
        gx = gpad[:, left:left + length, :]
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return _make("conv1d", out, tuple(parents), backward_fn)


def leaky_relu(x, slope=0.2) -> Node:
    x = as_node(x)
    factor = np.where(x.value > 0, 1.0, slope).astype(x.value.dtype)
    return _make("leaky_relu", x.value * factor, (x,), lambda g: (g * factor,))


def dropout_mask(shape, rate, rng=None, training=True) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``rate``, else 1/(1-rate)."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0:
        return np.ones(shape, dtype=_DTYPE)
    if rng is None:
        raise ValueError("training-mode dropout needs a seeded generator")
    keep = rng.random(shape) >= rate
    return keep.astype(_DTYPE) / (1.0 - rate)


def dropout(x, rate, rng=None, training=True) -> Node:
    x = as_node(x)
    mask = dropout_mask(x.shape, rate, rng, training)
    return _make("dropout", x.value * mask, (x,), lambda g: (g * mask,))


def softmax(x, axis=-1) -> Node:
    x = as_node(x)
    if not -x.value.ndim <= axis < x.value.ndim:
        raise ValueError(f"softmax: axis {axis} invalid for shape {x.shape}")
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _make("softmax", s, (x,), backward_fn)


def mean(x, axis=None) -> Node:
    x = as_node(x)
    if x.value.size == 0:
        raise ValueError("mean: empty input")
    out = x.value.mean(axis=axis)
    count = x.value.size if axis is None else x.shape[axis]

    def backward_fn(g):
        g = np.asarray(g)
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape) / count,)

    return _make("mean", out, (x,), backward_fn)


def power_int(x, exponent: int) -> Node:
    if int(exponent) != exponent or exponent < 1:
        raise ValueError(f"power_int: exponent must be an integer >= 1, got {exponent}")
    exponent = int(exponent)
    x = as_node(x)
    if exponent == 1:
        return _make("power_int", x.value.copy(), (x,), lambda g: (g,))
    lower = x.value ** (exponent - 1)
    return _make("power_int", lower * x.value, (x,), lambda g: (g * exponent * lower,))


def abs_(x) -> Node:
    x = as_node(x)
    sign = np.sign(x.value)
    return _make("abs", np.abs(x.value), (x,), lambda g: (g * sign,))


def transpose(x, axes=None) -> Node:
    x = as_node(x)
    axes = tuple(reversed(range(x.value.ndim))) if axes is None else tuple(axes)
    if sorted(axes) != list(range(x.value.ndim)):
        raise ValueError(f"transpose: axes {axes} invalid for shape {x.shape}")
    inverse = tuple(np.argsort(axes))
    return _make("transpose", x.value.transpose(axes), (x,), lambda g: (g.transpose(inverse),))


def reshape(x, shape) -> Node:
    x = as_node(x)
    try:
        out = x.value.reshape(shape)
    except ValueError:
        raise ValueError(f"reshape: cannot view shape {x.shape} as {tuple(shape)}") from None
    return _make("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


# --------------------------------------------------------------------------
# reverse pass


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Node) -> Node:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every trainable leaf.

    Leaf adjoints accumulate across calls, so zero them between steps.
    Intermediate nodes receive the adjoint of this pass only.
    """
    if root.value.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return root
    adjoints = {id(root): np.ones_like(root.value)}
    for node in reversed(_topological(root)):
        g = adjoints.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        node.grad = g
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            adjoints[key] = pg if key not in adjoints else adjoints[key] + pg
    return root
