"""Reverse-mode autodiff over numpy float64 arrays.

Parameter gradients are obtained by taping the batched forward pass of a
network (including the derivative-carrying streams) and sweeping the graph
backwards. Nodes hold whole arrays, so the graph stays small (order hundreds
of nodes per loss evaluation) even for large batches.
"""

from __future__ import annotations

import numpy as np


class Var:
    """One node of the computation graph: a float64 array plus its vjp."""

    __slots__ = ("value", "grad", "_parents", "_vjp")

    # keep numpy from consuming Var in mixed expressions; defer to __r*__
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    # -- graph walk ------------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into .grad over the whole graph.

        self must be scalar-sized. Grad arrays match each node's shape.
        """
        if self.value.size != 1:
            raise ValueError("backward() needs a scalar node")
        order = _topo(self)
        self.grad = np.ones_like(self.value)
        for node in order:
            if node.grad is None or node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(node.grad)):
                if pg is None or not isinstance(parent, Var):
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.value)
                parent.grad += pg

    # -- operators ---------------------------------------------------------

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
        return mul(self, -1.0)

    def __pow__(self, n):
        return power(self, n)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return asum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return amean(self, axis, keepdims)

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


def _topo(root):
    """Nodes reachable from root, root first, parents after children."""
    seen = set()
    post = []
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            post.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if isinstance(p, Var) and id(p) not in seen:
                stack.append((p, False))
    return post[::-1]


def value_of(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _unbroadcast(g, shape):
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- arithmetic --------------------------------------------------------------


def add(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.add(a, b)
    av, bv = value_of(a), value_of(b)

    def vjp(g):
        return _unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)

    return Var(av + bv, (a, b), vjp)


def sub(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.subtract(a, b)
    av, bv = value_of(a), value_of(b)

    def vjp(g):
        return _unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)

    return Var(av - bv, (a, b), vjp)


def mul(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.multiply(a, b)
    av, bv = value_of(a), value_of(b)

    def vjp(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return Var(av * bv, (a, b), vjp)


def div(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.divide(a, b)
    av, bv = value_of(a), value_of(b)

    def vjp(g):
        return (_unbroadcast(g / bv, av.shape),
                _unbroadcast(-g * av / (bv * bv), bv.shape))

    return Var(av / bv, (a, b), vjp)


def power(a, n):
    """a ** n for a constant real exponent n."""
    if not isinstance(a, Var):
        return np.power(a, n)
    av = a.value

    def vjp(g):
        return (g * n * np.power(av, n - 1),)

    return Var(np.power(av, n), (a,), vjp)


def matmul(a, b):
    """Matrix product; the right operand must be 2-d (weights)."""
    av, bv = value_of(a), value_of(b)
    if bv.ndim != 2:
        raise ValueError("matmul rhs must be 2-d")
    if not isinstance(a, Var) and not isinstance(b, Var):
        return av @ bv
    out = av @ bv

    def vjp(g):
        ga = g @ bv.T
        gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return Var(out, (a, b), vjp)


def _is_fancy(key):
    parts = key if isinstance(key, tuple) else (key,)
    return any(isinstance(p, (list, np.ndarray)) for p in parts)


def getitem(a, key):
    av = a.value
    out = av[key]
    fancy = _is_fancy(key)  # fancy keys may repeat targets: scatter-add

    def vjp(g):
        z = np.zeros_like(av)
        if fancy:
            np.add.at(z, key, g)
        else:
            z[key] += g
        return (z,)

    return Var(out, (a,), vjp)


def reshape(a, shape):
    if not isinstance(a, Var):
        return np.reshape(a, shape)
    av = a.value

    def vjp(g):
        return (g.reshape(av.shape),)

    return Var(av.reshape(shape), (a,), vjp)


def concat(parts, axis=0):
    """Concatenate arrays/Vars along an axis."""
    vals = [value_of(p) for p in parts]
    out = np.concatenate(vals, axis=axis)
    if not any(isinstance(p, Var) for p in parts):
        return out
    splits = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Var(out, tuple(parts), vjp)


def asum(a, axis=None, keepdims=False):
    if not isinstance(a, Var):
        return np.sum(a, axis=axis, keepdims=keepdims)
    av = a.value

    def vjp(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        return (np.broadcast_to(gg, av.shape).copy(),)

    return Var(np.sum(av, axis=axis, keepdims=keepdims), (a,), vjp)


def amean(a, axis=None, keepdims=False):
    av = value_of(a)
    if axis is None:
        n = av.size
    else:
        n = av.shape[axis] if isinstance(axis, int) else int(
            np.prod([av.shape[i] for i in axis]))
    return asum(a, axis, keepdims) / float(n)


# -- elementwise math --------------------------------------------------------


def _unary(a, f, df):
    if not isinstance(a, Var):
        return f(a)
    av = a.value
    out = f(av)

    def vjp(g):
        return (g * df(av, out),)

    return Var(out, (a,), vjp)


def sin(a):
    return _unary(a, np.sin, lambda v, y: np.cos(v))


def cos(a):
    return _unary(a, np.cos, lambda v, y: -np.sin(v))


def tanh(a):
    return _unary(a, np.tanh, lambda v, y: 1.0 - y * y)


def exp(a):
    return _unary(a, np.exp, lambda v, y: y)


def sinh(a):
    return _unary(a, np.sinh, lambda v, y: np.cosh(v))


def cosh(a):
    return _unary(a, np.cosh, lambda v, y: np.sinh(v))


def log(a):
    return _unary(a, np.log, lambda v, y: 1.0 / v)


def sqrt(a):
    return _unary(a, np.sqrt, lambda v, y: 0.5 / y)
