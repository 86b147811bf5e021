"""A small reverse-mode differentiation engine over numpy arrays.

Each :class:`Tensor` records its parents and a closure that maps the output
gradient to parent gradients. ``backward`` walks the graph in reverse
topological order. Only first derivatives are supported.
"""

from __future__ import annotations

import numpy as np
from scipy import special


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen = [], set()

        def visit(node):
            if id(node) in seen or not node.requires_grad:
                return
            seen.add(id(node))
            for p in node._parents:
                visit(p)
            order.append(node)

        visit(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    # -- construction helpers -------------------------------------------------
    @staticmethod
    def lift(x) -> Tensor:
        return x if isinstance(x, Tensor) else Tensor(x)

    def _unary(self, value, local):
        return Tensor(value, _parents=(self,), _backward=lambda g: (g * local(),))

    # -- arithmetic -------------------------------------------------------------
    def __add__(self, other):
        other = Tensor.lift(other)
        a, b = self.shape, other.shape
        return Tensor(self.data + other.data, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, _parents=(self,), _backward=lambda g: (-g,))

    def __sub__(self, other):
        return self + (-Tensor.lift(other))

    def __rsub__(self, other):
        return Tensor.lift(other) + (-self)

    def __mul__(self, other):
        other = Tensor.lift(other)
        x, y = self.data, other.data
        return Tensor(x * y, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor.lift(other)
        x, y = self.data, other.data
        return Tensor(x / y, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g / y, x.shape),
                                           _unbroadcast(-g * x / (y * y), y.shape)))

    def __rtruediv__(self, other):
        return Tensor.lift(other) / self

    def __pow__(self, k: float):
        x = self.data
        return self._unary(x ** k, lambda: k * x ** (k - 1))

    def __matmul__(self, other):
        other = Tensor.lift(other)
        x, y = self.data, other.data
        return Tensor(x @ y, _parents=(self, other), _backward=lambda g: (g @ y.T, x.T @ g))

    # -- shape ops ------------------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,), _backward=back)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        old = self.shape
        return Tensor(self.data.reshape(*shape), _parents=(self,), _backward=lambda g: (g.reshape(old),))

    def __getitem__(self, idx):
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor(self.data[idx], _parents=(self,), _backward=back)

    # -- elementwise functions ----------------------------------------------------
    def exp(self):
        v = np.exp(self.data)
        return self._unary(v, lambda: v)

    def log(self):
        x = self.data
        return self._unary(np.log(x), lambda: 1.0 / x)

    def abs(self):
        x = self.data
        return self._unary(np.abs(x), lambda: np.sign(x))

    def sqrt(self):
        v = np.sqrt(self.data)
        return self._unary(v, lambda: 0.5 / v)

    def tanh(self):
        v = np.tanh(self.data)
        return self._unary(v, lambda: 1.0 - v * v)

    def softplus(self):
        x = self.data
        return self._unary(np.logaddexp(0.0, x), lambda: special.expit(x))

    def lgamma(self):
        x = self.data
        return self._unary(special.gammaln(x), lambda: special.digamma(x))

    def digamma(self):
        x = self.data
        return self._unary(special.digamma(x), lambda: special.polygamma(1, x))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [Tensor.lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), _parents=tuple(tensors),
                  _backward=lambda g: tuple(np.split(g, cuts, axis=axis)))


def custom(inputs, value, vjp) -> Tensor:
    """Wrap a precomputed primitive: ``vjp(g)`` returns one gradient per input."""
    return Tensor(value, _parents=tuple(inputs), _backward=vjp)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)
