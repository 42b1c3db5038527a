"""
Small reverse-mode tape over numpy arrays.

Loss heads (PDE residuals, boundary terms) are written once with the helper
functions below; they run on plain arrays for evaluation and on ``Node``
values when the caller needs cotangents with respect to the network outputs
and their input-derivatives.
"""
from __future__ import annotations

from typing import Callable, Iterable, List, Optional, Tuple, Union

import numpy as np

Backward = Callable[[np.ndarray], np.ndarray]


class Node:
    """A value on the tape plus the local rules that push gradients to its inputs."""

    __slots__ = ("value", "parents", "grad")
    # numpy must defer to our reflected operators instead of broadcasting us
    __array_ufunc__ = None

    def __init__(self, value, parents: Tuple[Tuple["Node", Backward], ...] = ()) -> None:
        self.value = np.asarray(value, dtype=float)
        self.parents = parents
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return Node(-self.value, ((self, lambda g: -g),))

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __getitem__(self, index):
        shape = self.value.shape

        basic = all(isinstance(i, (int, slice, type(None))) for i in (index if isinstance(index, tuple) else (index,)))

        def back(g):
            full = np.zeros(shape)
            if basic:
                full[index] += g
            else:
                np.add.at(full, index, g)
            return full

        return Node(self.value[index], ((self, back),))

    def __repr__(self) -> str:
        return f"Node(shape={self.value.shape})"


Operand = Union[Node, np.ndarray, float]


def is_node(x) -> bool:
    return isinstance(x, Node)


def value_of(x) -> np.ndarray:
    """Underlying array of a Node or array-like."""
    return x.value if isinstance(x, Node) else np.asarray(x, dtype=float)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    grad = np.asarray(grad, dtype=float)
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _binary(a, b, value, grad_a: Backward, grad_b: Backward):
    parents = []
    if isinstance(a, Node):
        parents.append((a, grad_a))
    if isinstance(b, Node):
        parents.append((b, grad_b))
    if not parents:
        return value
    return Node(value, tuple(parents))


def add(a: Operand, b: Operand):
    return _binary(a, b, value_of(a) + value_of(b), lambda g: g, lambda g: g)


def sub(a: Operand, b: Operand):
    return _binary(a, b, value_of(a) - value_of(b), lambda g: g, lambda g: -g)


def mul(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    return _binary(a, b, va * vb, lambda g: g * vb, lambda g: g * va)


def div(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    out = va / vb
    return _binary(a, b, out, lambda g: g / vb, lambda g: -g * out / vb)


def _unary(x, value, local: Callable[[], np.ndarray]):
    if not isinstance(x, Node):
        return value
    d = local()
    return Node(value, ((x, lambda g: g * d),))


def power(x: Operand, exponent: float):
    """x ** exponent for a constant exponent; the slope at x = 0 is taken as 0 for exponent < 1."""
    v = value_of(x)
    out = v ** exponent

    def local():
        if exponent == 1.0:
            return np.ones_like(v)
        safe = np.where(v != 0.0, v, 1.0)
        slope = exponent * safe ** (exponent - 1.0)
        return np.where(v != 0.0, slope, 0.0)

    return _unary(x, out, local)


def square(x: Operand):
    v = value_of(x)
    return _unary(x, v * v, lambda: 2.0 * v)


def sqrt(x: Operand):
    out = np.sqrt(value_of(x))
    return _unary(x, out, lambda: 0.5 / out)


def exp(x: Operand):
    out = np.exp(value_of(x))
    return _unary(x, out, lambda: out)


def log(x: Operand):
    v = value_of(x)
    return _unary(x, np.log(v), lambda: 1.0 / v)


def softplus(x: Operand):
    """log(1 + exp(x)), evaluated without overflow."""
    v = value_of(x)
    return _unary(x, np.logaddexp(0.0, v), lambda: 0.5 * (1.0 + np.tanh(0.5 * v)))


def sigmoid(x: Operand):
    v = value_of(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * v))
    return _unary(x, out, lambda: out * (1.0 - out))


def maximum(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    pick_a = va >= vb
    return _binary(a, b, np.where(pick_a, va, vb), lambda g: g * pick_a, lambda g: g * ~pick_a)


def minimum(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    pick_a = va <= vb
    return _binary(a, b, np.where(pick_a, va, vb), lambda g: g * pick_a, lambda g: g * ~pick_a)


def where(mask, a: Operand, b: Operand):
    """Select elementwise; ``mask`` is a constant boolean array."""
    mask = np.asarray(mask, dtype=bool)
    va, vb = value_of(a), value_of(b)
    return _binary(a, b, np.where(mask, va, vb), lambda g: g * mask, lambda g: g * ~mask)


def total(x: Operand):
    """Sum of all entries."""
    v = value_of(x)
    if not isinstance(x, Node):
        return np.sum(v)
    shape = v.shape
    return Node(np.sum(v), ((x, lambda g: np.broadcast_to(g, shape).copy()),))


def mean(x: Operand):
    n = max(value_of(x).size, 1)
    return total(x) / float(n)


def _topological(root: Node) -> List[Node]:
    order: List[Node] = []
    seen = set()
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
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: Node) -> None:
    """Accumulate d(root)/d(node) into ``node.grad`` for every node on the tape."""
    order = _topological(root)
    for node in order:
        node.grad = None
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.grad is None:
            continue
        for parent, rule in node.parents:
            contribution = _unbroadcast(rule(node.grad), parent.value.shape)
            parent.grad = contribution if parent.grad is None else parent.grad + contribution


def gradients(root: Node, leaves: Iterable[Node]) -> List[np.ndarray]:
    """Run backward from ``root`` and return each leaf's gradient (zeros if unused)."""
    backward(root)
    return [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves]
