"""
Exact input-derivatives of a DenseNet and exact parameter-gradients of
objectives built from them.

The forward pass propagates, next to the activations, one tangent per input
axis (first derivatives) and optionally a few second-order tangents for
selected input pairs. An objective is written against a ``Jet`` of tape
nodes; the tape returns cotangents for the value, the Jacobian and the
second derivatives, and ``backward_jet`` pushes those back through the
tangent recursion to the weights and biases. No finite differences are
involved anywhere.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from firepinn.errors import NonFiniteError
from firepinn.models.network import DenseNet, layer_slices
from firepinn.services import tape
from firepinn.services.tape import Node

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class Jet:
    """
    Network outputs with their input-derivatives over a batch.

    ``value`` is [N, m], ``jacobian`` is [k, N, m] (one slab per input axis)
    and ``second`` is [P, N, m] for the requested input ``pairs``. Fields are
    plain arrays or tape nodes; the accessors work on both.
    """

    value: object
    jacobian: object
    second: Optional[object] = None
    pairs: Tuple[Pair, ...] = ()

    def output(self, i: int):
        return self.value[:, i]

    def derivative(self, i: int, axis: int):
        return self.jacobian[axis, :, i]

    def second_derivative(self, i: int, p: int, q: int):
        key = (min(p, q), max(p, q))
        if key not in self.pairs:
            raise KeyError(f"second derivative for inputs {key} was not propagated")
        return self.second[self.pairs.index(key), :, i]


@dataclass
class _LayerCache:
    inputs: np.ndarray
    tangents: np.ndarray
    second: Optional[np.ndarray]
    z_tangents: np.ndarray
    z_second: Optional[np.ndarray]
    activated: Optional[np.ndarray]


def _normalize_pairs(pairs: Sequence[Pair], n_inputs: int) -> Tuple[Pair, ...]:
    out = []
    for p, q in pairs:
        if not (0 <= p < n_inputs and 0 <= q < n_inputs):
            raise ValueError(f"input pair {(p, q)} out of range for {n_inputs} inputs")
        key = (min(p, q), max(p, q))
        if key not in out:
            out.append(key)
    return tuple(out)


def _as_batch(net: DenseNet, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_inputs:
        raise ValueError(
            f"input has shape {np.shape(inputs)}, network expects {net.n_inputs} inputs"
        )
    return x


def _activation_derivatives(name: str, a: np.ndarray, order: int):
    """Return (s', s'', s''') of the activation expressed through its output a."""
    if name == "tanh":
        d1 = 1.0 - a * a
        d2 = -2.0 * a * d1
        d3 = -2.0 * d1 * d1 + 4.0 * a * a * d1 if order >= 3 else None
    else:
        d1 = a * (1.0 - a)
        d2 = d1 * (1.0 - 2.0 * a)
        d3 = d2 * (1.0 - 2.0 * a) - 2.0 * d1 * d1 if order >= 3 else None
    return d1, d2, d3


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def forward(net: DenseNet, inputs) -> np.ndarray:
    """
    Evaluate the network.

    A single input vector of length k gives a length-m vector; a batch
    [N, k] gives [N, m].
    """
    single = np.ndim(inputs) == 1
    a = _as_batch(net, inputs)
    n_layers = len(net.weights)
    for index, (w, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ w.T + b
        if index < n_layers - 1:
            a = _activate(net.activation, a)
    return a[0] if single else a


def _forward_with_cache(net: DenseNet, x: np.ndarray, pairs: Tuple[Pair, ...]):
    n, k = x.shape
    a = x
    tangents = np.broadcast_to(np.eye(k)[:, None, :], (k, n, k)).copy()
    second = np.zeros((len(pairs), n, k)) if pairs else None
    caches: List[_LayerCache] = []
    n_layers = len(net.weights)
    p_idx = np.array([p for p, _ in pairs], dtype=int)
    q_idx = np.array([q for _, q in pairs], dtype=int)

    for index, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        z_tan = tangents @ w.T
        z_sec = second @ w.T if second is not None else None
        if index < n_layers - 1:
            act = _activate(net.activation, z)
            d1, d2, _ = _activation_derivatives(net.activation, act, 2)
            new_tan = d1 * z_tan
            new_sec = None
            if z_sec is not None:
                new_sec = d2 * z_tan[p_idx] * z_tan[q_idx] + d1 * z_sec
        else:
            act, new_tan, new_sec = z, z_tan, z_sec
        caches.append(
            _LayerCache(
                inputs=a,
                tangents=tangents,
                second=second,
                z_tangents=z_tan,
                z_second=z_sec,
                activated=act if index < n_layers - 1 else None,
            )
        )
        a, tangents, second = act, new_tan, new_sec
    return Jet(value=a, jacobian=tangents, second=second, pairs=pairs), caches


def forward_jet(net: DenseNet, inputs, pairs: Sequence[Pair] = ()) -> Jet:
    """Outputs, Jacobian and requested second input-derivatives over a batch."""
    x = _as_batch(net, inputs)
    jet, _ = _forward_with_cache(net, x, _normalize_pairs(pairs, net.n_inputs))
    return jet


def input_gradient(net: DenseNet, inputs) -> np.ndarray:
    """
    Exact Jacobian d(output)/d(input).

    A single input gives an [m, k] matrix; a batch [N, k] gives [N, m, k].
    """
    single = np.ndim(inputs) == 1
    jet = forward_jet(net, inputs)
    jac = np.transpose(jet.jacobian, (1, 2, 0))
    return jac[0] if single else jac


def backward_jet(
    net: DenseNet,
    inputs,
    value_bar: np.ndarray,
    jacobian_bar: Optional[np.ndarray] = None,
    second_bar: Optional[np.ndarray] = None,
    pairs: Sequence[Pair] = (),
    _caches: Optional[List[_LayerCache]] = None,
) -> np.ndarray:
    """
    Gradient with respect to the ParamVector given cotangents of a Jet.

    Cotangent shapes mirror the ``Jet`` fields; missing ones are zero.
    """
    x = _as_batch(net, inputs)
    pairs = _normalize_pairs(pairs, net.n_inputs)
    caches = _caches
    if caches is None:
        _, caches = _forward_with_cache(net, x, pairs)
    n, k = x.shape
    p_idx = [p for p, _ in pairs]
    q_idx = [q for _, q in pairs]

    a_bar = np.asarray(value_bar, dtype=float)
    tan_bar = np.zeros((k, n, net.n_outputs)) if jacobian_bar is None else np.asarray(jacobian_bar, dtype=float)
    sec_bar = None
    if pairs:
        sec_bar = np.zeros((len(pairs), n, net.n_outputs)) if second_bar is None else np.asarray(second_bar, dtype=float)

    grad = np.zeros(net.n_parameters)
    slices = layer_slices(net.layer_sizes)
    for index in range(len(caches) - 1, -1, -1):
        cache = caches[index]
        w = net.weights[index]
        if cache.activated is None:
            z_bar, z_tan_bar, z_sec_bar = a_bar, tan_bar, sec_bar
        else:
            order = 3 if pairs else 2
            d1, d2, d3 = _activation_derivatives(net.activation, cache.activated, order)
            zt = cache.z_tangents
            z_bar = a_bar * d1 + d2 * np.sum(tan_bar * zt, axis=0)
            z_tan_bar = tan_bar * d1
            z_sec_bar = None
            if pairs:
                zp, zq = zt[p_idx], zt[q_idx]
                z_bar = z_bar + d3 * np.sum(sec_bar * zp * zq, axis=0)
                z_bar = z_bar + d2 * np.sum(sec_bar * cache.z_second, axis=0)
                for slot, (p, q) in enumerate(pairs):
                    z_tan_bar[p] += d2 * sec_bar[slot] * zt[q]
                    z_tan_bar[q] += d2 * sec_bar[slot] * zt[p]
                z_sec_bar = sec_bar * d1

        w_bar = z_bar.T @ cache.inputs + np.einsum("dno,dni->oi", z_tan_bar, cache.tangents)
        if pairs:
            w_bar = w_bar + np.einsum("pno,pni->oi", z_sec_bar, cache.second)
        w_slice, b_slice = slices[index]
        grad[w_slice] = w_bar.reshape(-1)
        grad[b_slice] = z_bar.sum(axis=0)

        if index > 0:
            a_bar = z_bar @ w
            tan_bar = z_tan_bar @ w
            sec_bar = z_sec_bar @ w if pairs else None
    return grad


Objective = Callable[[Jet], object]


def _check_finite(jet: Jet, x: np.ndarray) -> None:
    bad = ~np.all(np.isfinite(jet.value), axis=1)
    bad |= ~np.all(np.isfinite(jet.jacobian), axis=(0, 2))
    if jet.second is not None:
        bad |= ~np.all(np.isfinite(jet.second), axis=(0, 2))
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise NonFiniteError("non-finite network derivative", point=x[row])


def evaluate_objective(net: DenseNet, inputs, objective: Objective, pairs: Sequence[Pair] = ()) -> float:
    """Value of ``objective`` on plain arrays, without building a tape."""
    jet = forward_jet(net, inputs, pairs)
    return float(tape.value_of(objective(jet)))


def grad_wrt_params(
    net: DenseNet,
    inputs,
    objective: Objective,
    theta: Optional[np.ndarray] = None,
    pairs: Sequence[Pair] = (),
) -> Tuple[float, np.ndarray]:
    """
    Scalar objective value and its exact gradient over the ParamVector.

    Args:
        net: Network architecture (and parameters unless ``theta`` is given)
        inputs: Batch of collocation points [N, k]
        objective: Maps a Jet of tape nodes to a scalar node
        theta: Optional parameters overriding ``net.theta``
        pairs: Input pairs whose mixed second derivatives the objective uses

    Returns:
        Tuple of (objective value, gradient)

    Raises:
        NonFiniteError: When an output or derivative is non-finite at a point
    """
    if theta is not None:
        net = net.with_parameters(theta)
    x = _as_batch(net, inputs)
    pairs = _normalize_pairs(pairs, net.n_inputs)
    jet, caches = _forward_with_cache(net, x, pairs)
    _check_finite(jet, x)

    value_node = Node(jet.value)
    jac_node = Node(jet.jacobian)
    sec_node = Node(jet.second) if jet.second is not None else None
    loss = objective(Jet(value=value_node, jacobian=jac_node, second=sec_node, pairs=pairs))
    if not isinstance(loss, Node):
        return float(loss), np.zeros(net.n_parameters)
    if not np.isfinite(loss.value):
        raise NonFiniteError("non-finite objective")

    leaves = [value_node, jac_node] + ([sec_node] if sec_node is not None else [])
    cotangents = tape.gradients(loss, leaves)
    grad = backward_jet(
        net,
        x,
        cotangents[0],
        cotangents[1],
        cotangents[2] if sec_node is not None else None,
        pairs,
        _caches=caches,
    )
    return float(loss.value), grad
