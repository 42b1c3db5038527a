"""Dense feed-forward network whose parameters live in one flat vector."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Literal, Sequence, Tuple

import numpy as np

Activation = Literal["tanh", "sigmoid"]

DEFAULT_LAYER_SIZES: Tuple[int, ...] = (3, 16, 1)


def parameter_count(layer_sizes: Sequence[int]) -> int:
    """Number of weights and biases: sum of n_i * n_(i+1) + n_(i+1)."""
    return sum(n_in * n_out + n_out for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]))


def layer_slices(layer_sizes: Sequence[int]) -> List[Tuple[slice, slice]]:
    """
    Offsets of each layer's (weight, bias) block inside the flat vector.

    Flatten order is, layer by layer, the weight matrix W (shape
    [n_out, n_in], row-major) followed by the bias vector b (length n_out).
    """
    slices = []
    start = 0
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = slice(start, start + n_in * n_out)
        start = w.stop
        b = slice(start, start + n_out)
        start = b.stop
        slices.append((w, b))
    return slices


@dataclass(frozen=True, eq=False)
class DenseNet:
    """
    Surrogate u(input; theta): tanh (or sigmoid) hidden layers, identity output.

    ``theta`` is the ParamVector; ``weights`` and ``biases`` are read-only
    views into it, so flattening is free and exact.
    """

    layer_sizes: Tuple[int, ...]
    theta: np.ndarray
    activation: Activation = "tanh"
    _views: List[Tuple[np.ndarray, np.ndarray]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise ValueError("layer sizes must list at least two positive dimensions")
        if self.activation not in ("tanh", "sigmoid"):
            raise ValueError(f"unknown activation {self.activation!r}")
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.size != parameter_count(sizes):
            raise ValueError(
                f"parameter vector has {theta.size} entries, layers {sizes} need "
                f"{parameter_count(sizes)}"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError("network parameters must be finite")
        theta.flags.writeable = False
        views = [
            (theta[w].reshape(n_out, n_in), theta[b])
            for (w, b), n_in, n_out in zip(layer_slices(sizes), sizes[:-1], sizes[1:])
        ]
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "_views", views)

    @classmethod
    def initialize(
        cls,
        layer_sizes: Sequence[int] = DEFAULT_LAYER_SIZES,
        activation: Activation = "tanh",
        seed: int = 0,
    ) -> "DenseNet":
        """Glorot-uniform weights, zero biases, from a seeded generator."""
        rng = np.random.default_rng(seed)
        sizes = tuple(layer_sizes)
        theta = np.zeros(parameter_count(sizes))
        for (w, _), n_in, n_out in zip(layer_slices(sizes), sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (n_in + n_out))
            theta[w] = rng.uniform(-limit, limit, size=n_in * n_out)
        return cls(layer_sizes=sizes, theta=theta, activation=activation)

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int] = DEFAULT_LAYER_SIZES, activation: Activation = "tanh") -> "DenseNet":
        return cls(layer_sizes=tuple(layer_sizes), theta=np.zeros(parameter_count(layer_sizes)), activation=activation)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_parameters(self) -> int:
        return self.theta.size

    @property
    def weights(self) -> List[np.ndarray]:
        return [w for w, _ in self._views]

    @property
    def biases(self) -> List[np.ndarray]:
        return [b for _, b in self._views]

    def flatten(self) -> np.ndarray:
        """Copy of the ParamVector."""
        return self.theta.copy()

    def with_parameters(self, theta: np.ndarray) -> "DenseNet":
        """Same architecture, new parameters (unflatten)."""
        return DenseNet(layer_sizes=self.layer_sizes, theta=theta, activation=self.activation)


def flatten_layers(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> np.ndarray:
    """Pack per-layer weights and biases into a ParamVector."""
    parts = []
    for w, b in zip(weights, biases):
        parts.append(np.asarray(w, dtype=float).reshape(-1))
        parts.append(np.asarray(b, dtype=float).reshape(-1))
    return np.concatenate(parts)
