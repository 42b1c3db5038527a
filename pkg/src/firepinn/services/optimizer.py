"""Adam update on a flat parameter vector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LR = 1e-3
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class AdamState:
    """First and second moment estimates plus the step counter."""

    m: np.ndarray
    v: np.ndarray
    iteration: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size), iteration=0)


def adam_step(
    theta: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float = DEFAULT_LR,
    beta1: float = DEFAULT_BETA1,
    beta2: float = DEFAULT_BETA2,
    eps: float = DEFAULT_EPS,
) -> tuple[np.ndarray, AdamState]:
    """
    One bias-corrected Adam step.

    Returns new arrays; ``theta`` and ``state`` are left untouched.
    """
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape or state.m.shape != theta.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape}, grad {grad.shape}, state {state.m.shape}")
    if not lr > 0.0:
        raise ValueError("learning rate must be positive")

    t = state.iteration + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * (grad * grad)
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    denom = np.sqrt(v / bc2) + eps
    new_theta = theta - (lr / bc1) * m / denom
    return new_theta, AdamState(m=m, v=v, iteration=t)
