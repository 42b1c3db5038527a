"""Exception hierarchy for firepinn.

Library code raises these; only ``main`` turns them into exit codes.
"""
from __future__ import annotations

from typing import Optional, Sequence


class FirePinnError(Exception):
    """Base class for all firepinn failures."""


class ScenarioError(FirePinnError):
    """Raised when a scenario or study document is malformed or invalid."""

    def __init__(self, message: str, path: Optional[str] = None) -> None:
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NonFiniteError(FirePinnError):
    """Raised when a NaN or infinity appears at a collocation point."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None) -> None:
        self.point = tuple(float(v) for v in point) if point is not None else None
        if self.point is not None:
            message = f"{message} at point {self.point}"
        super().__init__(message)


class DivergenceError(FirePinnError):
    """Raised when a training loop produces a non-finite loss."""

    def __init__(self, message: str, iteration: int) -> None:
        self.iteration = iteration
        super().__init__(f"{message} (iteration {iteration})")


class CFLError(FirePinnError):
    """Raised when a time step violates the stability bound."""


class DiagnosticsError(FirePinnError):
    """Raised when a diagnostic quantity leaves its physical range."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None) -> None:
        self.point = tuple(float(v) for v in point) if point is not None else None
        if self.point is not None:
            message = f"{message} at point {self.point}"
        super().__init__(message)


class DomainMismatchError(FirePinnError):
    """Raised when two level-set sources do not cover the same domain."""

    def __init__(self, box_a: Sequence[float], box_b: Sequence[float]) -> None:
        self.box_a = tuple(box_a)
        self.box_b = tuple(box_b)
        super().__init__(
            f"domains do not match: {self.box_a} vs {self.box_b} "
            "(x_min, x_max, y_min, y_max)"
        )


class EmptyFirelineError(FirePinnError):
    """Raised when a distance is requested between empty point sets."""


class ArtifactError(FirePinnError):
    """Raised when an input or output artifact cannot be read or written."""

    def __init__(self, message: str, path: Optional[str] = None) -> None:
        self.path = path
        super().__init__(f"{message}: {path}" if path else message)
