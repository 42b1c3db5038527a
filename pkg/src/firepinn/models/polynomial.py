"""Polynomial inputs for wind and terrain."""
from typing import List, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, Field, model_validator


class SpaceTimePolynomial(BaseModel):
    """
    Polynomial p(t, x, y) = sum c[k, i, j] t^k x^i y^j in physical units.

    Coefficients are stored row-major over (k, i, j), so the flat list has
    (degree_t + 1) * (degree_x + 1) * (degree_y + 1) entries.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    degree_t: int = Field(default=0, ge=0, description="Degree in time")
    degree_x: int = Field(default=0, ge=0, description="Degree in x")
    degree_y: int = Field(default=0, ge=0, description="Degree in y")
    coefficients: List[float] = Field(
        default_factory=lambda: [0.0],
        description="Row-major coefficient list over (t, x, y) powers",
    )

    @model_validator(mode="after")
    def check_coefficient_count(self) -> "SpaceTimePolynomial":
        """Validate that the coefficient list matches the declared degrees."""
        expected = (self.degree_t + 1) * (self.degree_x + 1) * (self.degree_y + 1)
        if len(self.coefficients) != expected:
            raise ValueError(
                f"polynomial declares degrees {self.degrees} and needs "
                f"{expected} coefficients, got {len(self.coefficients)}"
            )
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("polynomial coefficients must be finite")
        return self

    @classmethod
    def constant(cls, value: float) -> "SpaceTimePolynomial":
        """Build a polynomial that is the same everywhere."""
        return cls(coefficients=[float(value)])

    @property
    def degrees(self) -> Tuple[int, int, int]:
        return (self.degree_t, self.degree_x, self.degree_y)

    @property
    def coefficient_array(self) -> np.ndarray:
        shape = (self.degree_t + 1, self.degree_x + 1, self.degree_y + 1)
        return np.asarray(self.coefficients, dtype=float).reshape(shape)

    def evaluate(self, t, x, y) -> np.ndarray:
        """Evaluate at broadcastable arrays of physical (t, x, y)."""
        t, x, y = np.broadcast_arrays(
            np.asarray(t, dtype=float), np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        )
        return P.polyval3d(t, x, y, self.coefficient_array)

    def gradient_xy(self, t, x, y) -> Tuple[np.ndarray, np.ndarray]:
        """Return (dp/dx, dp/dy) at broadcastable physical (t, x, y)."""
        t, x, y = np.broadcast_arrays(
            np.asarray(t, dtype=float), np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        )
        c = self.coefficient_array
        ddx = P.polyval3d(t, x, y, P.polyder(c, axis=1))
        ddy = P.polyval3d(t, x, y, P.polyder(c, axis=2))
        return ddx, ddy
