"""Regular 2D grids and the fields sampled on them."""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .scenario import ScalingTransform


class Grid2(BaseModel):
    """
    Node-centered grid; node (i, j) sits at (x0 + i*dx, y0 + j*dy).

    Fields on the grid are arrays of shape [nx, ny] indexed [i, j].
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    nx: int = Field(..., ge=1)
    ny: int = Field(..., ge=1)
    dx: float = Field(..., gt=0.0)
    dy: float = Field(..., gt=0.0)
    x0: float = 0.0
    y0: float = 0.0

    @classmethod
    def point(cls, x: float, y: float) -> "Grid2":
        """Single node at (x, y); the spacings are placeholders."""
        return cls(nx=1, ny=1, dx=1.0, dy=1.0, x0=x, y0=y)

    @classmethod
    def covering(cls, x_min: float, x_max: float, y_min: float, y_max: float, nx: int, ny: int) -> "Grid2":
        """Grid whose outer nodes lie on the given box."""
        if not (x_max > x_min and y_max > y_min):
            raise ValueError("grid box must have positive extent")
        if nx < 2 or ny < 2:
            raise ValueError("a covering grid needs at least 2 nodes per axis")
        return cls(
            nx=nx,
            ny=ny,
            dx=(x_max - x_min) / (nx - 1),
            dy=(y_max - y_min) / (ny - 1),
            x0=x_min,
            y0=y_min,
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def box(self) -> Tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max)."""
        return (
            self.x0,
            self.x0 + self.dx * (self.nx - 1),
            self.y0,
            self.y0 + self.dy * (self.ny - 1),
        )

    def scaled(self, xf: ScalingTransform) -> "Grid2":
        """Same nodes expressed in training coordinates."""
        mx, my = xf.axis("x"), xf.axis("y")
        return Grid2(
            nx=self.nx,
            ny=self.ny,
            dx=self.dx * mx.factor,
            dy=self.dy * my.factor,
            x0=float(mx.scale(self.x0)),
            y0=float(my.scale(self.y0)),
        )

    def unscaled(self, xf: ScalingTransform) -> "Grid2":
        """Same nodes expressed in physical coordinates."""
        mx, my = xf.axis("x"), xf.axis("y")
        return Grid2(
            nx=self.nx,
            ny=self.ny,
            dx=self.dx / mx.factor,
            dy=self.dy / my.factor,
            x0=float(mx.unscale(self.x0)),
            y0=float(my.unscale(self.y0)),
        )


@dataclass(frozen=True, eq=False)
class ScalarField2:
    """Values of a level-set function on a grid at one time."""

    time: float
    grid: Grid2
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"field shape {values.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class FieldStack:
    """
    Snapshots of a classical solve in training coordinates.

    ``ignition_time`` holds the scaled time each node first reached psi <= 0,
    NaN where it never did.
    """

    grid: Grid2
    scaling: ScalingTransform
    times: np.ndarray
    fields: np.ndarray
    ignition_time: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        fields = np.asarray(self.fields, dtype=float)
        if times.ndim != 1 or (times.size > 1 and np.any(np.diff(times) <= 0.0)):
            raise ValueError("snapshot times must be strictly increasing")
        if fields.shape != (times.size,) + self.grid.shape:
            raise ValueError(
                f"fields have shape {fields.shape}, expected {(times.size,) + self.grid.shape}"
            )
        if np.shape(self.ignition_time) != self.grid.shape:
            raise ValueError("ignition-time field does not match grid")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "ignition_time", np.asarray(self.ignition_time, dtype=float))

    def __len__(self) -> int:
        return self.times.size

    @property
    def physical_times(self) -> np.ndarray:
        return self.scaling.axis("t").unscale(self.times)

    @property
    def physical_grid(self) -> Grid2:
        return self.grid.unscaled(self.scaling)

    def physical_ignition_time(self) -> np.ndarray:
        return self.scaling.axis("t").unscale(self.ignition_time)

    def index_of(self, t_phys: float, rtol: float = 1e-9) -> Optional[int]:
        """Index of the snapshot recorded at physical time ``t_phys``, if any."""
        phys = self.physical_times
        scale = max(1.0, float(np.max(np.abs(phys)))) if phys.size else 1.0
        hits = np.flatnonzero(np.abs(phys - t_phys) <= rtol * scale)
        return int(hits[0]) if hits.size else None

    def snapshot(self, index: int) -> ScalarField2:
        """Snapshot ``index`` with time and grid in physical units."""
        return ScalarField2(
            time=float(self.physical_times[index]),
            grid=self.physical_grid,
            values=self.fields[index],
        )

    def fuel_fraction_at(self, t_phys: float, burn_time: float) -> np.ndarray:
        """Fuel fraction field F at physical time ``t_phys``."""
        from firepinn.services.classical import fuel_fraction

        return fuel_fraction(t_phys, self.physical_ignition_time(), burn_time)
