"""Problem definition: domain, fuel, wind, terrain, ignition and scaling."""
import hashlib
from typing import Literal, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .polynomial import SpaceTimePolynomial

FROZEN = ConfigDict(frozen=True, extra="forbid")


class Domain3(BaseModel):
    """Physical space-time box: seconds for t, meters for x and y."""

    model_config = FROZEN

    t_min: float = Field(..., description="Start time in seconds")
    t_max: float = Field(..., description="End time in seconds")
    x_min: float = Field(..., description="West edge in meters")
    x_max: float = Field(..., description="East edge in meters")
    y_min: float = Field(..., description="South edge in meters")
    y_max: float = Field(..., description="North edge in meters")

    @model_validator(mode="after")
    def check_extents(self) -> "Domain3":
        """Validate that every axis has positive extent."""
        for axis in ("t", "x", "y"):
            lo, hi = getattr(self, f"{axis}_min"), getattr(self, f"{axis}_max")
            if not hi > lo:
                raise ValueError(f"{axis}_max must be greater than {axis}_min")
        return self

    def bounds(self, axis: str) -> Tuple[float, float]:
        return getattr(self, f"{axis}_min"), getattr(self, f"{axis}_max")


class AxisMap(BaseModel):
    """Affine map of one axis: scaled = (physical - offset) * factor."""

    model_config = FROZEN

    name: str
    offset: float = 0.0
    factor: float = Field(default=1.0, gt=0.0, description="Scaled units per physical unit")

    def scale(self, value):
        return (np.asarray(value, dtype=float) - self.offset) * self.factor

    def unscale(self, value):
        return np.asarray(value, dtype=float) / self.factor + self.offset


class ScalingTransform(BaseModel):
    """
    Per-axis affine maps carrying physical coordinates to training coordinates.

    Points are arrays whose last dimension follows ``axes`` order.
    """

    model_config = FROZEN

    axes: Tuple[AxisMap, ...] = Field(..., min_length=1)
    target_extent: float = Field(default=10.0, gt=0.0)

    @classmethod
    def identity(cls, names: Sequence[str] = ("t", "x", "y")) -> "ScalingTransform":
        """Transform that leaves every coordinate unchanged."""
        return cls(axes=tuple(AxisMap(name=n) for n in names))

    @classmethod
    def fit(
        cls,
        bounds: Sequence[Tuple[str, float, float]],
        target_extent: float = 10.0,
    ) -> "ScalingTransform":
        """Map each (name, lo, hi) interval onto [0, target_extent]."""
        axes = tuple(
            AxisMap(name=name, offset=lo, factor=target_extent / (hi - lo))
            for name, lo, hi in bounds
        )
        return cls(axes=axes, target_extent=target_extent)

    @classmethod
    def for_domain(cls, domain: Domain3, target_extent: float = 10.0) -> "ScalingTransform":
        return cls.fit(
            [(axis, *domain.bounds(axis)) for axis in ("t", "x", "y")], target_extent
        )

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def axis(self, name: str) -> AxisMap:
        for a in self.axes:
            if a.name == name:
                return a
        raise KeyError(f"no axis named {name!r}")

    def factors(self) -> np.ndarray:
        return np.array([a.factor for a in self.axes])

    def offsets(self) -> np.ndarray:
        return np.array([a.offset for a in self.axes])

    def scale_point(self, point) -> np.ndarray:
        return (np.asarray(point, dtype=float) - self.offsets()) * self.factors()

    def unscale_point(self, point) -> np.ndarray:
        return np.asarray(point, dtype=float) / self.factors() + self.offsets()

    def spread_factor(self) -> float:
        """Multiplier taking a physical spread rate (m/s) to scaled units."""
        return self.axis("x").factor / self.axis("t").factor

    def anisotropy(self) -> float:
        """Ratio of y to x scale factors; 1 for proportional scaling."""
        return self.axis("y").factor / self.axis("x").factor


class FuelParameters(BaseModel):
    """Spread-rate coefficients for one fuel category."""

    model_config = FROZEN

    r0: float = Field(..., ge=0.0, description="Zero-wind spread rate, m/s")
    c: float = Field(..., ge=0.0, description="Wind coefficient")
    b: float = Field(..., gt=0.0, description="Wind exponent")
    e: float = Field(..., gt=0.0, description="Wind cap, m/s")
    d: float = Field(..., ge=0.0, description="Slope coefficient")
    tf: float = Field(..., gt=0.0, description="Fuel burn time, s")
    category: int = Field(default=3, ge=1, le=13, description="Anderson category label")
    closure: Literal["multiplicative", "additive"] = "multiplicative"
    s0: float = Field(default=0.0, ge=0.0, description="Spread-rate floor for the additive closure")


class WindModel(BaseModel):
    """Wind components u(t, x, y), v(t, x, y) in m/s."""

    model_config = FROZEN

    u: SpaceTimePolynomial = Field(default_factory=lambda: SpaceTimePolynomial.constant(0.0))
    v: SpaceTimePolynomial = Field(default_factory=lambda: SpaceTimePolynomial.constant(0.0))

    def evaluate(self, t, x, y) -> Tuple[np.ndarray, np.ndarray]:
        return self.u.evaluate(t, x, y), self.v.evaluate(t, x, y)


class TerrainModel(BaseModel):
    """Elevation z(x, y) in meters."""

    model_config = FROZEN

    z: SpaceTimePolynomial = Field(default_factory=lambda: SpaceTimePolynomial.constant(0.0))
    max_degree: int = Field(default=4, ge=0)

    @model_validator(mode="after")
    def check_degrees(self) -> "TerrainModel":
        """Validate that elevation is static and within the fitted degree."""
        if self.z.degree_t != 0:
            raise ValueError("terrain elevation cannot depend on time")
        if max(self.z.degree_x, self.z.degree_y) > self.max_degree:
            raise ValueError(f"terrain degree exceeds max_degree {self.max_degree}")
        return self

    def elevation(self, x, y) -> np.ndarray:
        return self.z.evaluate(0.0, x, y)

    def gradient(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        return self.z.gradient_xy(0.0, x, y)


class EllipticalCone(BaseModel):
    """One ignition cone sqrt((a(x-x0))^2 + (b(y-y0))^2) - h in scaled units."""

    model_config = FROZEN

    x0: float
    y0: float
    a: float
    b: float
    h: float

    @field_validator("a", "b")
    @classmethod
    def validate_axis_scale(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError("axis scale must be positive")
        return v

    @field_validator("h")
    @classmethod
    def validate_offset(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError("downward offset h must be positive")
        return v


class IgnitionShape(BaseModel):
    """
    Union of elliptical cones, combined by pointwise minimum.

    More than one cone is experimental.
    """

    model_config = FROZEN

    cones: Tuple[EllipticalCone, ...] = Field(..., min_length=1)


class ScenarioConfig(BaseModel):
    """Complete problem statement for one fire."""

    model_config = FROZEN

    name: str = "scenario"
    domain: Domain3
    scaling: ScalingTransform
    fuel: FuelParameters
    wind: WindModel = Field(default_factory=WindModel)
    terrain: TerrainModel = Field(default_factory=TerrainModel)
    ignition: IgnitionShape
    viscosity_eps: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def check_consistency(self) -> "ScenarioConfig":
        """Validate scaling axes and that ignition centers lie inside the domain."""
        if self.scaling.names != ("t", "x", "y"):
            raise ValueError("scaling axes must be (t, x, y)")
        (x_lo, x_hi), (y_lo, y_hi) = self.scaled_bounds("x"), self.scaled_bounds("y")
        tol = 1e-9 * max(1.0, abs(x_hi), abs(y_hi))
        for cone in self.ignition.cones:
            if not (x_lo - tol <= cone.x0 <= x_hi + tol and y_lo - tol <= cone.y0 <= y_hi + tol):
                raise ValueError(
                    f"ignition center ({cone.x0}, {cone.y0}) lies outside the domain"
                )
        return self

    def scaled_bounds(self, axis: str) -> Tuple[float, float]:
        """Bounds of one axis in training coordinates."""
        amap = self.scaling.axis(axis)
        lo, hi = self.domain.bounds(axis)
        return float(amap.scale(lo)), float(amap.scale(hi))

    def scaled_box(self) -> np.ndarray:
        """Array [[t_lo, t_hi], [x_lo, x_hi], [y_lo, y_hi]] in training coordinates."""
        return np.array([self.scaled_bounds(axis) for axis in ("t", "x", "y")])

    def content_hash(self) -> str:
        """sha256 of the canonical JSON form."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


def initial_levelset(shape: IgnitionShape, x, y):
    """
    Initial level-set value at scaled (x, y): minimum over the cones.

    Negative inside the initial fire, zero on the initial fireline.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    values = [
        np.hypot(cone.a * (x - cone.x0), cone.b * (y - cone.y0)) - cone.h
        for cone in shape.cones
    ]
    result = values[0]
    for v in values[1:]:
        result = np.minimum(result, v)
    return result if result.ndim else float(result)


def initial_levelset_gradient(shape: IgnitionShape, x, y) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradient of ``initial_levelset`` at scaled (x, y).

    Where cones overlap the lowest one wins. At a cone apex the gradient is
    taken as zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    best = np.full(np.broadcast(x, y).shape, np.inf)
    gx = np.zeros_like(best)
    gy = np.zeros_like(best)
    for cone in shape.cones:
        dx, dy = x - cone.x0, y - cone.y0
        radius = np.hypot(cone.a * dx, cone.b * dy)
        value = radius - cone.h
        lower = value < best
        safe = np.where(radius > 0.0, radius, 1.0)
        gx = np.where(lower, np.where(radius > 0.0, cone.a**2 * dx / safe, 0.0), gx)
        gy = np.where(lower, np.where(radius > 0.0, cone.b**2 * dy / safe, 0.0), gy)
        best = np.minimum(best, value)
    return gx, gy


def scale_point(xf: ScalingTransform, point) -> np.ndarray:
    """Map a physical point (or array of points) to training coordinates."""
    return xf.scale_point(point)


def unscale_point(xf: ScalingTransform, point) -> np.ndarray:
    """Map a training-coordinate point (or array of points) back to physical units."""
    return xf.unscale_point(point)
