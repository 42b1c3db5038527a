"""Constants, base state and study settings for the flux-form Euler harness."""
from dataclasses import dataclass
from typing import Any, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

FROZEN = ConfigDict(frozen=True, extra="forbid")

OUTPUT_NAMES: Tuple[str, ...] = ("U", "V", "W", "Omega", "Theta", "phi", "mu", "Q")
RESIDUAL_NAMES: Tuple[str, ...] = ("U", "V", "W", "Theta", "mu", "phi", "Q")


class EulerConstants(BaseModel):
    """Physical constants of the dry atmosphere."""

    model_config = FROZEN

    g: float = Field(default=9.81, gt=0.0, description="Gravity, m/s^2")
    rd: float = Field(default=287.0, gt=0.0, description="Dry gas constant, J/(kg K)")
    gamma: float = Field(default=1.4, gt=1.0, description="cp/cv")
    p0: float = Field(default=1e5, gt=0.0, description="Reference pressure, Pa")


class BaseState(BaseModel):
    """
    Hydrostatic rest state with pressure linear in eta.

    eta runs from 0 at the model top to 1 at the surface, so
    p(eta) = p_top + mu0 * eta and the column mass is mu0.
    """

    model_config = FROZEN

    mu0: float = Field(default=5e4, gt=0.0, description="Dry column mass, Pa")
    p_top: float = Field(default=5e4, gt=0.0, description="Model-top pressure, Pa")
    theta0: float = Field(default=300.0, gt=0.0, description="Potential temperature, K")

    def pressure(self, eta) -> np.ndarray:
        return self.p_top + self.mu0 * np.asarray(eta, dtype=float)

    def alpha_d(self, eta, c: EulerConstants) -> np.ndarray:
        """Inverse dry density from the equation of state at constant theta."""
        return (c.rd * self.theta0 / c.p0) * (c.p0 / self.pressure(eta)) ** (1.0 / c.gamma)

    def phi(self, eta, c: EulerConstants) -> np.ndarray:
        """Geopotential, zero at the surface."""
        kappa = 1.0 - 1.0 / c.gamma
        ps = self.p_top + self.mu0
        coeff = c.rd * self.theta0 / c.p0 ** kappa
        return coeff * (ps ** kappa - self.pressure(eta) ** kappa) / kappa

    def phi_eta(self, eta, c: EulerConstants) -> np.ndarray:
        return -self.mu0 * self.alpha_d(eta, c)

    def phi_eta_eta(self, eta, c: EulerConstants) -> np.ndarray:
        return self.mu0 ** 2 * self.alpha_d(eta, c) / (c.gamma * self.pressure(eta))


class ReferenceScales(BaseModel):
    """Multipliers turning O(1) network outputs into physical departures."""

    model_config = FROZEN

    u: float = Field(default=10.0, gt=0.0, description="Horizontal wind, m/s")
    w: float = Field(default=1.0, gt=0.0, description="Vertical wind, m/s")
    omega: float = Field(default=1e-3, gt=0.0, description="Eta velocity, 1/s")
    theta: float = Field(default=1.0, gt=0.0, description="Potential temperature, K")
    phi: float = Field(default=100.0, gt=0.0, description="Geopotential, m^2/s^2")
    q: float = Field(default=1e-3, gt=0.0, description="Moisture mixing ratio")


class EulerStudyConfig(BaseModel):
    """Settings of one loss-convergence study."""

    model_config = FROZEN

    iterations: int = Field(default=2000)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    interior_batch: int = Field(default=2048, gt=0)
    initial_batch: int = Field(default=512, gt=0)
    ic_weight: float = Field(default=10.0, gt=0.0)
    alpha_floor: float = Field(default=1e-3, gt=0.0, description="Penalty threshold for alpha_d, m^3/kg")
    penalty_weight: float = Field(default=1e3, ge=0.0)
    hidden_layers: Tuple[int, ...] = (32, 32)
    activation: str = "tanh"
    seed: int = Field(default=0, ge=0)
    length: float = Field(default=1e4, gt=0.0, description="Horizontal extent, m")
    duration: float = Field(default=600.0, gt=0.0, description="Time window, s")
    amplitude: float = Field(default=1.0, ge=0.0, description="Parabolic theta perturbation, K")
    moist: bool = False
    window: int = Field(default=100, gt=0, description="Iterations averaged for the verdict")
    reduction_target: float = Field(default=10.0, gt=1.0)
    log_every: int = Field(default=200, gt=0)
    constants: EulerConstants = Field(default_factory=EulerConstants)
    base: BaseState = Field(default_factory=BaseState)
    scales: ReferenceScales = Field(default_factory=ReferenceScales)

    @field_validator("iterations")
    @classmethod
    def validate_iterations(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("iterations must be positive")
        return v

    @field_validator("activation")
    @classmethod
    def validate_activation(cls, v: str) -> str:
        if v not in ("tanh", "sigmoid"):
            raise ValueError(f"unknown activation {v!r}")
        return v

    @field_validator("hidden_layers")
    @classmethod
    def validate_hidden(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(n < 1 for n in v):
            raise ValueError("hidden layer sizes must be positive")
        return v

    @property
    def n_outputs(self) -> int:
        return 8 if self.moist else 7

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return (4,) + tuple(self.hidden_layers) + (self.n_outputs,)

    @property
    def input_scales(self) -> np.ndarray:
        """Physical extent of (t, x, y, eta); inputs are divided by these."""
        return np.array([self.duration, self.length, self.length, 1.0])

    def box(self) -> np.ndarray:
        return np.array([[0.0, self.duration], [0.0, self.length], [0.0, self.length], [0.0, 1.0]])

    def perturbation(self, x, y) -> np.ndarray:
        """Parabolic theta bump, zero on the lateral boundary and peaking at the center."""
        xh = np.asarray(x, dtype=float) / self.length
        yh = np.asarray(y, dtype=float) / self.length
        return self.amplitude * 16.0 * xh * (1.0 - xh) * yh * (1.0 - yh)


@dataclass(frozen=True, eq=False)
class EulerDiagnostics:
    """Diagnosed inverse densities and full pressure over a batch."""

    alpha_d: Any
    alpha: Any
    p: Any


class EulerVerdict(BaseModel):
    """Outcome of a convergence study."""

    model_config = FROZEN

    iterations: int
    window: int
    initial_window_mean: float
    final_window_mean: float
    reduction: float
    target: float
    passed: bool
    diverged_at: Optional[int] = None
