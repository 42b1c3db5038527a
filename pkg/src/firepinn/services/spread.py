"""
Rothermel-style spread rate in the outward-normal direction of the front.

All functions accept numpy arrays or tape nodes for the normal so the PINN
residual can differentiate through the wind and slope clamps.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from firepinn.models.scenario import FuelParameters, ScenarioConfig
from firepinn.services import tape

logger = logging.getLogger(__name__)

EPS_GRAD = 1e-8


@dataclass(frozen=True)
class SpreadQuery:
    """
    A scaled point with the outward normal of the front there.

    ``normal`` is None when the level-set gradient is too small to define it.
    """

    t: float
    x: float
    y: float
    normal: Optional[Tuple[float, float]]
    scenario: ScenarioConfig

    @classmethod
    def from_gradient(
        cls,
        scenario: ScenarioConfig,
        point: Tuple[float, float, float],
        gradient: Tuple[float, float],
        eps_grad: float = EPS_GRAD,
    ) -> "SpreadQuery":
        """Build the query from the scaled gradient (psi_x, psi_y) at ``point``."""
        a = scenario.scaling.anisotropy()
        gx, gy = float(gradient[0]), a * float(gradient[1])
        norm = float(np.hypot(gx, gy))
        normal = (gx / norm, gy / norm) if norm >= eps_grad else None
        t, x, y = point
        return cls(t=float(t), x=float(x), y=float(y), normal=normal, scenario=scenario)

    def physical_point(self) -> np.ndarray:
        return self.scenario.scaling.unscale_point([self.t, self.x, self.y])

    def spread_rate(self) -> float:
        """Physical spread rate S (m/s) at this query."""
        t, x, y = self.physical_point()
        if self.normal is None:
            return float(spread_rate(self.scenario.fuel, 0.0, 0.0))
        u, v = self.scenario.wind.evaluate(t, x, y)
        zx, zy = self.scenario.terrain.gradient(x, y)
        nx, ny = self.normal
        phi_w = wind_factor((u, v), (nx, ny), self.scenario.fuel)
        phi_s = slope_factor((zx, zy), (nx, ny), self.scenario.fuel)
        return float(spread_rate(self.scenario.fuel, phi_w, phi_s))


def wind_factor(wind, normal, fuel: FuelParameters):
    """phi_W = c * min(e, max(0, u . n)) ** b; zero when the wind opposes the normal."""
    u, v = wind
    nx, ny = normal
    along = tape.add(tape.mul(u, nx), tape.mul(v, ny))
    clamped = tape.minimum(tape.maximum(along, 0.0), fuel.e)
    return tape.mul(fuel.c, tape.power(clamped, fuel.b))


def slope_factor(terrain_gradient, normal, fuel: FuelParameters):
    """phi_S = d * max(0, grad z . n) ** 2; zero downhill and on flat ground."""
    zx, zy = terrain_gradient
    nx, ny = normal
    uphill = tape.maximum(tape.add(tape.mul(zx, nx), tape.mul(zy, ny)), 0.0)
    return tape.mul(fuel.d, tape.square(uphill))


def spread_rate(fuel: FuelParameters, phi_w, phi_s):
    """
    Combine the factors into S >= 0.

    The multiplicative closure is R0 * (1 + phi_W + phi_S); the additive one
    is max(S0, R0 + phi_W + phi_S).
    """
    if fuel.closure == "additive":
        return tape.maximum(tape.add(tape.add(fuel.r0, phi_w), phi_s), fuel.s0)
    return tape.mul(fuel.r0, tape.add(tape.add(1.0, phi_w), phi_s))


def spread_from_gradient(
    scenario: ScenarioConfig,
    t,
    x,
    y,
    gx,
    gy,
    eps_grad: float = EPS_GRAD,
):
    """
    Physical spread rate at physical (t, x, y) for the front direction (gx, gy).

    ``gx, gy`` are level-set gradient components along the physical axes up
    to a common positive scale (arrays or tape nodes). Where their norm is
    below ``eps_grad`` the wind and slope factors are zeroed.
    """
    u, v = scenario.wind.evaluate(t, x, y)
    zx, zy = scenario.terrain.gradient(x, y)
    norm_sq = tape.add(tape.square(gx), tape.square(gy))
    flat = tape.value_of(norm_sq) < eps_grad * eps_grad
    safe = tape.sqrt(tape.where(flat, 1.0, norm_sq))
    nx = tape.div(gx, safe)
    ny = tape.div(gy, safe)
    phi_w = tape.where(flat, 0.0, wind_factor((u, v), (nx, ny), scenario.fuel))
    phi_s = tape.where(flat, 0.0, slope_factor((zx, zy), (nx, ny), scenario.fuel))
    return spread_rate(scenario.fuel, phi_w, phi_s)
