"""
Reference finite-difference level-set solver.

Works on a grid in training coordinates: Godunov upwinding for the gradient
magnitude, Heun (RK2) in time, central differences for the front normal
that feeds the spread rate.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from firepinn.errors import CFLError, NonFiniteError
from firepinn.models.grid import FieldStack, Grid2
from firepinn.models.scenario import ScenarioConfig, initial_levelset
from firepinn.services.spread import spread_from_gradient

logger = logging.getLogger(__name__)

CFL_FACTOR = 0.5


def _padded(psi: np.ndarray) -> np.ndarray:
    # odd reflection makes the outer difference equal the inner one-sided difference
    return np.pad(psi, 1, mode="reflect", reflect_type="odd")


def godunov_grad_mag(
    psi: np.ndarray,
    dx: float,
    dy: float,
    anisotropy: float = 1.0,
    i: Optional[int] = None,
    j: Optional[int] = None,
):
    """
    Upwind |grad psi| for outward motion.

    |grad psi|^2 = max(D-x, 0)^2 + min(D+x, 0)^2 + a^2 (max(D-y, 0)^2 + min(D+y, 0)^2),
    with one-sided differences on the border. Returns the whole field, or
    the value at node (i, j) when both indices are given.
    """
    p = _padded(np.asarray(psi, dtype=float))
    center = p[1:-1, 1:-1]
    dmx = (center - p[:-2, 1:-1]) / dx
    dpx = (p[2:, 1:-1] - center) / dx
    dmy = (center - p[1:-1, :-2]) / dy
    dpy = (p[1:-1, 2:] - center) / dy
    sq = (
        np.maximum(dmx, 0.0) ** 2
        + np.minimum(dpx, 0.0) ** 2
        + anisotropy * anisotropy * (np.maximum(dmy, 0.0) ** 2 + np.minimum(dpy, 0.0) ** 2)
    )
    mag = np.sqrt(sq)
    if i is not None and j is not None:
        return float(mag[i, j])
    return mag


def laplacian(psi: np.ndarray, dx: float, dy: float, anisotropy: float = 1.0) -> np.ndarray:
    """Five-point Laplacian psi_xx + a^2 psi_yy."""
    p = _padded(np.asarray(psi, dtype=float))
    center = p[1:-1, 1:-1]
    d2x = (p[2:, 1:-1] - 2.0 * center + p[:-2, 1:-1]) / (dx * dx)
    d2y = (p[1:-1, 2:] - 2.0 * center + p[1:-1, :-2]) / (dy * dy)
    return d2x + anisotropy * anisotropy * d2y


def max_stable_dt(speed_max: float, dx: float, dy: float, anisotropy: float = 1.0, viscosity: float = 0.0) -> float:
    """Largest dt the scheme tolerates; inf when nothing moves."""
    limits = [np.inf]
    if speed_max > 0.0:
        limits.append(1.0 / (speed_max * (1.0 / dx + anisotropy / dy)))
    if viscosity > 0.0:
        limits.append(0.5 / (viscosity * (1.0 / (dx * dx) + anisotropy * anisotropy / (dy * dy))))
    return float(min(limits))


def heun_step(
    psi: np.ndarray,
    dt: float,
    speed: np.ndarray,
    dx: float,
    dy: float,
    anisotropy: float = 1.0,
    viscosity: float = 0.0,
) -> np.ndarray:
    """
    One predictor-corrector step of psi_t = -S~ |grad psi| + eps * Laplacian(psi).

    Raises:
        CFLError: When ``dt`` exceeds the stable bound for ``speed``
    """
    speed = np.asarray(speed, dtype=float)
    speed_max = float(np.max(speed)) if speed.size else 0.0
    limit = max_stable_dt(speed_max, dx, dy, anisotropy, viscosity)
    if dt > limit * (1.0 + 1e-12):
        raise CFLError(f"time step {dt:.6g} exceeds stable bound {limit:.6g}")

    def rhs(field: np.ndarray) -> np.ndarray:
        out = -speed * godunov_grad_mag(field, dx, dy, anisotropy)
        if viscosity > 0.0:
            out = out + viscosity * laplacian(field, dx, dy, anisotropy)
        return out

    f0 = rhs(psi)
    predictor = psi + dt * f0
    return psi + 0.5 * dt * (f0 + rhs(predictor))


def domain_grid(scenario: ScenarioConfig, nx: int, ny: int) -> Grid2:
    """Grid over the scenario's spatial box, in training coordinates."""
    (x_lo, x_hi), (y_lo, y_hi) = scenario.scaled_bounds("x"), scenario.scaled_bounds("y")
    return Grid2.covering(x_lo, x_hi, y_lo, y_hi, nx, ny)


def spread_on_grid(scenario: ScenarioConfig, t: float, psi: np.ndarray, grid: Grid2) -> np.ndarray:
    """S~ at every node, with the normal taken from central differences of psi."""
    xf = scenario.scaling
    a = xf.anisotropy()
    psi_x, psi_y = np.gradient(psi, grid.dx, grid.dy)
    gx, gy = grid.mesh()
    t_phys = float(xf.axis("t").unscale(t))
    x_phys = xf.axis("x").unscale(gx)
    y_phys = xf.axis("y").unscale(gy)
    rate = spread_from_gradient(scenario, t_phys, x_phys, y_phys, psi_x, a * psi_y)
    return xf.spread_factor() * np.broadcast_to(rate, grid.shape)


def solve(scenario: ScenarioConfig, grid: Grid2, times: Sequence[float]) -> FieldStack:
    """
    Integrate from the ignition shape and record snapshots at ``times``.

    Grid and times are in training coordinates. The step is
    dt = 0.5 * min(dx, dy / a) / max S~, shortened to land exactly on each
    output time; ignition times are stamped at the end of the step in which a
    node first reaches psi <= 0.

    Raises:
        ValueError: When a time is outside the domain, times are not increasing
            or the grid has fewer than 3 nodes along an axis
        NonFiniteError: When the field stops being finite
    """
    if grid.nx < 3 or grid.ny < 3:
        raise ValueError(f"finite differences need at least 3x3 nodes, got {grid.nx}x{grid.ny}")
    times = np.asarray(times, dtype=float)
    t_lo, t_hi = scenario.scaled_bounds("t")
    tol = 1e-9 * max(1.0, abs(t_lo), abs(t_hi))
    if times.size == 0:
        raise ValueError("at least one output time is required")
    if np.any(times < t_lo - tol) or np.any(times > t_hi + tol):
        raise ValueError(f"output times must lie inside [{t_lo}, {t_hi}]")
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("output times must be strictly increasing")

    a = scenario.scaling.anisotropy()
    eps = scenario.viscosity_eps
    gx, gy = grid.mesh()
    psi = np.asarray(initial_levelset(scenario.ignition, gx, gy), dtype=float)
    ignition = np.where(psi <= 0.0, t_lo, np.nan)
    snapshots = []
    t = t_lo
    steps = 0
    frozen_warned = False

    for target in times:
        while target - t > tol:
            speed = spread_on_grid(scenario, t, psi, grid)
            speed_max = float(np.max(speed))
            dt = CFL_FACTOR * min(grid.dx, grid.dy / a) / speed_max if speed_max > 0.0 else np.inf
            if eps > 0.0:
                dt = min(dt, max_stable_dt(0.0, grid.dx, grid.dy, a, eps))
            if not np.isfinite(dt):
                if not frozen_warned:
                    logger.warning("Spread rate is zero everywhere; front is frozen")
                    frozen_warned = True
                t = target
                break
            if dt >= target - t:
                dt = target - t
                next_t = target
            else:
                next_t = t + dt
            psi = heun_step(psi, dt, speed, grid.dx, grid.dy, a, eps)
            if not np.all(np.isfinite(psi)):
                bad = np.argwhere(~np.isfinite(psi))[0]
                raise NonFiniteError(
                    "classical field became non-finite",
                    point=(next_t, gx[tuple(bad)], gy[tuple(bad)]),
                )
            t = next_t
            steps += 1
            newly = np.isnan(ignition) & (psi <= 0.0)
            ignition[newly] = t
            logger.debug(f"step {steps} dt {dt:.4g} t {t:.6g}")
        t = float(target)
        snapshots.append(psi.copy())

    logger.info(f"Classical solve: {steps} steps on {grid.nx}x{grid.ny} grid")
    return FieldStack(
        grid=grid,
        scaling=scenario.scaling,
        times=times,
        fields=np.stack(snapshots),
        ignition_time=ignition,
    )


def fuel_fraction(t, t_i, tf: float):
    """
    Remaining fuel: 1 before ignition (or never ignited), exp(-(t - t_i) / Tf) after.

    Accepts scalars or arrays for ``t_i``.
    """
    if not tf > 0.0:
        raise ValueError("burn time must be positive")
    t_i = np.asarray(t_i, dtype=float)
    unburned = np.isnan(t_i) | (t < t_i)
    elapsed = np.where(unburned, 0.0, t - np.where(np.isnan(t_i), 0.0, t_i))
    out = np.where(unburned, 1.0, np.exp(-elapsed / tf))
    return float(out) if out.ndim == 0 else out
