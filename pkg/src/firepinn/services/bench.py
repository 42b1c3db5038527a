"""Wall-clock timings of training and of the classical solver."""
from __future__ import annotations

import logging
import platform
import sys
import time
from typing import Dict, List, Optional

import numpy as np
import scipy
from pydantic import BaseModel, ConfigDict, Field

from firepinn.models.grid import Grid2
from firepinn.models.scenario import ScenarioConfig, initial_levelset
from firepinn.models.training import TrainingConfig
from firepinn.services.classical import CFL_FACTOR, domain_grid, heun_step, solve, spread_on_grid
from firepinn.services.pinn import train

logger = logging.getLogger(__name__)


class TimingStats(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    count: int
    total_s: float
    mean_us: float
    std_us: float

    @classmethod
    def from_samples(cls, seconds: List[float]) -> "TimingStats":
        arr = np.asarray(seconds, dtype=float)
        if arr.size == 0:
            return cls(count=0, total_s=0.0, mean_us=0.0, std_us=0.0)
        return cls(
            count=int(arr.size),
            total_s=float(arr.sum()),
            mean_us=float(arr.mean() * 1e6),
            std_us=float(arr.std() * 1e6),
        )


class BenchReport(BaseModel):
    """Timing report; no comparison against external simulators is implied."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: str
    scenario_hash: str
    seed: int
    iterations: int
    train_seconds: float
    train_iterations: TimingStats
    final_loss: float
    classical_seconds: float
    classical_grid: List[int]
    classical_steps: TimingStats
    environment: Dict[str, str] = Field(default_factory=dict)


def environment(threads: int) -> Dict[str, str]:
    """Interpreter, library versions and thread cap of this run."""
    return {
        "python": sys.version.split()[0],
        "implementation": platform.python_implementation(),
        "platform": platform.platform(),
        "machine": platform.machine(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "threads": str(threads),
        "build_profile": "debug" if __debug__ else "optimized",
    }


def time_steps(scenario: ScenarioConfig, grid: Grid2, steps: int) -> List[float]:
    """Seconds taken by each of ``steps`` Heun steps from the ignition field."""
    a = scenario.scaling.anisotropy()
    gx, gy = grid.mesh()
    psi = np.asarray(initial_levelset(scenario.ignition, gx, gy), dtype=float)
    t0 = scenario.scaled_bounds("t")[0]
    speed = spread_on_grid(scenario, t0, psi, grid)
    speed_max = float(np.max(speed))
    dt = CFL_FACTOR * min(grid.dx, grid.dy / a) / max(speed_max, 1.0)
    samples = []
    for _ in range(steps):
        started = time.perf_counter()
        psi = heun_step(psi, dt, speed, grid.dx, grid.dy, a, 0.0)
        samples.append(time.perf_counter() - started)
    return samples


def run_bench(
    scenario: ScenarioConfig,
    config: TrainingConfig,
    nx: int = 201,
    ny: int = 201,
    steps: int = 50,
    threads: int = 1,
) -> BenchReport:
    """Train once, solve once over the whole window and time individual solver steps."""
    stamps: List[float] = []
    started = time.perf_counter()
    solution = train(scenario, config, progress=lambda i, loss: stamps.append(time.perf_counter()))
    train_seconds = time.perf_counter() - started
    per_iteration = np.diff([started] + stamps).tolist()
    logger.info(f"Training took {train_seconds:.2f} s ({config.iterations} iterations)")

    grid = domain_grid(scenario, nx, ny)
    t_lo, t_hi = scenario.scaled_bounds("t")
    started = time.perf_counter()
    solve(scenario, grid, [t_hi] if t_hi > t_lo else [t_lo])
    classical_seconds = time.perf_counter() - started
    logger.info(f"Classical solve took {classical_seconds:.2f} s on {nx}x{ny}")

    return BenchReport(
        scenario=scenario.name,
        scenario_hash=scenario.content_hash(),
        seed=config.seed,
        iterations=config.iterations,
        train_seconds=train_seconds,
        train_iterations=TimingStats.from_samples(per_iteration),
        final_loss=solution.final_loss,
        classical_seconds=classical_seconds,
        classical_grid=[nx, ny],
        classical_steps=TimingStats.from_samples(time_steps(scenario, grid, steps)),
        environment=environment(threads),
    )


def step_cost_spread(report: BenchReport) -> Optional[float]:
    """Coefficient of variation of the per-step cost, None when no steps were timed."""
    stats = report.classical_steps
    if stats.count == 0 or stats.mean_us <= 0.0:
        return None
    return stats.std_us / stats.mean_us
