"""
Physics-informed training of the level-set surrogate.

The network works in training coordinates; ``evaluate`` and
``extrapolate`` take physical times and grids and scale them on the way in.
Under the default ``offset`` ansatz the surrogate is psi0(x, y) plus the
network output, so the network only learns how the front departs from the
ignition shape; ``plain`` uses the bare network.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from firepinn.errors import DivergenceError, NonFiniteError
from firepinn.models.grid import Grid2, ScalarField2
from firepinn.models.network import DenseNet
from firepinn.models.scenario import ScenarioConfig, initial_levelset, initial_levelset_gradient
from firepinn.models.training import LevelSetSolution, TrainingConfig
from firepinn.services import tape
from firepinn.services.autodiff import Jet, evaluate_objective, forward, forward_jet, grad_wrt_params
from firepinn.services.optimizer import AdamState, adam_step
from firepinn.services.spread import spread_from_gradient

logger = logging.getLogger(__name__)

Progress = Callable[[int, float], None]


@dataclass(frozen=True)
class ScaledSpreadField:
    """Spread rate S~ = S * (x factor / t factor), in training units."""

    scenario: ScenarioConfig

    @property
    def anisotropy(self) -> float:
        return self.scenario.scaling.anisotropy()

    @property
    def factor(self) -> float:
        return self.scenario.scaling.spread_factor()

    def __call__(self, points: np.ndarray, psi_x, psi_y):
        """S~ at scaled ``points`` [N, 3] for scaled gradient components (arrays or nodes)."""
        phys = self.scenario.scaling.unscale_point(points)
        rate = spread_from_gradient(
            self.scenario,
            phys[:, 0],
            phys[:, 1],
            phys[:, 2],
            psi_x,
            tape.mul(self.anisotropy, psi_y),
        )
        return tape.mul(self.factor, rate)


def residual_from_jet(
    jet: Jet,
    points: np.ndarray,
    field: ScaledSpreadField,
    eps_n: float,
    base_gradient: Optional[Tuple[np.ndarray, np.ndarray]] = None,
):
    """
    r = u_t + S~ * sqrt(u_x^2 + (a u_y)^2 + eps_n^2) over the batch.

    ``base_gradient`` is the spatial gradient of a fixed field added to the
    network output, when there is one.
    """
    u_t = jet.derivative(0, 0)
    u_x = jet.derivative(0, 1)
    u_y = jet.derivative(0, 2)
    if base_gradient is not None:
        u_x = tape.add(u_x, base_gradient[0])
        u_y = tape.add(u_y, base_gradient[1])
    a_uy = tape.mul(field.anisotropy, u_y)
    magnitude = tape.sqrt(tape.add(tape.add(tape.square(u_x), tape.square(a_uy)), eps_n * eps_n))
    return tape.add(u_t, tape.mul(field(points, u_x, u_y), magnitude))


def pde_residual(net: DenseNet, points, scenario: ScenarioConfig, eps_n: float = 1e-8, offset: bool = False):
    """
    Level-set residual at scaled point(s).

    A single (t, x, y) gives a float; a batch [N, 3] gives an array. With
    ``offset`` the surrogate is psi0 + net instead of the bare network.

    Raises:
        NonFiniteError: When a derivative is non-finite, naming the point
    """
    single = np.ndim(points) == 1
    x = np.atleast_2d(np.asarray(points, dtype=float))
    jet = forward_jet(net, x)
    bad = ~np.all(np.isfinite(jet.jacobian), axis=(0, 2))
    if np.any(bad):
        raise NonFiniteError("non-finite level-set derivative", point=x[int(np.flatnonzero(bad)[0])])
    base = initial_levelset_gradient(scenario.ignition, x[:, 1], x[:, 2]) if offset else None
    r = tape.value_of(residual_from_jet(jet, x, ScaledSpreadField(scenario), eps_n, base))
    return float(r[0]) if single else r


def _loss_objective(
    interior: np.ndarray,
    boundary: np.ndarray,
    scenario: ScenarioConfig,
    config: TrainingConfig,
):
    n = interior.shape[0]
    points = np.concatenate([interior, boundary], axis=0)
    psi0 = initial_levelset(scenario.ignition, boundary[:, 1], boundary[:, 2])
    field = ScaledSpreadField(scenario)
    if config.offset:
        # u(0) - psi0 is the raw output when psi0 is part of u
        target = np.zeros_like(psi0)
        base = initial_levelset_gradient(scenario.ignition, points[:, 1], points[:, 2])
    else:
        target, base = psi0, None

    def objective(jet: Jet):
        r = residual_from_jet(jet, points, field, config.eps_n, base)
        pde = tape.mean(tape.square(r[:n]))
        bc = tape.mean(tape.square(tape.sub(jet.output(0)[n:], target)))
        return tape.add(tape.mul(config.pde_weight, pde), tape.mul(config.bc_weight, bc))

    return points, objective


def total_loss(
    net: DenseNet,
    interior: np.ndarray,
    boundary: np.ndarray,
    scenario: ScenarioConfig,
    config: TrainingConfig,
) -> float:
    """w_p * mean(r^2) over interior points plus w_b * mean((u - psi0)^2) on the initial face."""
    if len(interior) == 0 or len(boundary) == 0:
        raise ValueError("loss batches must be nonempty")
    points, objective = _loss_objective(interior, boundary, scenario, config)
    return evaluate_objective(net, points, objective)


def loss_and_gradient(
    net: DenseNet,
    interior: np.ndarray,
    boundary: np.ndarray,
    scenario: ScenarioConfig,
    config: TrainingConfig,
) -> Tuple[float, np.ndarray]:
    """total_loss and its exact gradient over the network parameters."""
    points, objective = _loss_objective(interior, boundary, scenario, config)
    return grad_wrt_params(net, points, objective)


def stratified_points(box: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points with count // 2^d (+1 for the first remainder cells) per half-box cell."""
    dims = box.shape[0]
    cells = 2 ** dims
    mid = box.mean(axis=1)
    parts = []
    for cell in range(cells):
        upper = np.array([(cell >> (dims - 1 - d)) & 1 for d in range(dims)], dtype=bool)
        lo = np.where(upper, mid, box[:, 0])
        hi = np.where(upper, box[:, 1], mid)
        n = count // cells + (1 if cell < count % cells else 0)
        parts.append(lo + (hi - lo) * rng.random((n, dims)))
    return np.concatenate(parts, axis=0)


def _grid_nodes(lo: float, hi: float, spacing: float, count: int, rng: np.random.Generator) -> np.ndarray:
    n_nodes = int(np.floor((hi - lo) / spacing + 1e-9)) + 1
    return np.minimum(lo + spacing * rng.integers(0, n_nodes, size=count), hi)


def sample_batches(
    config: TrainingConfig, box: np.ndarray, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw one step's collocation points in training coordinates.

    Args:
        config: Batch sizes, sampling mode and grid spacings
        box: [[t_lo, t_hi], [x_lo, x_hi], [y_lo, y_hi]]
        rng: Generator consumed in a fixed order

    Returns:
        (interior [N, 3], boundary [M, 3]); boundary points sit at t = t_lo
    """
    box = np.asarray(box, dtype=float)
    if config.sampling == "grid":
        interior = np.stack(
            [
                _grid_nodes(box[axis, 0], box[axis, 1], config.spacings[axis], config.interior_batch, rng)
                for axis in range(3)
            ],
            axis=1,
        )
        face = np.stack(
            [
                _grid_nodes(box[axis, 0], box[axis, 1], config.spacings[axis], config.boundary_batch, rng)
                for axis in (1, 2)
            ],
            axis=1,
        )
    else:
        interior = stratified_points(box, config.interior_batch, rng)
        face = stratified_points(box[1:], config.boundary_batch, rng)
    boundary = np.column_stack([np.full(face.shape[0], box[0, 0]), face])
    return interior, boundary


def train(
    scenario: ScenarioConfig,
    config: TrainingConfig,
    progress: Optional[Progress] = None,
) -> LevelSetSolution:
    """
    Fit the surrogate with Adam on fresh batches every step.

    Raises:
        DivergenceError: When the loss or its gradient turns non-finite
    """
    rng = np.random.default_rng(config.seed)
    net = DenseNet.initialize(config.layer_sizes, config.activation, config.seed)
    theta = net.flatten()
    state = AdamState.zeros(theta.size)
    box = scenario.scaled_box()
    history = np.empty(config.iterations)
    started = time.perf_counter()

    logger.info(
        f"Training {scenario.name}: {config.iterations} iterations, "
        f"batches {config.interior_batch}/{config.boundary_batch}, sampling {config.sampling}, "
        f"ansatz {config.ansatz}"
    )
    for iteration in range(config.iterations):
        interior, boundary = sample_batches(config, box, rng)
        try:
            loss, grad = loss_and_gradient(net.with_parameters(theta), interior, boundary, scenario, config)
        except NonFiniteError as e:
            raise DivergenceError(str(e), iteration) from e
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError("loss became non-finite", iteration)
        history[iteration] = loss
        theta, state = adam_step(theta, grad, state, lr=config.learning_rate_at(iteration))
        if progress is not None:
            progress(iteration, loss)
        if (iteration + 1) % config.log_every == 0 or iteration == config.iterations - 1:
            logger.info(f"iteration {iteration + 1}/{config.iterations} loss {loss:.6e}")

    logger.info(f"Training finished in {time.perf_counter() - started:.2f} s")
    return LevelSetSolution(
        net=net.with_parameters(theta),
        scaling=scenario.scaling,
        scenario=scenario,
        loss_history=history,
        config=config,
    )


def evaluate_points(solution: LevelSetSolution, points) -> np.ndarray:
    """Surrogate value at physical (t, x, y) points [N, 3]."""
    scaled = solution.scaling.scale_point(np.atleast_2d(np.asarray(points, dtype=float)))
    values = forward(solution.net, scaled)[:, 0]
    if solution.config.offset:
        values = values + initial_levelset(solution.scenario.ignition, scaled[:, 1], scaled[:, 2])
    return values


def evaluate(solution: LevelSetSolution, t: float, grid: Grid2) -> ScalarField2:
    """Level-set field at physical time ``t`` on a physical grid."""
    gx, gy = grid.mesh()
    points = np.column_stack([np.full(gx.size, float(t)), gx.ravel(), gy.ravel()])
    values = evaluate_points(solution, points).reshape(grid.shape)
    return ScalarField2(time=float(t), grid=grid, values=values)


def extrapolation_distance(solution: LevelSetSolution, t: float) -> float:
    """How far (physical seconds) ``t`` lies outside the training time window."""
    t_min, t_max = solution.scenario.domain.bounds("t")
    return float(max(0.0, t_min - t, t - t_max))


def extrapolate(solution: LevelSetSolution, t: float, grid: Grid2) -> Tuple[ScalarField2, float]:
    """Forensic evaluation outside the training window; returns (field, distance)."""
    distance = extrapolation_distance(solution, t)
    if distance > 0.0:
        logger.debug(f"Extrapolating {distance:.6g} s outside the training window")
    return evaluate(solution, t, grid), distance
