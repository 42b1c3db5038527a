"""
Residuals of the flux-form Euler system and the loss-convergence study.

Unknowns are predicted as departures from the hydrostatic ``BaseState``;
a zero network reproduces the rest state exactly. Residual assembly works
on ``EulerFields`` whose entries are plain arrays or tape nodes, so the same
code serves training, analytic checks and finite-difference comparisons.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from importlib import resources
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from firepinn.errors import DiagnosticsError, DivergenceError, NonFiniteError, ScenarioError
from firepinn.models.euler import (
    RESIDUAL_NAMES,
    EulerConstants,
    EulerDiagnostics,
    EulerStudyConfig,
    EulerVerdict,
)
from firepinn.models.network import DenseNet
from firepinn.services import tape
from firepinn.services.autodiff import Jet, forward, forward_jet, grad_wrt_params
from firepinn.services.optimizer import AdamState, adam_step
from firepinn.services.pinn import Progress, stratified_points
from firepinn.services.scenario_loader import format_validation_error, parse_document

logger = logging.getLogger(__name__)

T, X, Y, ETA = 0, 1, 2, 3
PHI_PAIRS: Tuple[Tuple[int, int], ...] = ((X, ETA), (Y, ETA), (ETA, ETA))
SOFTPLUS_SHIFT = float(np.log(np.e - 1.0))


@dataclass(frozen=True, eq=False)
class Var:
    """A field value and its physical derivatives along (t, x, y, eta)."""

    value: Any
    d: Tuple[Any, Any, Any, Any]

    @classmethod
    def constant(cls, value) -> "Var":
        zero = np.zeros_like(np.asarray(value, dtype=float))
        return cls(value=value, d=(zero, zero, zero, zero))


@dataclass(frozen=True, eq=False)
class EulerFields:
    """Flux-form unknowns plus the mixed second derivatives of phi."""

    U: Var
    V: Var
    W: Var
    Omega: Var
    Theta: Var
    phi: Var
    mu: Var
    phi_x_eta: Any
    phi_y_eta: Any
    phi_eta_eta: Any
    Q: Optional[Var] = None


def _quotient(num: Var, mu: Var) -> Var:
    """num / mu with its derivatives."""
    q = tape.div(num.value, mu.value)
    d = tuple(
        tape.div(tape.sub(num.d[k], tape.mul(q, mu.d[k])), mu.value) for k in range(4)
    )
    return Var(value=q, d=d)


def _flux_divergence(f: EulerFields, a: Var):
    """d_x(U a) + d_y(V a) + d_eta(Omega a)."""
    terms = []
    for flux, axis in ((f.U, X), (f.V, Y), (f.Omega, ETA)):
        terms.append(tape.mul(flux.d[axis], a.value))
        terms.append(tape.mul(flux.value, a.d[axis]))
    out = terms[0]
    for term in terms[1:]:
        out = tape.add(out, term)
    return out


def _mass_divergence(f: EulerFields):
    return tape.add(tape.add(f.U.d[X], f.V.d[Y]), f.Omega.d[ETA])


def diagnose(phi_eta, mu, theta_m, constants: EulerConstants, q_m=None) -> EulerDiagnostics:
    """
    alpha_d = -phi_eta / mu_d; alpha = alpha_d / (1 + q_m) (alpha_d when dry);
    p = p0 * (Rd theta_m / (p0 alpha_d)) ** gamma.
    """
    alpha_d = tape.div(tape.mul(-1.0, phi_eta), mu)
    alpha = alpha_d if q_m is None else tape.div(alpha_d, tape.add(1.0, q_m))
    ratio = tape.div(tape.mul(constants.rd / constants.p0, theta_m), alpha_d)
    p = tape.mul(constants.p0, tape.power(ratio, constants.gamma))
    return EulerDiagnostics(alpha_d=alpha_d, alpha=alpha, p=p)


def diagnostics(fields: EulerFields, constants: EulerConstants, points: Optional[np.ndarray] = None) -> EulerDiagnostics:
    """
    Diagnose alpha_d, alpha and p from the unknowns.

    Raises:
        DiagnosticsError: When alpha_d is not positive, naming the first such point
    """
    theta_m = tape.div(fields.Theta.value, fields.mu.value)
    q_m = tape.div(fields.Q.value, fields.mu.value) if fields.Q is not None else None
    diag = diagnose(fields.phi.d[ETA], fields.mu.value, theta_m, constants, q_m)
    alpha_d = np.atleast_1d(tape.value_of(diag.alpha_d))
    bad = ~(alpha_d > 0.0)
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        point = points[row] if points is not None else None
        raise DiagnosticsError("alpha_d must be positive", point=point)
    return diag


def assemble_residuals(
    fields: EulerFields,
    constants: EulerConstants,
    alpha_floor: float = 0.0,
) -> Dict[str, Any]:
    """
    Residuals of the seven prognostic equations with zero forcing and no map factors.

    Where alpha_d falls below ``alpha_floor`` the floor is used in the
    pressure terms; the caller penalizes such points separately.
    """
    c = constants
    f = fields
    mu = f.mu
    theta_m = _quotient(f.Theta, mu)
    alpha_d = tape.div(tape.mul(-1.0, f.phi.d[ETA]), mu.value)
    phi_eta_d = (f.phi_x_eta, f.phi_y_eta, f.phi_eta_eta)
    # d alpha_d / ds = -(phi_eta_s + alpha_d mu_s) / mu for s = x, y, eta
    alpha_d_d = [
        tape.div(tape.mul(-1.0, tape.add(phi_eta_d[k], tape.mul(alpha_d, mu.d[axis]))), mu.value)
        for k, axis in enumerate((X, Y, ETA))
    ]
    alpha_d_safe = tape.maximum(alpha_d, alpha_floor) if alpha_floor > 0.0 else alpha_d
    q_m = _quotient(f.Q, mu) if f.Q is not None else None
    ratio = tape.div(tape.mul(c.rd / c.p0, theta_m.value), alpha_d_safe)
    p = tape.mul(c.p0, tape.power(ratio, c.gamma))
    alpha = alpha_d_safe if q_m is None else tape.div(alpha_d_safe, tape.add(1.0, q_m.value))
    # p_s = gamma p (theta_s / theta - alpha_d_s / alpha_d)
    p_d = [
        tape.mul(
            tape.mul(c.gamma, p),
            tape.sub(
                tape.div(theta_m.d[axis], theta_m.value),
                tape.div(alpha_d_d[k], alpha_d_safe),
            ),
        )
        for k, axis in enumerate((X, Y, ETA))
    ]
    p_x, p_y, p_eta = p_d
    alpha_ratio = tape.div(alpha, alpha_d_safe)
    hydro = tape.mul(alpha_ratio, p_eta)

    u = _quotient(f.U, mu)
    v = _quotient(f.V, mu)
    w = _quotient(f.W, mu)

    r_u = tape.add(
        tape.add(f.U.d[T], _flux_divergence(f, u)),
        tape.add(tape.mul(tape.mul(mu.value, alpha), p_x), tape.mul(hydro, f.phi.d[X])),
    )
    r_v = tape.add(
        tape.add(f.V.d[T], _flux_divergence(f, v)),
        tape.add(tape.mul(tape.mul(mu.value, alpha), p_y), tape.mul(hydro, f.phi.d[Y])),
    )
    r_w = tape.sub(
        tape.add(f.W.d[T], _flux_divergence(f, w)),
        tape.mul(c.g, tape.sub(hydro, mu.value)),
    )
    r_theta = tape.add(f.Theta.d[T], _flux_divergence(f, theta_m))
    r_mu = tape.add(mu.d[T], _mass_divergence(f))
    advect_phi = tape.add(
        tape.add(tape.mul(f.U.value, f.phi.d[X]), tape.mul(f.V.value, f.phi.d[Y])),
        tape.mul(f.Omega.value, f.phi.d[ETA]),
    )
    r_phi = tape.add(
        f.phi.d[T], tape.div(tape.sub(advect_phi, tape.mul(c.g, f.W.value)), mu.value)
    )
    if q_m is not None:
        r_q = tape.add(f.Q.d[T], _flux_divergence(f, q_m))
    else:
        r_q = np.zeros_like(tape.value_of(mu.value))
    return {
        "U": r_u,
        "V": r_v,
        "W": r_w,
        "Theta": r_theta,
        "mu": r_mu,
        "phi": r_phi,
        "Q": r_q,
        "alpha_d": alpha_d,
    }


def residual_scales(study: EulerStudyConfig) -> Dict[str, float]:
    """Size of each equation's tendency term; residuals are divided by these."""
    mu0, s, dur = study.base.mu0, study.scales, study.duration
    return {
        "U": mu0 * s.u / dur,
        "V": mu0 * s.u / dur,
        "W": mu0 * s.w / dur,
        "Theta": mu0 * s.theta / dur,
        "mu": mu0 / dur,
        "phi": s.phi / dur,
        "Q": mu0 * s.q / dur,
    }


def scale_inputs(study: EulerStudyConfig, points) -> np.ndarray:
    return np.asarray(points, dtype=float) / study.input_scales


def fields_from_jet(jet: Jet, points: np.ndarray, study: EulerStudyConfig) -> EulerFields:
    """
    Physical unknowns from network outputs at physical ``points`` [N, 4].

    U = mu0 u_ref y0, V = mu0 u_ref y1, W = mu0 w_ref y2, Omega = mu0 omega_ref y3,
    Theta = mu0 (theta0 + theta_ref y4), phi = phi_base(eta) + phi_ref y5,
    mu = mu0 softplus(y6 + log(e - 1)), Q = mu0 q_ref y7.
    """
    b, s, c = study.base, study.scales, study.constants
    inv = 1.0 / study.input_scales
    eta = np.asarray(points, dtype=float)[:, ETA]

    def linear(index: int, factor: float, offset=0.0) -> Var:
        value = tape.mul(factor, jet.output(index))
        if np.any(np.asarray(offset) != 0.0):
            value = tape.add(value, offset)
        d = tuple(tape.mul(factor * inv[k], jet.derivative(index, k)) for k in range(4))
        return Var(value=value, d=d)

    phi_net = linear(5, s.phi)
    phi = Var(
        value=tape.add(phi_net.value, b.phi(eta, c)),
        d=(phi_net.d[T], phi_net.d[X], phi_net.d[Y], tape.add(phi_net.d[ETA], b.phi_eta(eta, c))),
    )
    shifted = tape.add(jet.output(6), SOFTPLUS_SHIFT)
    slope = tape.mul(b.mu0, tape.sigmoid(shifted))
    mu = Var(
        value=tape.mul(b.mu0, tape.softplus(shifted)),
        d=tuple(tape.mul(tape.mul(slope, inv[k]), jet.derivative(6, k)) for k in range(4)),
    )
    return EulerFields(
        U=linear(0, b.mu0 * s.u),
        V=linear(1, b.mu0 * s.u),
        W=linear(2, b.mu0 * s.w),
        Omega=linear(3, b.mu0 * s.omega),
        Theta=linear(4, b.mu0 * s.theta, b.mu0 * b.theta0),
        phi=phi,
        mu=mu,
        phi_x_eta=tape.mul(s.phi * inv[X], jet.second_derivative(5, X, ETA)),
        phi_y_eta=tape.mul(s.phi * inv[Y], jet.second_derivative(5, Y, ETA)),
        phi_eta_eta=tape.add(
            tape.mul(s.phi, jet.second_derivative(5, ETA, ETA)), b.phi_eta_eta(eta, c)
        ),
        Q=linear(7, b.mu0 * s.q) if study.moist else None,
    )


def physical_state(net: DenseNet, points, study: EulerStudyConfig) -> Dict[str, np.ndarray]:
    """Values of every unknown at physical ``points`` [N, 4], no derivatives."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    y = forward(net, scale_inputs(study, pts))
    b, s, c = study.base, study.scales, study.constants
    state = {
        "U": b.mu0 * s.u * y[:, 0],
        "V": b.mu0 * s.u * y[:, 1],
        "W": b.mu0 * s.w * y[:, 2],
        "Omega": b.mu0 * s.omega * y[:, 3],
        "Theta": b.mu0 * (b.theta0 + s.theta * y[:, 4]),
        "phi": b.phi(pts[:, ETA], c) + s.phi * y[:, 5],
        "mu": b.mu0 * np.logaddexp(0.0, y[:, 6] + SOFTPLUS_SHIFT),
    }
    if study.moist:
        state["Q"] = b.mu0 * s.q * y[:, 7]
    return state


def hydrostatic_fields(points, study: EulerStudyConfig) -> EulerFields:
    """Analytic rest state with exact derivatives."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    eta = pts[:, ETA]
    b, c = study.base, study.constants
    zero = np.zeros(pts.shape[0])
    phi = Var(value=b.phi(eta, c), d=(zero, zero, zero, b.phi_eta(eta, c)))
    return EulerFields(
        U=Var.constant(zero),
        V=Var.constant(zero),
        W=Var.constant(zero),
        Omega=Var.constant(zero),
        Theta=Var.constant(np.full(pts.shape[0], b.mu0 * b.theta0)),
        phi=phi,
        mu=Var.constant(np.full(pts.shape[0], b.mu0)),
        phi_x_eta=zero,
        phi_y_eta=zero,
        phi_eta_eta=b.phi_eta_eta(eta, c),
        Q=Var.constant(zero) if study.moist else None,
    )


def normalized_residuals(fields: EulerFields, study: EulerStudyConfig, alpha_floor: float = 0.0) -> Dict[str, Any]:
    raw = assemble_residuals(fields, study.constants, alpha_floor)
    scales = residual_scales(study)
    out = {name: tape.mul(1.0 / scales[name], raw[name]) for name in RESIDUAL_NAMES}
    out["alpha_d"] = raw["alpha_d"]
    return out


def euler_residuals(
    net: DenseNet, points, study: EulerStudyConfig, normalized: bool = True
) -> np.ndarray:
    """
    The seven residuals (U, V, W, Theta, mu, phi, Q) at physical ``points``.

    Returns an [N, 7] array; the Q column is zero in dry mode.

    Raises:
        NonFiniteError: When a network derivative is non-finite
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    scaled = scale_inputs(study, pts)
    jet = forward_jet(net, scaled, PHI_PAIRS)
    bad = ~np.all(np.isfinite(jet.jacobian), axis=(0, 2)) | ~np.all(np.isfinite(jet.second), axis=(0, 2))
    if np.any(bad):
        raise NonFiniteError("non-finite network derivative", point=pts[int(np.flatnonzero(bad)[0])])
    fields = fields_from_jet(jet, pts, study)
    if normalized:
        res = normalized_residuals(fields, study)
    else:
        res = assemble_residuals(fields, study.constants)
    return np.column_stack([np.broadcast_to(tape.value_of(res[name]), (pts.shape[0],)) for name in RESIDUAL_NAMES])


def initial_condition_terms(fields_or_state, points, study: EulerStudyConfig) -> Dict[str, Any]:
    """
    Normalized departures from the initial state at t = 0.

    The initial state is the base state with theta raised by the parabolic
    perturbation and everything else at rest.
    """
    get = (lambda k: getattr(fields_or_state, k).value) if isinstance(fields_or_state, EulerFields) else fields_or_state.get
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    b, s, c = study.base, study.scales, study.constants
    mu = get("mu")
    theta_target = b.theta0 + study.perturbation(pts[:, X], pts[:, Y])
    terms = {
        "U": tape.mul(1.0 / (b.mu0 * s.u), get("U")),
        "V": tape.mul(1.0 / (b.mu0 * s.u), get("V")),
        "W": tape.mul(1.0 / (b.mu0 * s.w), get("W")),
        "Omega": tape.mul(1.0 / (b.mu0 * s.omega), get("Omega")),
        "Theta": tape.mul(1.0 / s.theta, tape.sub(tape.div(get("Theta"), mu), theta_target)),
        "phi": tape.mul(1.0 / s.phi, tape.sub(get("phi"), b.phi(pts[:, ETA], c))),
        "mu": tape.mul(1.0 / b.mu0, tape.sub(mu, b.mu0)),
    }
    if study.moist:
        terms["Q"] = tape.mul(1.0 / (b.mu0 * s.q), get("Q"))
    return terms


def hydrostatic_state(points, study: EulerStudyConfig) -> Dict[str, np.ndarray]:
    """Values of the unperturbed rest state, keyed like ``physical_state``."""
    f = hydrostatic_fields(points, study)
    state = {
        "U": f.U.value,
        "V": f.V.value,
        "W": f.W.value,
        "Omega": f.Omega.value,
        "Theta": f.Theta.value,
        "phi": f.phi.value,
        "mu": f.mu.value,
    }
    if study.moist:
        state["Q"] = f.Q.value
    return state


def initial_condition_loss(state: Dict[str, Any], points, study: EulerStudyConfig) -> float:
    """Mean squared initial-condition mismatch of a state given as arrays."""
    terms = initial_condition_terms(state, points, study)
    return float(sum(np.mean(np.square(tape.value_of(v))) for v in terms.values()))


def sample_study_batches(study: EulerStudyConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Interior points over (t, x, y, eta) and initial-face points at t = 0, physical units."""
    box = study.box()
    interior = stratified_points(box, study.interior_batch, rng)
    face = stratified_points(box[1:], study.initial_batch, rng)
    initial = np.column_stack([np.zeros(face.shape[0]), face])
    return interior, initial


def _study_objective(interior: np.ndarray, initial: np.ndarray, study: EulerStudyConfig):
    n = interior.shape[0]
    points = np.concatenate([interior, initial], axis=0)

    def objective(jet: Jet):
        fields = fields_from_jet(jet, points, study)
        res = normalized_residuals(fields, study, study.alpha_floor)
        loss = None
        names = RESIDUAL_NAMES if study.moist else RESIDUAL_NAMES[:-1]
        for name in names:
            term = tape.mean(tape.square(res[name][:n]))
            loss = term if loss is None else tape.add(loss, term)
        shortfall = tape.maximum(tape.sub(study.alpha_floor, res["alpha_d"][:n]), 0.0)
        loss = tape.add(loss, tape.mul(study.penalty_weight, tape.mean(tape.square(shortfall))))
        values = {name: getattr(fields, name) for name in ("U", "V", "W", "Omega", "Theta", "phi", "mu")}
        if study.moist:
            values["Q"] = fields.Q
        state = {k: v.value[n:] for k, v in values.items()}
        ic = initial_condition_terms(state, initial, study)
        ic_loss = None
        for term in ic.values():
            piece = tape.mean(tape.square(term))
            ic_loss = piece if ic_loss is None else tape.add(ic_loss, piece)
        return tape.add(loss, tape.mul(study.ic_weight, ic_loss))

    return points, objective


def study_loss_and_gradient(
    net: DenseNet, interior: np.ndarray, initial: np.ndarray, study: EulerStudyConfig
) -> Tuple[float, np.ndarray]:
    points, objective = _study_objective(interior, initial, study)
    return grad_wrt_params(net, scale_inputs(study, points), objective, pairs=PHI_PAIRS)


def verdict(history: Sequence[float], study: EulerStudyConfig) -> EulerVerdict:
    """Compare the mean loss over the first and last ``window`` iterations."""
    h = np.asarray(history, dtype=float)
    window = min(study.window, max(1, h.size // 2))
    first = float(np.mean(h[:window]))
    last = float(np.mean(h[-window:]))
    reduction = first / last if last > 0.0 else float("inf")
    return EulerVerdict(
        iterations=int(h.size),
        window=window,
        initial_window_mean=first,
        final_window_mean=last,
        reduction=reduction,
        target=study.reduction_target,
        passed=bool(reduction >= study.reduction_target),
    )


@dataclass(frozen=True, eq=False)
class StudyResult:
    net: DenseNet
    history: np.ndarray
    verdict: EulerVerdict


def convergence_study(study: EulerStudyConfig, progress: Optional[Progress] = None) -> StudyResult:
    """
    Train the Euler surrogate and report whether the loss fell by the target factor.

    Raises:
        DivergenceError: When the loss or its gradient turns non-finite
    """
    rng = np.random.default_rng(study.seed)
    net = DenseNet.initialize(study.layer_sizes, study.activation, study.seed)
    theta = net.flatten()
    state = AdamState.zeros(theta.size)
    history = np.empty(study.iterations)
    started = time.perf_counter()
    mode = "moist" if study.moist else "dry"
    logger.info(f"Euler study: {study.iterations} iterations, layers {study.layer_sizes}, {mode} mode")
    for iteration in range(study.iterations):
        interior, initial = sample_study_batches(study, rng)
        try:
            loss, grad = study_loss_and_gradient(net.with_parameters(theta), interior, initial, study)
        except NonFiniteError as e:
            raise DivergenceError(str(e), iteration) from e
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError("loss became non-finite", iteration)
        history[iteration] = loss
        theta, state = adam_step(theta, grad, state, lr=study.learning_rate)
        if progress is not None:
            progress(iteration, loss)
        if (iteration + 1) % study.log_every == 0 or iteration == study.iterations - 1:
            logger.info(f"iteration {iteration + 1}/{study.iterations} loss {loss:.6e}")
    result = verdict(history, study)
    outcome = "passed" if result.passed else "failed"
    elapsed = time.perf_counter() - started
    logger.info(f"Euler study finished in {elapsed:.2f} s: reduction {result.reduction:.3g} ({outcome})")
    return StudyResult(net=net.with_parameters(theta), history=history, verdict=result)


def load_study(text: str, source: Optional[str] = None) -> EulerStudyConfig:
    """
    Read the ``[euler]`` section of a TOML document.

    Nested ``[euler.constants]``, ``[euler.base]`` and ``[euler.scales]``
    tables map onto the corresponding models.

    Raises:
        ScenarioError: On parse errors, a missing section or invalid values
    """
    data = parse_document(text, source)
    if "euler" not in data:
        raise ScenarioError("document has no [euler] section", path=source)
    try:
        return EulerStudyConfig(**data["euler"])
    except ValidationError as e:
        raise ScenarioError(format_validation_error(e), path=source) from e


def bundled_study() -> EulerStudyConfig:
    """The study shipped as ``firepinn/data/euler_study.toml``."""
    text = resources.files("firepinn.data").joinpath("euler_study.toml").read_text("utf-8")
    return load_study(text, source="<bundled:euler_study>")
