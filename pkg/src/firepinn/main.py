"""Main application entry point for firepinn."""
import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from firepinn import __version__
from firepinn.config import AppSettings, load_settings
from firepinn.errors import ArtifactError, DivergenceError, DomainMismatchError, FirePinnError, ScenarioError
from firepinn.models.euler import EulerStudyConfig, EulerVerdict
from firepinn.models.grid import FieldStack, Grid2
from firepinn.models.scenario import ScenarioConfig
from firepinn.models.training import LevelSetSolution, TrainingConfig
from firepinn.services import artifacts
from firepinn.services.bench import run_bench
from firepinn.services.classical import domain_grid, solve
from firepinn.services.euler import bundled_study, convergence_study, load_study
from firepinn.services.geometry import compare_series, fireline_of
from firepinn.services.pinn import extrapolate, train
from firepinn.services.scenario_loader import bundled_scenario, load_scenario_file, read_text

logger = logging.getLogger(__name__)

BUNDLED_PREFIX = "bundled:"
PSI_WARN_LIMIT = 20.0

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DIVERGED = 2
EXIT_IO = 3


def setup_logging(log_level: str, enable_debug: bool = False) -> None:
    """
    Set up application logging.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        enable_debug: Whether to enable debug mode with detailed formatting
    """
    level = getattr(logging, log_level.upper())

    if enable_debug:
        format_string = (
            "%(asctime)s - %(name)s - %(levelname)s - "
            "%(filename)s:%(lineno)d - %(message)s"
        )
    else:
        format_string = "%(asctime)s - %(levelname)s - %(message)s"

    logging.basicConfig(
        level=level,
        format=format_string,
        handlers=[logging.StreamHandler(sys.stdout)],
        force=True,
    )


class PhaseTimer:
    """Collects wall time per named phase for the manifest."""

    def __init__(self) -> None:
        self.timings: Dict[str, float] = {}

    def run(self, name: str, fn: Callable, *args, **kwargs):
        started = time.perf_counter()
        result = fn(*args, **kwargs)
        self.timings[name] = time.perf_counter() - started
        logger.info(f"{name} took {self.timings[name]:.3f} s")
        return result


def resolve_scenario(ref: str) -> ScenarioConfig:
    """A scenario file path, or ``bundled:<name>`` for a shipped preset."""
    if ref.startswith(BUNDLED_PREFIX):
        return bundled_scenario(ref[len(BUNDLED_PREFIX):])
    return load_scenario_file(ref)


def resolve_source(ref: str) -> Union[FieldStack, LevelSetSolution]:
    """A snapshot directory becomes a stack; anything else is read as a solution file."""
    if Path(ref).is_dir():
        return artifacts.read_stack(ref)
    return artifacts.load_solution(ref)


def physical_to_scaled_times(scenario: ScenarioConfig, times: Sequence[float]) -> np.ndarray:
    return np.asarray(scenario.scaling.axis("t").scale(np.asarray(times, dtype=float)), dtype=float)


def evaluation_grid(solution: LevelSetSolution, nx: int, ny: int) -> Grid2:
    d = solution.scenario.domain
    return Grid2.covering(d.x_min, d.x_max, d.y_min, d.y_max, nx, ny)


def training_config(args: argparse.Namespace, settings: AppSettings) -> TrainingConfig:
    values = {
        "iterations": args.iterations,
        "learning_rate": args.learning_rate,
        "final_learning_rate": args.final_learning_rate,
        "interior_batch": args.interior_batch,
        "boundary_batch": args.boundary_batch,
        "sampling": args.sampling,
        "activation": args.activation,
        "ansatz": args.ansatz,
        "seed": settings.seed,
    }
    if args.hidden is not None:
        values["layer_sizes"] = (3,) + tuple(args.hidden) + (1,)
    return TrainingConfig(**{k: v for k, v in values.items() if v is not None})


def cmd_train(args: argparse.Namespace, settings: AppSettings) -> int:
    timer = PhaseTimer()
    scenario = timer.run("load", resolve_scenario, args.scenario)
    config = training_config(args, settings)
    out = artifacts.ensure_dir(settings.out_dir)
    solution = timer.run("train", train, scenario, config)
    logger.info(f"Final loss {solution.final_loss:.6e}")

    manifest = artifacts.RunManifest(
        command="train",
        scenario_hash=scenario.content_hash(),
        config=config.model_dump(mode="json"),
        seed=settings.seed,
        threads=settings.threads,
        timings=timer.timings,
    )
    manifest.add_artifact(artifacts.save_solution(solution, out / "solution.json"))
    manifest.add_artifact(artifacts.write_loss_history(out / "loss.csv", solution.loss_history))
    artifacts.write_manifest(out, manifest)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, settings: AppSettings) -> int:
    timer = PhaseTimer()
    scenario = timer.run("load", resolve_scenario, args.scenario)
    grid = domain_grid(scenario, args.nx, args.ny)
    times = physical_to_scaled_times(scenario, args.times)
    stack = timer.run("solve", solve, scenario, grid, times)
    out = artifacts.ensure_dir(settings.out_dir)

    manifest = artifacts.RunManifest(
        command="simulate",
        scenario_hash=scenario.content_hash(),
        config={"nx": args.nx, "ny": args.ny, "times": list(args.times)},
        seed=settings.seed,
        threads=settings.threads,
    )
    for path in artifacts.write_stack(out, stack, burn_time=scenario.fuel.tf):
        manifest.add_artifact(path)
    for index in range(len(stack)):
        fireline = fireline_of(stack.snapshot(index))
        manifest.add_artifact(artifacts.write_fireline(out / f"fireline_{index}.csv", fireline))
    manifest.timings.update(timer.timings)
    artifacts.write_manifest(out, manifest)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, settings: AppSettings) -> int:
    timer = PhaseTimer()
    a = timer.run("load_a", resolve_source, args.first)
    b = timer.run("load_b", resolve_source, args.second)
    grid: Optional[Grid2] = None
    for source in (a, b):
        if isinstance(source, FieldStack):
            grid = source.physical_grid
            break
    if grid is None and args.nx is not None:
        grid = evaluation_grid(a, args.nx, args.ny or args.nx)
    series = timer.run(
        "compare",
        compare_series,
        a,
        b,
        args.times,
        grid=grid,
        area_normalization=args.normalization,
        workers=settings.threads,
    )
    for record in series.records:
        logger.info(f"t={record.time:g} hausdorff={record.hausdorff} normalized={record.hausdorff_area}")

    out = artifacts.ensure_dir(settings.out_dir)
    manifest = artifacts.RunManifest(
        command="compare",
        scenario_hash=a.scenario.content_hash() if isinstance(a, LevelSetSolution) else None,
        config={"first": args.first, "second": args.second, "times": list(args.times), "normalization": args.normalization},
        seed=settings.seed,
        threads=settings.threads,
        timings=timer.timings,
    )
    for path in artifacts.write_metrics(out, series):
        manifest.add_artifact(path)
    artifacts.write_manifest(out, manifest)
    return EXIT_OK


def cmd_forensic(args: argparse.Namespace, settings: AppSettings) -> int:
    timer = PhaseTimer()
    solution = timer.run("load", artifacts.load_solution, args.solution)
    grid = evaluation_grid(solution, args.nx, args.ny)
    out = artifacts.ensure_dir(settings.out_dir)
    manifest = artifacts.RunManifest(
        command="forensic",
        scenario_hash=solution.scenario.content_hash(),
        config={"solution": args.solution, "times": list(args.times), "nx": args.nx, "ny": args.ny},
        seed=settings.seed,
        threads=settings.threads,
    )
    started = time.perf_counter()
    for index, t in enumerate(args.times):
        field, distance = extrapolate(solution, t, grid)
        peak = float(np.max(np.abs(field.values)))
        logger.info(f"t={t:g} lies {distance:.6g} s outside the training window")
        if peak >= PSI_WARN_LIMIT:
            logger.warning(
                f"|psi| reaches {peak:.3g} at t={t:g}, outside "
                f"(-{PSI_WARN_LIMIT:g}, {PSI_WARN_LIMIT:g}); extrapolation is unreliable"
            )
        manifest.add_artifact(artifacts.write_snapshot(out / artifacts.snapshot_name(index), field))
        manifest.add_artifact(artifacts.write_fireline(out / f"fireline_{index}.csv", fireline_of(field)))
    manifest.timings.update(timer.timings)
    manifest.timings["extrapolate"] = time.perf_counter() - started
    artifacts.write_manifest(out, manifest)
    return EXIT_OK


def cmd_euler_study(args: argparse.Namespace, settings: AppSettings) -> int:
    timer = PhaseTimer()
    if args.study is None:
        study = bundled_study()
    else:
        study = load_study(read_text(args.study), source=args.study)
    updates = {"seed": settings.seed}
    if args.iterations is not None:
        updates["iterations"] = args.iterations
    study = EulerStudyConfig.model_validate({**study.model_dump(), **updates})
    out = artifacts.ensure_dir(settings.out_dir)

    manifest = artifacts.RunManifest(
        command="euler-study",
        config=study.model_dump(mode="json"),
        seed=settings.seed,
        threads=settings.threads,
    )
    try:
        result = timer.run("study", convergence_study, study)
    except DivergenceError as e:
        failed = EulerVerdict(
            iterations=study.iterations,
            window=study.window,
            initial_window_mean=float("nan"),
            final_window_mean=float("nan"),
            reduction=0.0,
            target=study.reduction_target,
            passed=False,
            diverged_at=e.iteration,
        )
        manifest.add_artifact(artifacts.write_json(out / "euler_verdict.json", failed))
        artifacts.write_manifest(out, manifest)
        raise

    for path in artifacts.write_euler_study(out, result.history, result.verdict):
        manifest.add_artifact(path)
    manifest.timings.update(timer.timings)
    artifacts.write_manifest(out, manifest)
    if not result.verdict.passed:
        logger.warning(
            f"Loss fell by {result.verdict.reduction:.3g}, short of the {result.verdict.target:.3g} target"
        )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, settings: AppSettings) -> int:
    scenario = resolve_scenario(args.scenario)
    config = training_config(args, settings)
    report = run_bench(scenario, config, nx=args.nx, ny=args.ny, steps=args.steps, threads=settings.threads)
    out = artifacts.ensure_dir(settings.out_dir)
    path = artifacts.write_json(out / "bench.json", report)
    manifest = artifacts.RunManifest(
        command="bench",
        scenario_hash=scenario.content_hash(),
        config=config.model_dump(mode="json"),
        seed=settings.seed,
        threads=settings.threads,
        timings={"train": report.train_seconds, "solve": report.classical_seconds},
        artifacts=[str(path)],
    )
    artifacts.write_manifest(out, manifest)
    return EXIT_OK


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--iterations", type=int, help="Adam steps (default 4800)")
    parser.add_argument("--learning-rate", type=float, help="Adam step size at the first iteration")
    parser.add_argument("--final-learning-rate", type=float, help="Adam step size at the last iteration")
    parser.add_argument("--interior-batch", type=int, help="Collocation points per step")
    parser.add_argument("--boundary-batch", type=int, help="Initial-face points per step")
    parser.add_argument("--sampling", choices=["stratified", "grid"], help="Collocation sampling")
    parser.add_argument("--activation", choices=["tanh", "sigmoid"], help="Hidden activation")
    parser.add_argument("--ansatz", choices=["offset", "plain"], help="offset trains a correction to psi0 (default)")
    parser.add_argument("--hidden", type=int, nargs="+", help="Hidden layer widths (default 16)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="firepinn - physics-informed level-set fire spread"
    )
    parser.add_argument(
        "--config",
        type=str,
        help="Path to settings file (.env format)"
    )
    parser.add_argument("--seed", type=int, help="Seed for initialization and sampling (default 0)")
    parser.add_argument("--threads", type=int, help="Worker cap (default 1)")
    parser.add_argument("--out-dir", type=str, help="Artifact directory (default ./output)")
    parser.add_argument("--log-level", type=str, help="Logging level")
    parser.add_argument("--debug", action="store_true", default=None, help="Detailed log format and tracebacks")
    parser.add_argument(
        "--version",
        action="version",
        version=f"firepinn {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train the level-set surrogate")
    p.add_argument("scenario", help="Scenario file or bundled:<name>")
    _add_training_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("simulate", help="Run the classical solver")
    p.add_argument("scenario", help="Scenario file or bundled:<name>")
    p.add_argument("--times", type=float, nargs="+", required=True, help="Output times, physical units")
    p.add_argument("--nx", type=int, default=201)
    p.add_argument("--ny", type=int, default=201)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compare", help="Compare two solutions or snapshot directories")
    p.add_argument("first", help="Solution file or snapshot directory")
    p.add_argument("second", help="Solution file or snapshot directory")
    p.add_argument("--times", type=float, nargs="+", required=True)
    p.add_argument("--nx", type=int, help="Evaluation grid when neither source is a snapshot directory")
    p.add_argument("--ny", type=int)
    p.add_argument("--normalization", choices=["sqrt", "plain"], default="sqrt", help="Area normalization")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("forensic", help="Evaluate a solution outside its training window")
    p.add_argument("solution", help="Solution file")
    p.add_argument("--times", type=float, nargs="+", required=True)
    p.add_argument("--nx", type=int, default=201)
    p.add_argument("--ny", type=int, default=201)
    p.set_defaults(handler=cmd_forensic)

    p = sub.add_parser("euler-study", help="Loss-convergence study of the Euler residuals")
    p.add_argument("study", nargs="?", help="TOML file with an [euler] section (default: bundled study)")
    p.add_argument("--iterations", type=int)
    p.set_defaults(handler=cmd_euler_study)

    p = sub.add_parser("bench", help="Time training and the classical solver")
    p.add_argument("scenario", help="Scenario file or bundled:<name>")
    _add_training_flags(p)
    p.add_argument("--nx", type=int, default=201)
    p.add_argument("--ny", type=int, default=201)
    p.add_argument("--steps", type=int, default=50, help="Solver steps timed individually")
    p.set_defaults(handler=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main application entry point.

    Returns:
        int: Exit code (0 success, 1 invalid input, 2 divergence, 3 IO failure)
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    debug = bool(args.debug)

    try:
        settings = load_settings(
            config_path=args.config,
            overrides={
                "seed": args.seed,
                "threads": args.threads,
                "out_dir": args.out_dir,
                "log_level": args.log_level,
                "enable_debug_mode": args.debug,
            },
        )
        debug = settings.enable_debug_mode
        setup_logging(settings.log_level, settings.enable_debug_mode)
        logger.info(f"Starting firepinn {args.command} (seed {settings.seed}, threads {settings.threads})")
        code = args.handler(args, settings)
        logger.info(f"Finished {args.command}; artifacts in {settings.out_dir}")
        return code

    except DivergenceError as e:
        return _fail(e, EXIT_DIVERGED, debug)
    except DomainMismatchError as e:
        return _fail(e, EXIT_INVALID, debug)
    except ArtifactError as e:
        return _fail(e, EXIT_IO, debug)
    except (ScenarioError, ValidationError, ValueError) as e:
        return _fail(e, EXIT_INVALID, debug)
    except OSError as e:
        return _fail(e, EXIT_IO, debug)
    except FirePinnError as e:
        return _fail(e, EXIT_INVALID, debug)


def _fail(error: Exception, code: int, debug: bool) -> int:
    if not logging.getLogger().handlers:
        setup_logging("ERROR")
    logger.error(f"{type(error).__name__} failed: {error}")
    if debug:
        logger.exception("Full error details:")
    return code


if __name__ == "__main__":
    sys.exit(main())
