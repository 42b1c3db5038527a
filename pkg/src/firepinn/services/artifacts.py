"""
Text artifacts written and read by the command-line front end.

Every float is written with ``repr`` so that files reproduce bit-for-bit
and read back to the same values. Filesystem failures surface as
``ArtifactError`` carrying the offending path.
"""
from __future__ import annotations

import csv
import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from firepinn.errors import ArtifactError
from firepinn.models.euler import EulerVerdict
from firepinn.models.fireline import Fireline, MetricsRecord, MetricsSeries
from firepinn.models.grid import FieldStack, Grid2, ScalarField2
from firepinn.models.network import DenseNet
from firepinn.models.scenario import ScalingTransform, ScenarioConfig
from firepinn.models.training import LevelSetSolution, TrainingConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
SOLUTION_FORMAT_VERSION = 2
METRIC_COLUMNS: Tuple[str, ...] = tuple(MetricsRecord.model_fields)


class SolutionFile(BaseModel):
    """On-disk form of a trained level-set surrogate."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    format_version: int = SOLUTION_FORMAT_VERSION
    layer_sizes: Tuple[int, ...]
    activation: str
    parameters: List[float]
    scaling: ScalingTransform
    scenario_hash: str
    scenario: ScenarioConfig
    training: TrainingConfig
    final_loss: Optional[float] = None
    loss_history: List[float] = Field(default_factory=list, description="Loss per Adam step")

    @classmethod
    def from_solution(cls, solution: LevelSetSolution) -> "SolutionFile":
        final = solution.final_loss
        return cls(
            layer_sizes=solution.net.layer_sizes,
            activation=solution.net.activation,
            parameters=[float(v) for v in solution.net.flatten()],
            scaling=solution.scaling,
            scenario_hash=solution.scenario.content_hash(),
            scenario=solution.scenario,
            training=solution.config,
            final_loss=final if np.isfinite(final) else None,
            loss_history=[float(v) for v in solution.loss_history if np.isfinite(v)],
        )

    def to_solution(self) -> LevelSetSolution:
        """
        Rebuild the solution, checking version, hash and parameter count.

        Raises:
            ValueError: When the file is internally inconsistent
        """
        if self.format_version != SOLUTION_FORMAT_VERSION:
            raise ValueError(f"unsupported solution format version {self.format_version}")
        if self.scenario.content_hash() != self.scenario_hash:
            raise ValueError("embedded scenario does not match scenario_hash")
        net = DenseNet.zeros(self.layer_sizes, self.activation)
        if len(self.parameters) != net.n_parameters:
            raise ValueError(
                f"solution holds {len(self.parameters)} parameters, "
                f"layers {self.layer_sizes} need {net.n_parameters}"
            )
        if self.loss_history:
            history = np.array(self.loss_history, dtype=float)
        elif self.final_loss is not None:
            history = np.array([self.final_loss])
        else:
            history = np.empty(0)
        return LevelSetSolution(
            net=net.with_parameters(np.array(self.parameters, dtype=float)),
            scaling=self.scaling,
            scenario=self.scenario,
            loss_history=history,
            config=self.training,
        )


class RunManifest(BaseModel):
    """What a command ran with and what it produced."""

    model_config = ConfigDict(extra="forbid")

    command: str
    scenario_hash: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    timings: Dict[str, float] = Field(default_factory=dict, description="Wall time per phase, s")
    artifacts: List[str] = Field(default_factory=list)

    def add_artifact(self, path: PathLike) -> None:
        self.artifacts.append(str(path))


@contextmanager
def _io(path: PathLike, action: str) -> Iterator[None]:
    try:
        yield
    except OSError as e:
        raise ArtifactError(f"cannot {action} file ({e.strerror})", path=str(path)) from e


def ensure_dir(path: PathLike) -> Path:
    out = Path(path)
    with _io(out, "create"):
        out.mkdir(parents=True, exist_ok=True)
    return out


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write ``rows`` under ``header``; floats use repr, None becomes an empty cell."""
    out = Path(path)
    with _io(out, "write"):
        with out.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    logger.debug(f"Wrote {out}")
    return out


def read_csv(path: PathLike) -> Tuple[List[str], np.ndarray]:
    """Header and numeric body of a CSV written by ``write_csv``."""
    src = Path(path)
    with _io(src, "read"):
        with src.open("r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
    with _io(src, "read"):
        body = np.loadtxt(src, delimiter=",", skiprows=1, ndmin=2)
    return header, body


def write_json(path: PathLike, payload: Union[BaseModel, Any]) -> Path:
    out = Path(path)
    text = payload.model_dump_json(indent=2) if isinstance(payload, BaseModel) else json.dumps(payload, indent=2)
    with _io(out, "write"):
        out.write_text(text + "\n", encoding="utf-8")
    logger.debug(f"Wrote {out}")
    return out


def save_solution(solution: LevelSetSolution, path: PathLike) -> Path:
    return write_json(path, SolutionFile.from_solution(solution))


def load_solution(path: PathLike) -> LevelSetSolution:
    """
    Read a solution file.

    Raises:
        ArtifactError: When the file cannot be read
        ValueError: When its content is malformed or inconsistent
    """
    src = Path(path)
    with _io(src, "read"):
        text = src.read_text(encoding="utf-8")
    try:
        document = SolutionFile.model_validate_json(text)
    except ValidationError as e:
        raise ValueError(f"{src}: invalid solution file: {e.errors()[0]['msg']}") from e
    return document.to_solution()


def write_loss_history(path: PathLike, history: Sequence[float]) -> Path:
    return write_csv(path, ("iteration", "loss"), ((i, float(v)) for i, v in enumerate(history)))


def _field_rows(time: float, field: ScalarField2) -> Iterator[Tuple[float, float, float, float]]:
    gx, gy = field.grid.mesh()
    for x, y, v in zip(gx.ravel(), gy.ravel(), field.values.ravel()):
        yield (time, x, y, v)


def write_snapshot(path: PathLike, field: ScalarField2) -> Path:
    """One snapshot as ``t,x,y,psi`` in physical units."""
    return write_csv(path, ("t", "x", "y", "psi"), _field_rows(field.time, field))


def snapshot_name(index: int) -> str:
    return f"snapshot_{index}.csv"


def write_stack(out_dir: PathLike, stack: FieldStack, burn_time: Optional[float] = None) -> List[Path]:
    """
    Snapshots, the ignition-time field and optionally the fuel fraction of a classical solve.

    Returns:
        Paths written, snapshots first
    """
    out = ensure_dir(out_dir)
    paths = [write_snapshot(out / snapshot_name(i), stack.snapshot(i)) for i in range(len(stack))]
    grid = stack.physical_grid
    gx, gy = grid.mesh()
    ignition = stack.physical_ignition_time()
    paths.append(
        write_csv(out / "ignition.csv", ("t_i", "x", "y"), zip(ignition.ravel(), gx.ravel(), gy.ravel()))
    )
    if burn_time is not None:
        def fuel_rows() -> Iterator[Tuple[float, float, float, float]]:
            for t in stack.physical_times:
                fraction = stack.fuel_fraction_at(t, burn_time)
                for x, y, f in zip(gx.ravel(), gy.ravel(), fraction.ravel()):
                    yield (t, x, y, f)

        paths.append(write_csv(out / "fuel_fraction.csv", ("t", "x", "y", "fuel_fraction"), fuel_rows()))
    return paths


def _grid_from_columns(x: np.ndarray, y: np.ndarray) -> Tuple[Grid2, np.ndarray]:
    xs, ys = np.unique(x), np.unique(y)
    if xs.size < 3 or ys.size < 3 or xs.size * ys.size != x.size:
        raise ValueError("snapshot does not hold a full rectangular grid")
    grid = Grid2.covering(float(xs[0]), float(xs[-1]), float(ys[0]), float(ys[-1]), xs.size, ys.size)
    return grid, np.lexsort((y, x))


def read_snapshot(path: PathLike) -> ScalarField2:
    header, body = read_csv(path)
    if header != ["t", "x", "y", "psi"]:
        raise ValueError(f"{path}: expected header t,x,y,psi")
    grid, order = _grid_from_columns(body[:, 1], body[:, 2])
    return ScalarField2(time=float(body[0, 0]), grid=grid, values=body[order, 3].reshape(grid.shape))


def read_stack(snapshot_dir: PathLike) -> FieldStack:
    """
    Rebuild a stack from a directory written by ``write_stack``.

    The stack is returned in physical coordinates (identity scaling).

    Raises:
        ArtifactError: When the directory holds no snapshots
    """
    src = Path(snapshot_dir)
    files = sorted(src.glob("snapshot_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise ArtifactError("no snapshot files found", path=str(src))
    snapshots = [read_snapshot(f) for f in files]
    grid = snapshots[0].grid
    if any(s.grid != grid for s in snapshots):
        raise ValueError(f"{src}: snapshots use different grids")
    ignition = np.full(grid.shape, np.nan)
    ignition_path = src / "ignition.csv"
    if ignition_path.exists():
        _, body = read_csv(ignition_path)
        _, order = _grid_from_columns(body[:, 1], body[:, 2])
        ignition = body[order, 0].reshape(grid.shape)
    return FieldStack(
        grid=grid,
        scaling=ScalingTransform.identity(),
        times=np.array([s.time for s in snapshots]),
        fields=np.stack([s.values for s in snapshots]),
        ignition_time=ignition,
    )


def write_metrics(out_dir: PathLike, series: MetricsSeries) -> List[Path]:
    """Metrics as a JSON array of records and a CSV with the same columns."""
    out = ensure_dir(out_dir)
    records = [r.model_dump(mode="json") for r in series.records]
    json_path = write_json(out / "metrics.json", records)
    csv_path = write_csv(
        out / "metrics.csv",
        METRIC_COLUMNS,
        ([getattr(r, name) for name in METRIC_COLUMNS] for r in series.records),
    )
    return [json_path, csv_path]


def write_fireline(path: PathLike, fireline: Fireline) -> Path:
    return write_csv(path, ("loop_id", "x", "y"), fireline.rows())


def write_euler_study(out_dir: PathLike, history: Sequence[float], verdict: EulerVerdict) -> List[Path]:
    out = ensure_dir(out_dir)
    return [write_loss_history(out / "euler_history.csv", history), write_json(out / "euler_verdict.json", verdict)]


def write_manifest(out_dir: PathLike, manifest: RunManifest) -> Path:
    """
    Write ``manifest.json`` after checking every listed artifact exists.

    Raises:
        ArtifactError: When a listed artifact is missing
    """
    for listed in manifest.artifacts:
        if not Path(listed).exists():
            raise ArtifactError("manifest lists a missing artifact", path=listed)
    path = write_json(Path(out_dir) / "manifest.json", manifest)
    logger.info(f"Manifest written to {path}")
    return path
