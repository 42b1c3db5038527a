"""
Fireline extraction and the distance, area and perimeter metrics used to
compare two level-set sources.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from firepinn.errors import DomainMismatchError, EmptyFirelineError
from firepinn.models.fireline import Fireline, MetricsRecord, MetricsSeries, Polyline
from firepinn.models.grid import FieldStack, Grid2, ScalarField2
from firepinn.models.training import LevelSetSolution

logger = logging.getLogger(__name__)

Source = Union[FieldStack, LevelSetSolution]
EdgeKey = Tuple[str, int, int]

# corner order 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1); edge k joins corner k and k+1
_CELL_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))
HAUSDORFF_CHUNK = 2048


def _edge_key(i: int, j: int, edge: int) -> EdgeKey:
    if edge == 0:
        return ("h", i, j)
    if edge == 1:
        return ("v", i + 1, j)
    if edge == 2:
        return ("h", i, j + 1)
    return ("v", i, j)


def _cell_segments(positive: Tuple[bool, bool, bool, bool], center_positive: bool) -> List[Tuple[int, int]]:
    crossing = [e for e, (a, b) in enumerate(_CELL_EDGES) if positive[a] != positive[b]]
    if len(crossing) == 2:
        return [tuple(crossing)]
    if len(crossing) == 4:
        # saddle: the center sample decides whether corners 0 and 2 are joined
        if center_positive == positive[0]:
            return [(0, 1), (2, 3)]
        return [(3, 0), (1, 2)]
    return []


def _chain(segments: List[Tuple[EdgeKey, EdgeKey]]) -> List[Tuple[List[EdgeKey], bool]]:
    node_segments: Dict[EdgeKey, List[int]] = {}
    for index, (a, b) in enumerate(segments):
        node_segments.setdefault(a, []).append(index)
        node_segments.setdefault(b, []).append(index)
    used = [False] * len(segments)

    def walk(start: EdgeKey) -> List[EdgeKey]:
        path = [start]
        current = start
        while True:
            nxt = next((s for s in node_segments[current] if not used[s]), None)
            if nxt is None:
                return path
            used[nxt] = True
            a, b = segments[nxt]
            current = b if a == current else a
            path.append(current)
            if current == start:
                return path

    chains = []
    for key, segs in node_segments.items():
        if len(segs) == 1 and not used[segs[0]]:
            chains.append((walk(key), False))
    for index, (a, _) in enumerate(segments):
        if not used[index]:
            path = walk(a)
            chains.append((path, path[-1] == path[0]))
    return chains


def _dedupe(points: np.ndarray, closed: bool) -> np.ndarray:
    if points.shape[0] == 0:
        return points
    keep = np.ones(points.shape[0], dtype=bool)
    keep[1:] = np.any(np.diff(points, axis=0) != 0.0, axis=1)
    points = points[keep]
    if closed and points.shape[0] > 1 and np.all(points[0] == points[-1]):
        points = points[:-1]
    return points


def extract_fireline(
    values: np.ndarray, grid: Grid2, level: float = 0.0, time: float = 0.0
) -> Fireline:
    """
    Marching-squares contour of ``values`` at ``level``.

    Crossings are placed by linear interpolation along cell edges; saddle
    cells are resolved by the sign of the mean of their four corners.
    An all-positive or all-negative field gives an empty fireline.
    """
    v = np.asarray(values, dtype=float) - level
    if v.shape != grid.shape:
        raise ValueError(f"field shape {v.shape} does not match grid {grid.shape}")
    pos = v > 0.0
    corners = (pos[:-1, :-1], pos[1:, :-1], pos[1:, 1:], pos[:-1, 1:])
    case = (
        corners[0].astype(int)
        | (corners[1].astype(int) << 1)
        | (corners[2].astype(int) << 2)
        | (corners[3].astype(int) << 3)
    )
    cells_i, cells_j = np.nonzero((case != 0) & (case != 15))
    xs, ys = grid.xs, grid.ys

    points: Dict[EdgeKey, Tuple[float, float]] = {}

    def crossing(key: EdgeKey) -> Tuple[float, float]:
        if key not in points:
            kind, i, j = key
            if kind == "h":
                v0, v1 = v[i, j], v[i + 1, j]
                s = v0 / (v0 - v1)
                points[key] = (xs[i] + s * grid.dx, ys[j])
            else:
                v0, v1 = v[i, j], v[i, j + 1]
                s = v0 / (v0 - v1)
                points[key] = (xs[i], ys[j] + s * grid.dy)
        return points[key]

    segments: List[Tuple[EdgeKey, EdgeKey]] = []
    for i, j in zip(cells_i.tolist(), cells_j.tolist()):
        flags = (bool(pos[i, j]), bool(pos[i + 1, j]), bool(pos[i + 1, j + 1]), bool(pos[i, j + 1]))
        center = 0.25 * (v[i, j] + v[i + 1, j] + v[i + 1, j + 1] + v[i, j + 1]) > 0.0
        for ea, eb in _cell_segments(flags, center):
            segments.append((_edge_key(i, j, ea), _edge_key(i, j, eb)))

    polylines = []
    for path, closed in _chain(segments):
        pts = np.array([crossing(k) for k in path], dtype=float)
        if closed:
            pts = pts[:-1]
        pts = _dedupe(pts, closed)
        if pts.shape[0] >= (3 if closed else 2):
            polylines.append(Polyline(points=pts, closed=closed))
        elif pts.shape[0] == 2:
            polylines.append(Polyline(points=pts, closed=False))
    return Fireline(time=float(time), polylines=tuple(polylines))


def fireline_of(field: ScalarField2, level: float = 0.0) -> Fireline:
    return extract_fireline(field.values, field.grid, level, field.time)


def polyline_length(polyline: Polyline) -> float:
    """Sum of segment lengths, including the closing segment of a loop."""
    return float(np.sum(np.linalg.norm(np.diff(polyline.vertices(), axis=0), axis=1)))


def polygon_area(polyline: Polyline) -> float:
    """Shoelace area of a closed polyline."""
    if not polyline.closed:
        raise ValueError("area requires a closed polyline")
    if len(polyline) < 3:
        raise ValueError("area requires at least 3 points")
    x, y = polyline.points[:, 0], polyline.points[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def resample(polyline: Polyline, spacing: float) -> np.ndarray:
    """Points at uniform arc-length spacing no larger than ``spacing``, ends included."""
    verts = polyline.vertices()
    seg = np.linalg.norm(np.diff(verts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    n = max(int(np.ceil(total / spacing)), 1)
    s = np.linspace(0.0, total, n + 1)
    if polyline.closed:
        s = s[:-1]
    return np.column_stack([np.interp(s, arc, verts[:, 0]), np.interp(s, arc, verts[:, 1])])


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """
    Two-sided Hausdorff distance between finite point sets (brute force).

    Raises:
        EmptyFirelineError: When either set is empty
    """
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptyFirelineError("Hausdorff distance needs two nonempty point sets")
    a_to_b = 0.0
    b_to_a = np.full(b.shape[0], np.inf)
    for start in range(0, a.shape[0], HAUSDORFF_CHUNK):
        d = cdist(a[start:start + HAUSDORFF_CHUNK], b)
        a_to_b = max(a_to_b, float(np.max(np.min(d, axis=1))))
        np.minimum(b_to_a, np.min(d, axis=0), out=b_to_a)
    return max(a_to_b, float(np.max(b_to_a)))


def fireline_distance(a: Fireline, b: Fireline, spacing: float) -> float:
    """Hausdorff distance after resampling every polyline at ``spacing``."""
    if a.is_empty or b.is_empty:
        raise EmptyFirelineError(f"fireline at t={a.time if a.is_empty else b.time} is empty")
    pa = np.vstack([resample(p, spacing) for p in a.polylines])
    pb = np.vstack([resample(p, spacing) for p in b.polylines])
    return hausdorff(pa, pb)


def fireline_perimeter(fireline: Fireline) -> float:
    return float(sum(polyline_length(p) for p in fireline.polylines))


def fireline_area(fireline: Fireline, field: Optional[ScalarField2] = None, level: float = 0.0) -> float:
    """
    Burned area enclosed by the fireline, loops summed.

    Open polylines (fire touching the border) fall back to counting grid
    nodes with psi <= level when the field is available.
    """
    if fireline.all_closed:
        return float(sum(polygon_area(p) for p in fireline.polylines))
    if field is None:
        raise ValueError("open fireline and no field to estimate its area from")
    logger.warning(f"Fireline at t={fireline.time:g} is open; estimating area from grid cells")
    return cell_count_area(field, level)


def cell_count_area(field: ScalarField2, level: float = 0.0) -> float:
    return float(np.count_nonzero(field.values <= level) * field.grid.dx * field.grid.dy)


def _spatial_box(source: Source) -> Tuple[float, float, float, float]:
    if isinstance(source, FieldStack):
        return source.physical_grid.box()
    domain = source.scenario.domain
    return (domain.x_min, domain.x_max, domain.y_min, domain.y_max)


def check_same_domain(a: Source, b: Source, rtol: float = 1e-9) -> None:
    """Raise DomainMismatchError unless both sources cover the same spatial box."""
    box_a, box_b = np.array(_spatial_box(a)), np.array(_spatial_box(b))
    scale = max(1.0, float(np.max(np.abs(np.concatenate([box_a, box_b])))))
    if np.any(np.abs(box_a - box_b) > rtol * scale):
        raise DomainMismatchError(tuple(box_a.tolist()), tuple(box_b.tolist()))


def field_at(source: Source, t: float, grid: Optional[Grid2] = None) -> ScalarField2:
    """
    Field of ``source`` at physical time ``t``.

    Stacks must hold a snapshot at ``t``; solutions are evaluated on ``grid``.
    """
    if isinstance(source, FieldStack):
        index = source.index_of(t)
        if index is None:
            raise ValueError(f"no snapshot at t={t}")
        return source.snapshot(index)
    from firepinn.services.pinn import evaluate

    if grid is None:
        d = source.scenario.domain
        grid = Grid2.covering(d.x_min, d.x_max, d.y_min, d.y_max, 201, 201)
    return evaluate(source, t, grid)


def compare_at(
    a: Source,
    b: Source,
    t: float,
    grid: Optional[Grid2] = None,
    area_normalization: Literal["sqrt", "plain"] = "sqrt",
) -> MetricsRecord:
    """Metrics between the firelines of ``a`` and ``b`` at physical time ``t``."""
    field_a = field_at(a, t, grid)
    field_b = field_at(b, t, grid)
    line_a, line_b = fireline_of(field_a), fireline_of(field_b)
    if line_a.is_empty or line_b.is_empty:
        logger.info(f"Fireline absent at t={t:g}; record flagged")
        return MetricsRecord(time=float(t), absent=True)

    spacing = 0.5 * min(field_a.grid.dx, field_a.grid.dy, field_b.grid.dx, field_b.grid.dy)
    distance = fireline_distance(line_a, line_b, spacing)
    area_a = fireline_area(line_a, field_a)
    area_b = fireline_area(line_b, field_b)
    perim_a = fireline_perimeter(line_a)
    perim_b = fireline_perimeter(line_b)
    norm = np.sqrt(area_a) if area_normalization == "sqrt" else area_a
    return MetricsRecord(
        time=float(t),
        hausdorff=distance,
        hausdorff_area=distance / norm if norm > 0.0 else None,
        hausdorff_perimeter=distance / perim_a if perim_a > 0.0 else None,
        area_a=area_a,
        area_b=area_b,
        perimeter_a=perim_a,
        perimeter_b=perim_b,
    )


def compare_series(
    a: Source,
    b: Source,
    times: Sequence[float],
    grid: Optional[Grid2] = None,
    area_normalization: Literal["sqrt", "plain"] = "sqrt",
    workers: int = 1,
) -> MetricsSeries:
    """
    Compare two sources at each physical time.

    Times where either fireline is empty produce an ``absent`` record.

    Raises:
        DomainMismatchError: When the sources cover different spatial boxes
    """
    check_same_domain(a, b)
    times = [float(t) for t in times]

    def one(t: float) -> MetricsRecord:
        return compare_at(a, b, t, grid, area_normalization)

    if workers > 1 and len(times) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, times))
    else:
        records = [one(t) for t in times]
    return MetricsSeries(area_normalization=area_normalization, records=tuple(records))
