"""Tests for fireline extraction and comparison metrics."""
import numpy as np
import pytest

from firepinn.errors import DomainMismatchError, EmptyFirelineError
from firepinn.models.fireline import Fireline, Polyline
from firepinn.models.grid import FieldStack, Grid2, ScalarField2
from firepinn.models.scenario import ScalingTransform
from firepinn.services.classical import domain_grid, solve
from firepinn.services.geometry import (
    HAUSDORFF_CHUNK,
    cell_count_area,
    check_same_domain,
    compare_at,
    compare_series,
    extract_fireline,
    field_at,
    fireline_area,
    fireline_distance,
    fireline_of,
    fireline_perimeter,
    hausdorff,
    polygon_area,
    polyline_length,
    resample,
)

from tests.fixtures.scenarios import make_scenario


def brute_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def disc_field(grid: Grid2, radius: float, center=(0.0, 0.0)) -> np.ndarray:
    gx, gy = grid.mesh()
    return np.hypot(gx - center[0], gy - center[1]) - radius


SQUARE = Polyline(points=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), closed=True)


class TestExtraction:
    """Test marching squares."""

    def test_circle_contour(self):
        """Test a disc gives one closed loop on the circle."""
        grid = Grid2.covering(-3.0, 3.0, -3.0, 3.0, 61, 61)

        line = extract_fireline(disc_field(grid, 1.5), grid, time=2.0)

        assert line.time == 2.0
        assert len(line.polylines) == 1
        assert line.all_closed
        radii = np.hypot(*line.points().T)
        np.testing.assert_allclose(radii, 1.5, atol=grid.dx**2)
        assert fireline_area(line) == pytest.approx(np.pi * 1.5**2, rel=0.01)
        assert fireline_perimeter(line) == pytest.approx(2.0 * np.pi * 1.5, rel=0.01)

    def test_two_loops(self):
        """Test separate fires give separate loops."""
        grid = Grid2.covering(-4.0, 4.0, -2.0, 2.0, 81, 41)
        values = np.minimum(disc_field(grid, 1.0, (-2.0, 0.0)), disc_field(grid, 1.0, (2.0, 0.0)))

        line = extract_fireline(values, grid)

        assert len(line.polylines) == 2
        assert line.all_closed

    def test_open_line(self):
        """Test a front crossing the domain gives an open polyline."""
        grid = Grid2.covering(-1.0, 1.0, -1.0, 1.0, 11, 11)
        gx, _ = grid.mesh()

        line = extract_fireline(gx - 0.05, grid)

        assert len(line.polylines) == 1
        assert not line.polylines[0].closed
        np.testing.assert_allclose(line.points()[:, 0], 0.05)

    @pytest.mark.parametrize("offset", [1.0, -1.0])
    def test_single_sign_is_empty(self, offset):
        """Test an all-positive or all-negative field has no fireline."""
        grid = Grid2.covering(0.0, 1.0, 0.0, 1.0, 5, 5)

        assert extract_fireline(np.full(grid.shape, offset), grid).is_empty

    def test_level(self):
        """Test contours at a nonzero level."""
        grid = Grid2.covering(-3.0, 3.0, -3.0, 3.0, 61, 61)

        line = extract_fireline(disc_field(grid, 0.0), grid, level=2.0)

        np.testing.assert_allclose(np.hypot(*line.points().T), 2.0, atol=grid.dx)

    def test_shape_mismatch(self):
        """Test a field not matching its grid is rejected."""
        grid = Grid2.covering(0.0, 1.0, 0.0, 1.0, 5, 5)

        with pytest.raises(ValueError, match="does not match grid"):
            extract_fireline(np.zeros((4, 5)), grid)

    def test_single_node_grid_is_empty(self):
        """Test a one-node grid has no cells and so no fireline."""
        grid = Grid2.point(2.0, 3.0)

        assert grid.shape == (1, 1)
        assert extract_fireline(np.array([[-1.0]]), grid).is_empty

    def test_covering_needs_two_nodes(self):
        """Test a covering grid with one node per axis is refused."""
        with pytest.raises(ValueError, match="at least 2 nodes"):
            Grid2.covering(0.0, 1.0, 0.0, 1.0, 1, 5)

    def test_rows_repeat_first_point(self):
        """Test closed loops repeat their first point when written as rows."""
        line = Fireline(time=0.0, polylines=(SQUARE,))

        rows = line.rows()

        assert len(rows) == 5
        assert rows[0] == rows[-1] == (0, 0.0, 0.0)


class TestPolylineMetrics:
    """Test lengths, areas and resampling."""

    def test_square(self):
        """Test the unit square's perimeter and area."""
        assert polyline_length(SQUARE) == pytest.approx(4.0)
        assert polygon_area(SQUARE) == pytest.approx(1.0)

    def test_open_polyline_has_no_area(self):
        """Test area needs a closed polyline."""
        with pytest.raises(ValueError, match="closed"):
            polygon_area(Polyline(points=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])))

    def test_repeated_points_rejected(self):
        """Test consecutive duplicates are rejected."""
        with pytest.raises(ValueError, match="distinct"):
            Polyline(points=np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]))

    def test_resample_spacing(self):
        """Test resampled points are at most ``spacing`` apart along the loop."""
        points = resample(SQUARE, 0.3)
        closed = np.vstack([points, points[:1]])

        assert np.max(np.linalg.norm(np.diff(closed, axis=0), axis=1)) <= 0.3 + 1e-12
        assert np.allclose(points[0], [0.0, 0.0])

    def test_open_area_from_field(self, caplog):
        """Test an open fireline falls back to counting burned cells."""
        grid = Grid2.covering(-1.0, 1.0, -1.0, 1.0, 11, 11)
        gx, _ = grid.mesh()
        field = ScalarField2(time=0.0, grid=grid, values=gx - 0.05)
        line = fireline_of(field)

        assert fireline_area(line, field) == pytest.approx(cell_count_area(field))
        assert cell_count_area(field) == pytest.approx(66 * grid.dx * grid.dy)
        assert "open" in caplog.text
        with pytest.raises(ValueError, match="no field"):
            fireline_area(line)


class TestHausdorff:
    """Test the Hausdorff distance."""

    def test_matches_brute_force(self):
        """Test against a direct evaluation on random sets."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.normal(size=(int(rng.integers(1, 60)), 2))
            b = rng.normal(size=(int(rng.integers(1, 60)), 2))

            assert hausdorff(a, b) == pytest.approx(brute_hausdorff(a, b))

    def test_large_sets_are_chunked(self):
        """Test sets longer than one chunk give the same answer."""
        rng = np.random.default_rng(1)
        a = rng.uniform(size=(2 * HAUSDORFF_CHUNK + 17, 2))
        b = rng.uniform(size=(50, 2)) + 0.5

        assert hausdorff(a, b) == pytest.approx(brute_hausdorff(a, b))

    def test_metric_axioms(self):
        """Test identity, symmetry and the triangle inequality."""
        rng = np.random.default_rng(2)
        for _ in range(200):
            a, b, c = (rng.normal(size=(30, 2)) for _ in range(3))

            assert hausdorff(a, a) == 0.0
            assert hausdorff(a, b) == pytest.approx(hausdorff(b, a))
            assert hausdorff(a, c) <= hausdorff(a, b) + hausdorff(b, c) + 1e-12

    def test_empty_set(self):
        """Test an empty set raises EmptyFirelineError."""
        with pytest.raises(EmptyFirelineError):
            hausdorff(np.empty((0, 2)), np.zeros((3, 2)))

    def test_empty_fireline(self):
        """Test distances to an empty fireline are refused."""
        with pytest.raises(EmptyFirelineError, match="t=3.0"):
            fireline_distance(Fireline(time=3.0), Fireline(time=3.0, polylines=(SQUARE,)), 0.1)

    def test_concentric_circles(self):
        """Test circles of radius 1 and 1.25 are 0.25 apart."""
        grid = Grid2.covering(-2.0, 2.0, -2.0, 2.0, 201, 201)
        a = extract_fireline(disc_field(grid, 1.0), grid)
        b = extract_fireline(disc_field(grid, 1.25), grid)

        assert fireline_distance(a, b, 0.01) == pytest.approx(0.25, abs=2e-3)


class TestCompare:
    """Test comparisons between level-set sources."""

    @pytest.fixture
    def circle_stack(self, circle_scenario):
        return solve(circle_scenario, domain_grid(circle_scenario, 81, 81), [0.5, 1.0, 2.0])

    def test_stack_against_itself(self, circle_stack):
        """Test a source compared with itself has zero distance."""
        series = compare_series(circle_stack, circle_stack, [0.5, 1.0, 2.0])

        assert len(series.records) == 3
        for record in series.records:
            assert not record.absent
            assert record.hausdorff == 0.0
            assert record.area_a == record.area_b
            assert record.hausdorff_area == 0.0

    def test_workers_do_not_change_results(self, circle_stack):
        """Test parallel comparison matches the serial one."""
        serial = compare_series(circle_stack, circle_stack, [0.5, 1.0, 2.0])
        parallel = compare_series(circle_stack, circle_stack, [0.5, 1.0, 2.0], workers=3)

        assert serial == parallel

    def test_grid_refinement_is_close(self, circle_scenario, circle_stack):
        """Test a finer solve stays within a few cells of the coarse one."""
        fine = solve(circle_scenario, domain_grid(circle_scenario, 161, 161), [1.0])

        record = compare_at(circle_stack, fine, 1.0)

        assert record.hausdorff < 0.2
        assert record.area_a == pytest.approx(np.pi * 4.0, rel=0.05)
        assert record.hausdorff_perimeter == pytest.approx(record.hausdorff / record.perimeter_a)

    def test_plain_area_normalization(self, circle_stack):
        """Test plain normalization divides by the area itself."""
        record = compare_at(circle_stack, circle_stack, 1.0, area_normalization="plain")

        assert record.hausdorff_area == 0.0
        assert record.area_a > 0.0

    def test_domain_mismatch(self, circle_stack, windy_scenario):
        """Test sources over different boxes are refused."""
        other = solve(windy_scenario, domain_grid(windy_scenario, 21, 21), [1.0])

        with pytest.raises(DomainMismatchError):
            check_same_domain(circle_stack, other)
        with pytest.raises(DomainMismatchError, match="domains do not match"):
            compare_series(circle_stack, other, [1.0])

    def test_absent_fireline_flagged(self):
        """Test a time without a fireline yields an absent record."""
        grid = Grid2.covering(-2.0, 2.0, -2.0, 2.0, 21, 21)
        fields = np.stack([np.ones(grid.shape), disc_field(grid, 1.0)])
        stack = FieldStack(
            grid=grid,
            scaling=ScalingTransform.identity(),
            times=np.array([0.0, 1.0]),
            fields=fields,
            ignition_time=np.full(grid.shape, np.nan),
        )

        series = compare_series(stack, stack, [0.0, 1.0])

        assert series.records[0].absent
        assert series.records[0].hausdorff is None
        assert not series.records[1].absent
        assert series.column("absent") == [True, False]

    def test_missing_snapshot(self, circle_stack):
        """Test asking a stack for an unrecorded time fails."""
        with pytest.raises(ValueError, match="no snapshot at t=0.7"):
            field_at(circle_stack, 0.7)

    def test_scaled_stack_box(self):
        """Test physical boxes are compared, not training coordinates."""
        scenario = make_scenario(domain=(0.0, 100.0, 0.0, 200.0, 0.0, 400.0), scaled=True, cones=((5.0, 5.0, 1.0, 1.0, 1.0),))
        stack = solve(scenario, domain_grid(scenario, 11, 11), [1.0])

        assert stack.physical_grid.box() == pytest.approx((0.0, 200.0, 0.0, 400.0))
        check_same_domain(stack, stack)
