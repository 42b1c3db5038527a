"""Tests for the finite-difference reference solver."""
import logging

import numpy as np
import pytest

from firepinn.errors import CFLError
from firepinn.models.grid import Grid2
from firepinn.services.classical import (
    domain_grid,
    fuel_fraction,
    godunov_grad_mag,
    heun_step,
    laplacian,
    max_stable_dt,
    solve,
    spread_on_grid,
)
from firepinn.services.geometry import fireline_of, hausdorff, resample

from tests.fixtures.scenarios import make_scenario, random_scenario


def circle_points(radius: float, n: int = 4000) -> np.ndarray:
    angles = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


class TestOperators:
    """Test the spatial operators."""

    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_linear_field_has_unit_gradient(self, sign):
        """Test |grad psi| = 1 for psi = +-x, borders included."""
        grid = Grid2.covering(0.0, 1.0, 0.0, 1.0, 11, 11)
        gx, _ = grid.mesh()

        mag = godunov_grad_mag(sign * gx, grid.dx, grid.dy)

        np.testing.assert_allclose(mag, 1.0, atol=1e-12)

    def test_anisotropy_scales_y(self):
        """Test the y difference is weighted by the anisotropy."""
        grid = Grid2.covering(0.0, 1.0, 0.0, 1.0, 11, 11)
        _, gy = grid.mesh()

        assert godunov_grad_mag(gy, grid.dx, grid.dy, anisotropy=2.0, i=5, j=5) == pytest.approx(2.0)

    def test_laplacian_of_paraboloid(self):
        """Test the five-point Laplacian of x^2 + y^2 is 4 inside."""
        grid = Grid2.covering(-1.0, 1.0, -1.0, 1.0, 21, 21)
        gx, gy = grid.mesh()

        lap = laplacian(gx**2 + gy**2, grid.dx, grid.dy)

        np.testing.assert_allclose(lap[1:-1, 1:-1], 4.0, atol=1e-9)

    def test_stable_dt(self):
        """Test the advective and diffusive bounds."""
        assert max_stable_dt(0.0, 0.1, 0.1) == np.inf
        assert max_stable_dt(1.0, 0.1, 0.1) == pytest.approx(0.05)
        assert max_stable_dt(0.0, 0.1, 0.1, viscosity=1.0) == pytest.approx(0.0025)

    def test_cfl_violation(self):
        """Test a step beyond the stable bound raises CFLError."""
        psi = np.zeros((5, 5))

        with pytest.raises(CFLError, match="exceeds stable bound"):
            heun_step(psi, 0.1, np.ones((5, 5)), 0.1, 0.1)

    def test_step_never_increases_psi(self):
        """Test outward motion only lowers psi."""
        grid = Grid2.covering(-2.0, 2.0, -2.0, 2.0, 41, 41)
        gx, gy = grid.mesh()
        psi = np.hypot(gx, gy) - 1.0

        new = heun_step(psi, 0.04, np.full(grid.shape, 0.5), grid.dx, grid.dy)

        assert np.all(new <= psi)


class TestSolve:
    """Test full solves."""

    def test_circle_radius(self, circle_scenario):
        """Test the unit circle grows to radius 1 + t within two cells."""
        grid = domain_grid(circle_scenario, 401, 401)
        times = [0.5, 1.0, 2.0]

        stack = solve(circle_scenario, grid, times)

        for index, t in enumerate(times):
            line = fireline_of(stack.snapshot(index))
            points = np.vstack([resample(p, 0.5 * grid.dx) for p in line.polylines])
            assert hausdorff(points, circle_points(1.0 + t)) <= 2.0 * grid.dx

    def test_psi_monotone_in_time(self):
        """Test psi is non-increasing at every node on random scenarios."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            scenario = random_scenario(rng)
            grid = domain_grid(scenario, 41, 41)

            stack = solve(scenario, grid, [0.25, 1.0, 2.5])

            assert np.all(np.diff(stack.fields, axis=0) <= 1e-12)
            burned = stack.fields[-1] <= 0.0
            assert np.all(np.isfinite(stack.ignition_time[burned]))
            assert np.all(stack.ignition_time[burned] <= 2.5)

    def test_ignition_times(self, circle_scenario):
        """Test initially burning nodes are stamped t_lo and far nodes stay NaN."""
        grid = domain_grid(circle_scenario, 81, 81)

        stack = solve(circle_scenario, grid, [1.0])
        center = (40, 40)

        assert stack.ignition_time[center] == 0.0
        assert np.isnan(stack.ignition_time[0, 0])
        ring = stack.ignition_time[58, 40]  # x = 1.8, reached at t ~ 0.8
        assert 0.75 <= ring <= 0.9

    def test_frozen_front(self, caplog):
        """Test S = 0 keeps the initial field and warns."""
        scenario = make_scenario(r0=0.0)
        grid = domain_grid(scenario, 21, 21)

        with caplog.at_level(logging.WARNING):
            stack = solve(scenario, grid, [1.0, 2.0])

        np.testing.assert_array_equal(stack.fields[0], stack.fields[1])
        assert "frozen" in caplog.text

    def test_physical_times(self, windy_scenario):
        """Test stack times convert back to physical seconds."""
        grid = domain_grid(windy_scenario, 21, 21)

        stack = solve(windy_scenario, grid, [1.0, 5.0])

        np.testing.assert_allclose(stack.physical_times, [60.0, 300.0])
        assert stack.index_of(300.0) == 1
        assert stack.index_of(200.0) is None
        assert stack.physical_grid.box() == pytest.approx((0.0, 500.0, 0.0, 500.0))

    def test_spread_on_grid_constant(self, circle_scenario):
        """Test the grid spread rate for constant S."""
        grid = domain_grid(circle_scenario, 11, 11)
        gx, gy = grid.mesh()

        speed = spread_on_grid(circle_scenario, 0.0, np.hypot(gx, gy), grid)

        np.testing.assert_allclose(speed, 1.0)

    @pytest.mark.parametrize(
        "times,message",
        [
            ([], "at least one"),
            ([1.0, 3.0], "inside"),
            ([-0.5], "inside"),
            ([1.0, 1.0], "strictly increasing"),
        ],
    )
    def test_bad_times(self, circle_scenario, times, message):
        """Test output times are validated."""
        grid = domain_grid(circle_scenario, 11, 11)

        with pytest.raises(ValueError, match=message):
            solve(circle_scenario, grid, times)

    def test_tiny_grid_rejected(self, circle_scenario):
        """Test finite differences refuse grids with fewer than 3 nodes per axis."""
        with pytest.raises(ValueError, match="at least 3x3"):
            solve(circle_scenario, domain_grid(circle_scenario, 2, 2), [1.0])

    @pytest.mark.slow
    def test_refinement_halves_error(self, circle_scenario):
        """Test the front error against r = 1 + t is first order and within two cells."""
        times = [0.5, 1.0, 2.0]
        errors, spacings = [], []
        for n in (101, 201, 401):
            grid = domain_grid(circle_scenario, n, n)
            stack = solve(circle_scenario, grid, times)
            per_time = []
            for k, t in enumerate(times):
                points = fireline_of(stack.snapshot(k)).points()
                per_time.append(np.max(np.abs(np.hypot(points[:, 0], points[:, 1]) - (1.0 + t))))
            errors.append(np.array(per_time))
            spacings.append(grid.dx)

        for coarse, fine in zip(errors, errors[1:]):
            assert np.all((coarse / fine >= 1.5) & (coarse / fine <= 2.5))
        for error, dx in zip(errors, spacings):
            assert np.all(error <= 2.0 * dx)


class TestFuelFraction:
    """Test the burn-down of fuel."""

    def test_values(self):
        """Test unburned, never ignited and burning nodes."""
        t_i = np.array([np.nan, 10.0, 2.0])

        out = fuel_fraction(5.0, t_i, 3.0)

        np.testing.assert_allclose(out, [1.0, 1.0, np.exp(-1.0)])

    def test_scalar(self):
        """Test scalar input gives a float."""
        assert fuel_fraction(4.0, 4.0, 2.0) == 1.0
        assert isinstance(fuel_fraction(6.0, 4.0, 2.0), float)

    def test_burn_time_positive(self):
        """Test a non-positive burn time is rejected."""
        with pytest.raises(ValueError, match="burn time must be positive"):
            fuel_fraction(1.0, 0.0, 0.0)

    def test_stack_fuel_fraction(self, circle_scenario):
        """Test the stack helper drains fuel where the front has passed."""
        stack = solve(circle_scenario, domain_grid(circle_scenario, 41, 41), [2.0])

        fuel = stack.fuel_fraction_at(2.0, 10.0)

        assert fuel[20, 20] == pytest.approx(np.exp(-0.2))
        assert fuel[0, 0] == 1.0
        assert np.all((fuel > 0.0) & (fuel <= 1.0))
