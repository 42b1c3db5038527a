"""Tests for scenario models and the scenario loader."""
import numpy as np
import pytest
from pydantic import ValidationError

from firepinn.errors import ArtifactError, ScenarioError
from firepinn.models.polynomial import SpaceTimePolynomial
from firepinn.models.scenario import (
    AxisMap,
    Domain3,
    EllipticalCone,
    IgnitionShape,
    ScalingTransform,
    TerrainModel,
    initial_levelset,
    initial_levelset_gradient,
    scale_point,
    unscale_point,
)
from firepinn.services.scenario_loader import (
    bundled_scenario,
    fuel_table,
    load_scenario,
    load_scenario_file,
)

from tests.fixtures.scenarios import make_scenario

CIRCLE_DOC = """
name = "doc"

[domain]
t_min = 0.0
t_max = 100.0
x_min = 0.0
x_max = 200.0
y_min = 0.0
y_max = 400.0

[fuel]
r0 = 0.1
c = 0.2
b = 1.0
e = 5.0
d = 0.0
tf = 30.0

[[ignition]]
x0 = 5.0
y0 = 5.0
a = 1.0
b = 1.0
h = 1.0
"""


class TestDomainAndScaling:
    """Test domain validation and affine scaling."""

    def test_domain_requires_positive_extent(self):
        """Test an empty axis is rejected with its name."""
        with pytest.raises(ValidationError, match="t_max must be greater than t_min"):
            Domain3(t_min=1.0, t_max=1.0, x_min=0.0, x_max=1.0, y_min=0.0, y_max=1.0)

    def test_axis_factor_positive(self):
        """Test a non-positive factor is rejected."""
        with pytest.raises(ValidationError):
            AxisMap(name="x", factor=0.0)

    def test_for_domain_maps_box_to_target(self):
        """Test proportional scaling maps each axis onto [0, 10]."""
        domain = Domain3(t_min=0.0, t_max=1800.0, x_min=-500.0, x_max=500.0, y_min=0.0, y_max=2000.0)
        xf = ScalingTransform.for_domain(domain)

        lo = xf.scale_point([0.0, -500.0, 0.0])
        hi = xf.scale_point([1800.0, 500.0, 2000.0])

        np.testing.assert_allclose(lo, [0.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(hi, [10.0, 10.0, 10.0])

    def test_scale_unscale_inverse(self):
        """Test unscale undoes scale on random points."""
        domain = Domain3(t_min=10.0, t_max=70.0, x_min=-3.0, x_max=9.0, y_min=2.0, y_max=5.0)
        xf = ScalingTransform.for_domain(domain)
        points = np.random.default_rng(0).uniform(-50.0, 50.0, size=(100, 3))

        np.testing.assert_allclose(unscale_point(xf, scale_point(xf, points)), points, rtol=1e-12, atol=1e-12)

    def test_spread_factor_and_anisotropy(self):
        """Test the derived rate factor and y/x ratio."""
        domain = Domain3(t_min=0.0, t_max=100.0, x_min=0.0, x_max=200.0, y_min=0.0, y_max=400.0)
        xf = ScalingTransform.for_domain(domain)

        assert xf.spread_factor() == pytest.approx((10.0 / 200.0) / (10.0 / 100.0))
        assert xf.anisotropy() == pytest.approx(0.5)

    def test_identity(self):
        """Test the identity transform leaves points unchanged."""
        xf = ScalingTransform.identity()

        assert xf.spread_factor() == 1.0
        assert xf.anisotropy() == 1.0
        np.testing.assert_array_equal(xf.scale_point([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


class TestIgnition:
    """Test ignition cones and the initial level set."""

    def test_axis_scale_must_be_positive(self):
        """Test a zero axis scale is rejected."""
        with pytest.raises(ValidationError, match="axis scale must be positive"):
            EllipticalCone(x0=0.0, y0=0.0, a=0.0, b=1.0, h=1.0)

    def test_offset_must_be_positive(self):
        """Test h <= 0 is rejected."""
        with pytest.raises(ValidationError, match="downward offset h must be positive"):
            EllipticalCone(x0=0.0, y0=0.0, a=1.0, b=1.0, h=0.0)

    def test_initial_levelset_values(self):
        """Test psi0 is -h at the center and zero on the ellipse."""
        shape = IgnitionShape(cones=(EllipticalCone(x0=1.0, y0=2.0, a=2.0, b=0.5, h=1.0),))

        assert initial_levelset(shape, 1.0, 2.0) == pytest.approx(-1.0)
        assert initial_levelset(shape, 1.5, 2.0) == pytest.approx(0.0)
        assert initial_levelset(shape, 1.0, 4.0) == pytest.approx(0.0)
        assert initial_levelset(shape, 3.0, 2.0) > 0.0

    def test_union_of_cones_is_minimum(self):
        """Test two cones combine by pointwise minimum."""
        shape = IgnitionShape(
            cones=(
                EllipticalCone(x0=-2.0, y0=0.0, a=1.0, b=1.0, h=1.0),
                EllipticalCone(x0=2.0, y0=0.0, a=1.0, b=1.0, h=1.0),
            )
        )
        x = np.array([-2.0, 0.0, 2.0])

        np.testing.assert_allclose(initial_levelset(shape, x, np.zeros(3)), [-1.0, 1.0, -1.0])

    def test_gradient_matches_differences(self):
        """Test the analytic gradient of the two-cone union against central differences."""
        shape = IgnitionShape(
            cones=(
                EllipticalCone(x0=-1.0, y0=0.0, a=2.0, b=0.5, h=1.0),
                EllipticalCone(x0=1.5, y0=0.5, a=1.0, b=3.0, h=0.5),
            )
        )
        rng = np.random.default_rng(4)
        x, y = rng.uniform(-3.0, 3.0, size=(2, 200))
        h = 1e-6

        gx, gy = initial_levelset_gradient(shape, x, y)
        fd_x = (initial_levelset(shape, x + h, y) - initial_levelset(shape, x - h, y)) / (2.0 * h)
        fd_y = (initial_levelset(shape, x, y + h) - initial_levelset(shape, x, y - h)) / (2.0 * h)

        # psi0 has a kink where the lower cone changes
        both = np.stack([initial_levelset(IgnitionShape(cones=(c,)), x, y) for c in shape.cones])
        smooth = np.abs(both[0] - both[1]) > 1e-3
        np.testing.assert_allclose(gx[smooth], fd_x[smooth], atol=1e-6)
        np.testing.assert_allclose(gy[smooth], fd_y[smooth], atol=1e-6)

    def test_gradient_zero_at_apex(self):
        """Test the gradient is zero at the cone center and equals a or b along its axes."""
        shape = IgnitionShape(cones=(EllipticalCone(x0=1.0, y0=2.0, a=2.0, b=0.5, h=1.0),))

        gx, gy = initial_levelset_gradient(shape, np.array([1.0, 3.0, 1.0]), np.array([2.0, 2.0, 5.0]))

        np.testing.assert_allclose(gx, [0.0, 2.0, 0.0])
        np.testing.assert_allclose(gy, [0.0, 0.0, 0.5])

    def test_center_outside_domain_rejected(self):
        """Test an ignition center outside the scaled box is rejected."""
        with pytest.raises(ValidationError, match="lies outside the domain"):
            make_scenario(cones=((9.0, 0.0, 1.0, 1.0, 1.0),))


class TestTerrainAndPolynomial:
    """Test polynomial inputs."""

    def test_coefficient_count_checked(self):
        """Test a wrong coefficient count is rejected."""
        with pytest.raises(ValidationError, match="needs 4 coefficients"):
            SpaceTimePolynomial(degree_x=1, degree_y=1, coefficients=[1.0, 2.0])

    def test_terrain_degree_limit(self):
        """Test a degree-5 terrain fit is rejected."""
        z = SpaceTimePolynomial(degree_x=5, coefficients=[0.0] * 6)

        with pytest.raises(ValidationError, match="max_degree"):
            TerrainModel(z=z)

    def test_terrain_is_static(self):
        """Test terrain may not depend on time."""
        z = SpaceTimePolynomial(degree_t=1, coefficients=[0.0, 1.0])

        with pytest.raises(ValidationError, match="cannot depend on time"):
            TerrainModel(z=z)

    def test_plane_gradient(self):
        """Test the gradient of z = 2 + 3x - y."""
        z = SpaceTimePolynomial(degree_x=1, degree_y=1, coefficients=[2.0, -1.0, 3.0, 0.0])
        terrain = TerrainModel(z=z)

        zx, zy = terrain.gradient(np.array([0.0, 5.0]), np.array([1.0, -2.0]))

        np.testing.assert_allclose(zx, [3.0, 3.0])
        np.testing.assert_allclose(zy, [-1.0, -1.0])
        assert terrain.elevation(1.0, 1.0) == pytest.approx(4.0)


class TestScenarioLoader:
    """Test TOML scenario parsing and validation."""

    def test_load_document(self):
        """Test a minimal document loads with proportional scaling."""
        scenario = load_scenario(CIRCLE_DOC)

        assert scenario.name == "doc"
        assert scenario.scaled_bounds("x") == pytest.approx((0.0, 10.0))
        assert scenario.scaling.anisotropy() == pytest.approx(0.5)
        assert scenario.fuel.r0 == 0.1

    def test_unknown_key_rejected(self):
        """Test unknown keys raise ScenarioError naming the key."""
        with pytest.raises(ScenarioError, match="colour"):
            load_scenario('colour = "red"\n' + CIRCLE_DOC)

    def test_parse_error_carries_path(self):
        """Test malformed TOML raises ScenarioError with the source path."""
        with pytest.raises(ScenarioError) as exc_info:
            load_scenario("[domain\n", source="broken.toml")

        assert exc_info.value.path == "broken.toml"
        assert "parse error" in str(exc_info.value)

    def test_invalid_cone(self):
        """Test a cone with a zero axis scale names the violated rule."""
        text = CIRCLE_DOC.replace("a = 1.0", "a = 0.0")

        with pytest.raises(ScenarioError, match="axis scale must be positive"):
            load_scenario(text)

    def test_missing_ignition(self):
        """Test a document without ignition cones is rejected."""
        text = CIRCLE_DOC.split("[[ignition]]")[0]

        with pytest.raises(ScenarioError, match="ignition"):
            load_scenario(text)

    def test_fuel_category_fills_coefficients(self):
        """Test [fuel] category pulls the bundled row."""
        text = CIRCLE_DOC.replace("r0 = 0.1\nc = 0.2\nb = 1.0\ne = 5.0\nd = 0.0\ntf = 30.0", "category = 1")

        scenario = load_scenario(text)

        assert scenario.fuel == fuel_table()[1]

    def test_fuel_table_has_thirteen_categories(self):
        """Test the bundled table covers categories 1 to 13."""
        assert sorted(fuel_table()) == list(range(1, 14))

    def test_missing_file(self, tmp_path):
        """Test reading a missing file raises ArtifactError with the path."""
        missing = tmp_path / "nope.toml"

        with pytest.raises(ArtifactError) as exc_info:
            load_scenario_file(missing)

        assert exc_info.value.path == str(missing)

    def test_load_from_file(self, tmp_path):
        """Test loading a document from disk."""
        path = tmp_path / "doc.toml"
        path.write_text(CIRCLE_DOC)

        assert load_scenario_file(path) == load_scenario(CIRCLE_DOC)

    @pytest.mark.parametrize("name", ["one_fire", "isom_creek", "circle"])
    def test_bundled_scenarios_load(self, name):
        """Test every shipped preset validates."""
        scenario = bundled_scenario(name)

        assert scenario.name == name

    def test_content_hash_is_stable(self):
        """Test equal scenarios hash equally and different ones do not."""
        a = load_scenario(CIRCLE_DOC)
        b = load_scenario(CIRCLE_DOC)
        c = load_scenario(CIRCLE_DOC.replace("r0 = 0.1", "r0 = 0.2"))

        assert a.content_hash() == b.content_hash()
        assert a.content_hash() != c.content_hash()
