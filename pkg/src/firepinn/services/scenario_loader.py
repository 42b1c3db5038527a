"""Scenario document parsing and validation."""
from __future__ import annotations

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from firepinn.errors import ArtifactError, ScenarioError
from firepinn.models.polynomial import SpaceTimePolynomial
from firepinn.models.scenario import (
    Domain3,
    EllipticalCone,
    FuelParameters,
    IgnitionShape,
    ScalingTransform,
    ScenarioConfig,
    TerrainModel,
    WindModel,
)

logger = logging.getLogger(__name__)

STRICT = ConfigDict(extra="forbid")


class _DomainSection(BaseModel):
    model_config = STRICT

    t_min: float
    t_max: float
    x_min: float
    x_max: float
    y_min: float
    y_max: float


class _ScalingSection(BaseModel):
    model_config = STRICT

    target_extent: float = Field(default=10.0, gt=0.0)
    identity: bool = False


class _FuelSection(BaseModel):
    model_config = STRICT

    r0: Optional[float] = None
    c: Optional[float] = None
    b: Optional[float] = None
    e: Optional[float] = None
    d: Optional[float] = None
    tf: Optional[float] = None
    category: Optional[int] = None
    closure: Optional[Literal["multiplicative", "additive"]] = None
    s0: Optional[float] = None


class _WindSection(BaseModel):
    model_config = STRICT

    u_degrees: List[int] = Field(default_factory=lambda: [0, 0, 0], min_length=3, max_length=3)
    u_poly: List[float] = Field(default_factory=lambda: [0.0])
    v_degrees: List[int] = Field(default_factory=lambda: [0, 0, 0], min_length=3, max_length=3)
    v_poly: List[float] = Field(default_factory=lambda: [0.0])


class _TerrainSection(BaseModel):
    model_config = STRICT

    z_degrees: List[int] = Field(default_factory=lambda: [0, 0], min_length=2, max_length=2)
    z_poly: List[float] = Field(default_factory=lambda: [0.0])
    max_degree: int = 4


class _IgnitionEntry(BaseModel):
    model_config = STRICT

    x0: float
    y0: float
    a: float
    b: float
    h: float


class ScenarioDocument(BaseModel):
    """Schema of a scenario file; unknown keys are rejected."""

    model_config = STRICT

    name: str = "scenario"
    viscosity_eps: float = 0.0
    domain: _DomainSection
    scaling: _ScalingSection = Field(default_factory=_ScalingSection)
    fuel: _FuelSection
    wind: _WindSection = Field(default_factory=_WindSection)
    terrain: _TerrainSection = Field(default_factory=_TerrainSection)
    ignition: List[_IgnitionEntry] = Field(..., min_length=1)
    euler: Optional[Dict[str, Any]] = None


@lru_cache(maxsize=1)
def fuel_table() -> Dict[int, FuelParameters]:
    """
    Bundled 13-row Anderson-labelled fuel table.

    The coefficients are synthetic placeholders with plausible magnitudes.
    """
    text = resources.files("firepinn.data").joinpath("anderson_fuels.toml").read_text("utf-8")
    rows = tomllib.loads(text)["fuel"]
    return {int(row["category"]): FuelParameters(**row) for row in rows}


def format_validation_error(exc: ValidationError) -> str:
    first = exc.errors()[0]
    loc = ".".join(str(part) for part in first["loc"])
    msg = first["msg"].removeprefix("Value error, ")
    return f"{loc}: {msg}" if loc else msg


def _build_fuel(section: _FuelSection) -> FuelParameters:
    given = section.model_dump(exclude_none=True)
    if section.category is not None and section.category in fuel_table():
        base = fuel_table()[section.category].model_dump()
        base.update(given)
        given = base
    return FuelParameters(**given)


def _build_scenario(doc: ScenarioDocument) -> ScenarioConfig:
    domain = Domain3(**doc.domain.model_dump())
    if doc.scaling.identity:
        scaling = ScalingTransform.identity()
    else:
        scaling = ScalingTransform.for_domain(domain, doc.scaling.target_extent)
    wind = WindModel(
        u=SpaceTimePolynomial(
            degree_t=doc.wind.u_degrees[0],
            degree_x=doc.wind.u_degrees[1],
            degree_y=doc.wind.u_degrees[2],
            coefficients=doc.wind.u_poly,
        ),
        v=SpaceTimePolynomial(
            degree_t=doc.wind.v_degrees[0],
            degree_x=doc.wind.v_degrees[1],
            degree_y=doc.wind.v_degrees[2],
            coefficients=doc.wind.v_poly,
        ),
    )
    terrain = TerrainModel(
        z=SpaceTimePolynomial(
            degree_x=doc.terrain.z_degrees[0],
            degree_y=doc.terrain.z_degrees[1],
            coefficients=doc.terrain.z_poly,
        ),
        max_degree=doc.terrain.max_degree,
    )
    ignition = IgnitionShape(
        cones=tuple(EllipticalCone(**entry.model_dump()) for entry in doc.ignition)
    )
    return ScenarioConfig(
        name=doc.name,
        domain=domain,
        scaling=scaling,
        fuel=_build_fuel(doc.fuel),
        wind=wind,
        terrain=terrain,
        ignition=ignition,
        viscosity_eps=doc.viscosity_eps,
    )


def parse_document(text: str, source: Optional[str] = None) -> Dict[str, Any]:
    """Parse TOML text, raising ScenarioError on malformed input."""
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f"parse error: {e}", path=source) from e


def load_scenario(text: str, source: Optional[str] = None) -> ScenarioConfig:
    """
    Parse and validate a scenario document.

    Args:
        text: TOML document text
        source: Optional path used in error messages

    Returns:
        ScenarioConfig: Fully validated scenario

    Raises:
        ScenarioError: On parse errors or any violated invariant
    """
    data = parse_document(text, source)
    try:
        doc = ScenarioDocument(**data)
        scenario = _build_scenario(doc)
    except ValidationError as e:
        raise ScenarioError(format_validation_error(e), path=source) from e
    logger.debug(f"Loaded scenario {scenario.name} ({len(scenario.ignition.cones)} cones)")
    return scenario


def read_text(path: Union[str, Path]) -> str:
    """Read a document from disk, raising ArtifactError when unreadable."""
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"cannot read file ({e.strerror})", path=str(path)) from e


def load_scenario_file(path: Union[str, Path]) -> ScenarioConfig:
    return load_scenario(read_text(path), source=str(path))


def bundled_scenario(name: str) -> ScenarioConfig:
    """Load one of the scenarios shipped under ``firepinn/data/scenarios``."""
    resource = resources.files("firepinn.data").joinpath("scenarios", f"{name}.toml")
    return load_scenario(resource.read_text("utf-8"), source=f"<bundled:{name}>")
