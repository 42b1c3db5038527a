"""Extracted firelines and the metrics computed between them."""
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


@dataclass(frozen=True, eq=False)
class Polyline:
    """
    Ordered 2D points in physical units.

    A closed polyline does not repeat its first point; the closing segment
    is implied.
    """

    points: np.ndarray
    closed: bool = False

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if pts.shape[0] < 2:
            raise ValueError("a polyline needs at least 2 points")
        if np.any(np.all(np.diff(pts, axis=0) == 0.0, axis=1)):
            raise ValueError("consecutive polyline points must be distinct")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def vertices(self) -> np.ndarray:
        """Points with the first repeated at the end for closed loops."""
        if self.closed:
            return np.vstack([self.points, self.points[:1]])
        return self.points


@dataclass(frozen=True, eq=False)
class Fireline:
    """Zero level set of psi at one time."""

    time: float
    polylines: Tuple[Polyline, ...] = ()

    @property
    def is_empty(self) -> bool:
        return len(self.polylines) == 0

    @property
    def all_closed(self) -> bool:
        return all(p.closed for p in self.polylines)

    def points(self) -> np.ndarray:
        if self.is_empty:
            return np.empty((0, 2))
        return np.vstack([p.points for p in self.polylines])

    def rows(self) -> List[Tuple[int, float, float]]:
        """(loop_id, x, y) rows; closed loops repeat their first point."""
        out = []
        for loop_id, line in enumerate(self.polylines):
            out.extend((loop_id, float(x), float(y)) for x, y in line.vertices())
        return out


class MetricsRecord(BaseModel):
    """Comparison of two firelines at one time; distances are None when absent."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    time: float
    absent: bool = False
    hausdorff: Optional[float] = Field(default=None, ge=0.0)
    hausdorff_area: Optional[float] = Field(default=None, ge=0.0)
    hausdorff_perimeter: Optional[float] = Field(default=None, ge=0.0)
    area_a: Optional[float] = Field(default=None, ge=0.0)
    area_b: Optional[float] = Field(default=None, ge=0.0)
    perimeter_a: Optional[float] = Field(default=None, ge=0.0)
    perimeter_b: Optional[float] = Field(default=None, ge=0.0)


class MetricsSeries(BaseModel):
    """Per-time comparison records in time order."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    area_normalization: Literal["sqrt", "plain"] = "sqrt"
    records: Tuple[MetricsRecord, ...] = ()

    def column(self, name: str) -> List[Optional[float]]:
        return [getattr(r, name) for r in self.records]
