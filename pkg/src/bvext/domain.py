"""Bounded polygonal domains and their holes."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import shapely

from .geom import EPS_REL, GeometryError, PolyLine
from .perimeter import AREA_REL, PerimeterSet, snap_grid
from .quasiconvex import Region


@dataclass(frozen=True, eq=False)
class PlanarDomain:
    """Bounded open connected polygonal set Omega with the holes of its closure.

    ``holes`` lists the bounded complementary components first and the
    unbounded one (clipped to a working box three times the domain diameter)
    last.
    """

    omega: PerimeterSet

    def __post_init__(self):
        if self.omega.cobounded or len(self.omega.geom.geoms) != 1:
            raise GeometryError("a domain must be a single bounded connected polygon")

    @classmethod
    def from_rings(cls, outer, holes=(), grid: float | None = None) -> "PlanarDomain":
        return cls(PerimeterSet.from_polygons([(outer, holes)], grid))

    @property
    def polygon(self) -> shapely.Polygon:
        return self.omega.geom.geoms[0]

    @property
    def outer_ring(self) -> np.ndarray:
        return np.asarray(self.polygon.exterior.coords)

    @property
    def hole_rings(self) -> list[np.ndarray]:
        return [np.asarray(r.coords) for r in self.polygon.interiors]

    @property
    def boundary_lines(self) -> list[PolyLine]:
        return [PolyLine(self.outer_ring, closed=True)] + [PolyLine(r, closed=True) for r in self.hole_rings]

    @property
    def vertex_count(self) -> int:
        return len(self.outer_ring) - 1 + sum(len(r) - 1 for r in self.hole_rings)

    @cached_property
    def diameter(self) -> float:
        b = self.polygon.bounds
        return float(np.hypot(b[2] - b[0], b[3] - b[1]))

    @property
    def eps_geom(self) -> float:
        return EPS_REL * self.diameter

    @property
    def eps_area(self) -> float:
        b = self.polygon.bounds
        return AREA_REL * (b[2] - b[0]) * (b[3] - b[1])

    @property
    def hole_eps(self) -> float:
        return 4 * self.eps_geom

    @property
    def grid(self) -> float | None:
        return snap_grid(self.diameter)

    @cached_property
    def working_box(self) -> shapely.Polygon:
        b = self.polygon.bounds
        cx, cy = (b[0] + b[2]) / 2, (b[1] + b[3]) / 2
        h = 1.5 * self.diameter
        return shapely.box(cx - h, cy - h, cx + h, cy + h)

    @cached_property
    def holes(self) -> tuple[Region, ...]:
        # holes share the domain tolerance, which also covers the snapping grid
        eps = self.hole_eps
        out = [Region(shapely.Polygon(r), eps=eps) for r in self.hole_rings]
        box = np.asarray(self.working_box.exterior.coords)
        out.append(Region(shapely.Polygon(box, [self.outer_ring]), unbounded=True, eps=eps))
        return tuple(out)

    @property
    def unbounded_index(self) -> int:
        return len(self.hole_rings)

    def hole_boundary(self, j: int) -> PolyLine:
        if j == self.unbounded_index:
            return PolyLine(self.outer_ring, closed=True)
        return PolyLine(self.hole_rings[j], closed=True)

    @cached_property
    def _hole_polys(self) -> list[shapely.Polygon]:
        polys = [shapely.Polygon(r) for r in self.hole_rings]
        for p in polys:
            shapely.prepare(p)
        return polys

    def in_closure(self, pts: np.ndarray, eps: float | None = None) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        eps = self.eps_geom if eps is None else eps
        return shapely.distance(shapely.points(pts), self.polygon) <= eps

    def hole_of(self, p) -> int | None:
        """Index of the hole whose interior contains ``p``; None when ``p`` is in the closure."""
        if self.in_closure(np.asarray(p))[0]:
            return None
        for j, poly in enumerate(self._hole_polys):
            if shapely.contains_xy(poly, p[0], p[1]):
                return j
        return self.unbounded_index

    def __repr__(self) -> str:
        return f"PlanarDomain({len(self.hole_rings)} holes, {self.vertex_count} vertices)"
