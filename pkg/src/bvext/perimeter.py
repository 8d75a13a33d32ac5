"""Polygonal sets of finite perimeter and their Jordan-curve decomposition.

A :class:`PerimeterSet` is stored as a canonical shapely multipolygon, so two
sets that differ by a null set (slits, duplicated edges, zero-area pieces)
have the same representation. A set may also be *cobounded*, i.e. the plane
minus a bounded polygon; perimeter extensions built across a map can be of
that form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import shapely

from .geom import (
    EPS_REL,
    CurveKind,
    GeometryError,
    Orientation,
    PolyCurve,
    PolyLine,
    _polygonal,
    build_arrangement,
    eps_for,
    split_parameters,
    winding_number,
)

AREA_REL = 1e-6


class DecompositionError(AssertionError):
    """A decomposition violates one of its structural properties."""


def snap_grid(diameter: float) -> float | None:
    """Power-of-two snapping grid near ``1e-9 * diameter``.

    Powers of two nest, so geometry snapped on a coarse grid is unchanged when
    snapped again on a finer one.
    """
    if not diameter > 0 or not math.isfinite(diameter):
        return None
    return 2.0 ** math.floor(math.log2(EPS_REL * diameter))


def _bounds_diameter(*geoms) -> float:
    lo = np.array([np.inf, np.inf])
    hi = -lo
    for g in geoms:
        if g is None or g.is_empty:
            continue
        b = g.bounds
        lo = np.minimum(lo, b[:2])
        hi = np.maximum(hi, b[2:])
    if not np.all(np.isfinite(lo)):
        return 0.0
    return float(np.hypot(*(hi - lo)))


def _drop_slivers(polys: list, width: float) -> list:
    """Remove rings thinner on average than ``width``: slits widened by snapping."""
    out = []
    for p in polys:
        if p.area <= width * p.exterior.length:
            continue
        holes = [r for r in p.interiors if shapely.Polygon(r).area > width * r.length]
        if len(holes) != len(p.interiors):
            p = shapely.Polygon(p.exterior, holes)
        out.append(p)
    return out


def _canonical(g, grid: float | None) -> shapely.MultiPolygon:
    if g is None or g.is_empty:
        return shapely.MultiPolygon()
    if not g.is_valid:
        g = shapely.make_valid(g, method="structure", keep_collapsed=False)
    g = _polygonal(g)
    if grid is not None and not g.is_empty:
        g = _polygonal(shapely.set_precision(g, grid))
    polys = [p for p in shapely.get_parts(g) if isinstance(p, shapely.Polygon) and p.area > 0]
    if grid is not None:
        polys = _drop_slivers(polys, grid)
    if not polys:
        return shapely.MultiPolygon()
    g = shapely.orient_polygons(shapely.MultiPolygon(polys))
    return g


@dataclass(frozen=True, eq=False)
class PerimeterSet:
    """Set of finite perimeter: a canonical multipolygon, or its complement."""

    geom: shapely.MultiPolygon = field(default_factory=shapely.MultiPolygon)
    cobounded: bool = False

    # -- construction -------------------------------------------------------

    @classmethod
    def empty(cls) -> "PerimeterSet":
        return cls()

    @classmethod
    def plane(cls) -> "PerimeterSet":
        return cls(shapely.MultiPolygon(), True)

    @classmethod
    def from_geometry(cls, g, grid: float | None = None, cobounded: bool = False) -> "PerimeterSet":
        if grid is None and g is not None and not g.is_empty:
            grid = snap_grid(_bounds_diameter(g))
        return cls(_canonical(g, grid), cobounded)

    @classmethod
    def from_polygons(cls, polygons: Iterable, grid: float | None = None) -> "PerimeterSet":
        """Union of ``(outer, holes)`` vertex-list pairs (or shapely polygons)."""
        parts = []
        for item in polygons:
            if isinstance(item, shapely.Geometry):
                parts.append(item)
                continue
            outer, holes = item
            poly = shapely.Polygon(outer, list(holes))
            if not poly.is_valid:
                poly = _polygonal(shapely.make_valid(poly, method="structure", keep_collapsed=False))
            parts.append(poly)
        if not parts:
            return cls()
        merged = shapely.union_all(parts)
        return cls.from_geometry(merged, grid)

    @classmethod
    def box(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> "PerimeterSet":
        return cls.from_geometry(shapely.box(xmin, ymin, xmax, ymax))

    # -- basic queries ------------------------------------------------------

    @property
    def polygons(self) -> list[shapely.Polygon]:
        return list(self.geom.geoms)

    @property
    def is_empty(self) -> bool:
        return self.geom.is_empty and not self.cobounded

    @property
    def area(self) -> float:
        return math.inf if self.cobounded else float(self.geom.area)

    @property
    def bounds(self) -> tuple[float, float, float, float] | None:
        return None if self.geom.is_empty else tuple(self.geom.bounds)

    @property
    def diameter(self) -> float:
        return _bounds_diameter(self.geom)

    @property
    def eps_area(self) -> float:
        b = self.bounds
        if b is None:
            return 0.0
        return AREA_REL * (b[2] - b[0]) * (b[3] - b[1])

    @property
    def vertex_count(self) -> int:
        return sum(len(c.vertices) - 1 for c in self.curves if not c.is_formal)

    @property
    def curves(self) -> list[PolyCurve]:
        """Oriented boundary curves, outer curves first within each polygon."""
        out: list[PolyCurve] = []
        if self.cobounded:
            out.append(PolyCurve.j0())
        pos, neg = Orientation.POSITIVE, Orientation.NEGATIVE
        for poly in self.geom.geoms:
            ext = PolyLine(np.asarray(poly.exterior.coords), closed=True)
            if self.cobounded:
                out.append(PolyCurve(ext.reversed(), neg))
            else:
                out.append(PolyCurve(ext, pos))
            for ring in poly.interiors:
                hole = PolyLine(np.asarray(ring.coords), closed=True)
                if self.cobounded:
                    out.append(PolyCurve(hole.reversed(), pos))
                else:
                    out.append(PolyCurve(hole, neg))
        return out

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        inside = shapely.contains_xy(self.geom, pts[:, 0], pts[:, 1]) if not self.geom.is_empty else np.zeros(len(pts), bool)
        return ~inside if self.cobounded else inside

    # -- boolean algebra ----------------------------------------------------

    def _grid(self, other: "PerimeterSet | None" = None, grid: float | None = None) -> float | None:
        if grid is not None:
            return grid
        return snap_grid(_bounds_diameter(self.geom, None if other is None else other.geom))

    def complement(self) -> "PerimeterSet":
        return PerimeterSet(self.geom, not self.cobounded)

    def union(self, other: "PerimeterSet", grid: float | None = None) -> "PerimeterSet":
        g = self._grid(other, grid)
        a, b = self.geom, other.geom
        if not self.cobounded and not other.cobounded:
            return PerimeterSet(_canonical(shapely.union(a, b, grid_size=g), g))
        if self.cobounded and other.cobounded:
            return PerimeterSet(_canonical(shapely.intersection(a, b, grid_size=g), g), True)
        if self.cobounded:
            return PerimeterSet(_canonical(shapely.difference(a, b, grid_size=g), g), True)
        return PerimeterSet(_canonical(shapely.difference(b, a, grid_size=g), g), True)

    def intersection(self, other: "PerimeterSet", grid: float | None = None) -> "PerimeterSet":
        return self.complement().union(other.complement(), grid).complement()

    def difference(self, other: "PerimeterSet", grid: float | None = None) -> "PerimeterSet":
        return self.intersection(other.complement(), grid)

    def symmetric_difference(self, other: "PerimeterSet", grid: float | None = None) -> "PerimeterSet":
        return self.difference(other, grid).union(other.difference(self, grid), grid)

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def __repr__(self) -> str:
        kind = "cobounded " if self.cobounded else ""
        return f"PerimeterSet({kind}{len(self.geom.geoms)} polygons, area={self.area:.6g})"


def canonicalize(curves: Sequence[PolyCurve], eps: float | None = None) -> PerimeterSet:
    """Set represented by oriented raw curves under the positive-winding rule.

    Self-intersecting curves are split by the arrangement; slits and
    zero-area pieces disappear because only faces of positive area survive.
    """
    offset = 0
    bases: list[PolyLine] = []
    for c in curves:
        if c.kind is CurveKind.J0:
            offset += 1 if c.orientation is Orientation.POSITIVE else -1
            continue
        if c.kind is CurveKind.JINF:
            continue
        if not c.base.closed or len(c.base.vertices) < 3:
            raise GeometryError("malformed input: boundary curves must be closed loops")
        bases.append(c.base)
    if not bases:
        return PerimeterSet.plane() if offset > 0 else PerimeterSet.empty()
    arr = build_arrangement(bases, eps)
    chosen, rejected = [], []
    for face in arr.bounded_faces:
        if face.polygon is None or face.polygon.is_empty or face.representative is None:
            continue
        w = offset + sum(winding_number(face.representative, b.vertices) for b in bases)
        (chosen if w > 0 else rejected).append(face.polygon)
    if offset > 0:
        return PerimeterSet.from_geometry(shapely.union_all(rejected) if rejected else None, cobounded=True)
    return PerimeterSet.from_geometry(shapely.union_all(chosen) if chosen else None)


def essential_boundary(E: PerimeterSet) -> list[PolyCurve]:
    """Boundary curves of the canonical representative (the measure-theoretic boundary)."""
    return [c for c in E.curves if not c.is_formal]


def _as_region_geometry(U):
    """Return ``(geometry, cobounded)`` for a set-like open region."""
    if isinstance(U, PerimeterSet):
        return U.geom, U.cobounded
    omega = getattr(U, "omega", None)
    if isinstance(omega, PerimeterSet):
        return omega.geom, omega.cobounded
    if isinstance(U, shapely.Geometry):
        return U, False
    raise TypeError(f"unsupported region type {type(U).__name__}")


def perimeter(E: PerimeterSet, U=None, eps: float | None = None) -> float:
    """Relative perimeter ``P(E, U)``: length of the boundary of E inside the open set U.

    ``U=None`` means the whole plane. Boundary pieces lying on the boundary of
    U are excluded since U is open.
    """
    lines = [c.base for c in E.curves if not c.is_formal]
    if U is None:
        return float(sum(ln.length for ln in lines))
    ugeom, ucob = _as_region_geometry(U)
    if not lines:
        return 0.0
    if ugeom.is_empty:
        return float(sum(ln.length for ln in lines)) if ucob else 0.0
    segs = np.concatenate([ln.segments for ln in lines])
    ubound = shapely.boundary(ugeom)
    urings = [np.asarray(r.coords) for r in shapely.get_parts(ubound)]
    useg = np.concatenate([np.stack([r[:-1], r[1:]], axis=1) for r in urings])
    if eps is None:
        eps = eps_for(np.concatenate([segs.reshape(-1, 2), useg.reshape(-1, 2)]))
    events = split_parameters(segs, useg)
    starts, ends = [], []
    for (a, b), ev in zip(segs, events):
        ts = sorted({0.0, 1.0, *(t for t, _ in ev)})
        for t0, t1 in zip(ts[:-1], ts[1:]):
            if t1 > t0:
                starts.append(a + t0 * (b - a))
                ends.append(a + t1 * (b - a))
    starts, ends = np.array(starts), np.array(ends)
    mids = 0.5 * (starts + ends)
    lengths = np.hypot(*(ends - starts).T)
    inside = shapely.contains_xy(ugeom, mids[:, 0], mids[:, 1])
    if ucob:
        inside = ~inside
    far = shapely.distance(shapely.points(mids), ubound) > eps
    return float(np.sum(lengths[inside & far]))


def sym_diff_area(A: PerimeterSet, B: PerimeterSet) -> float:
    """Area of the symmetric difference."""
    if A.cobounded != B.cobounded:
        return math.inf
    if A.geom.is_empty and B.geom.is_empty:
        return 0.0
    g = snap_grid(_bounds_diameter(A.geom, B.geom))
    return float(shapely.symmetric_difference(A.geom, B.geom, grid_size=g).area)


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class Component:
    """One indecomposable piece: a positive curve minus the negatives inside it."""

    positive: int
    negatives: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class JordanDecomposition:
    positives: list[PolyCurve]
    negatives: list[PolyCurve]
    components: list[Component]
    # parent in the containment forest, as ("+"|"-", index); None for roots
    parent: dict[tuple[str, int], tuple[str, int] | None] = field(default_factory=dict)

    @property
    def total_length(self) -> float:
        return float(sum(c.length for c in self.positives) + sum(c.length for c in self.negatives))

    def curves(self) -> list[tuple[str, int, PolyCurve]]:
        return [("+", i, c) for i, c in enumerate(self.positives)] + [
            ("-", i, c) for i, c in enumerate(self.negatives)
        ]

    def depth(self, key: tuple[str, int]) -> int:
        d = 0
        while self.parent.get(key) is not None:
            key = self.parent[key]
            d += 1
        return d

    def signature(self) -> tuple:
        """Order-independent identity of the curves (up to cyclic rotation)."""
        return (
            tuple(sorted(c.canonical_key() for c in self.positives)),
            tuple(sorted(c.canonical_key() for c in self.negatives)),
        )


def interior_set(c: PolyCurve, grid: float | None = None) -> PerimeterSet:
    if c.kind is CurveKind.J0:
        return PerimeterSet.plane()
    if c.kind is CurveKind.JINF:
        return PerimeterSet.empty()
    return PerimeterSet.from_geometry(c.polygon(), grid)


def _probe(c: PolyCurve) -> tuple[float, float] | None:
    if c.is_formal:
        return None
    p = c.polygon().point_on_surface()
    return (p.x, p.y)


def decompose(E: PerimeterSet, check: bool = True) -> JordanDecomposition:
    """Nested Jordan-curve decomposition of a canonical set.

    Positive curves sit at even depth of the containment forest and negative
    curves at odd depth; each component pairs a positive curve with the
    negative curves nested inside it.
    """
    positives: list[PolyCurve] = []
    negatives: list[PolyCurve] = []
    for c in E.curves:
        (positives if c.orientation is Orientation.POSITIVE else negatives).append(c)
    keys = [("+", i) for i in range(len(positives))] + [("-", i) for i in range(len(negatives))]
    curve = {("+", i): c for i, c in enumerate(positives)}
    curve.update({("-", i): c for i, c in enumerate(negatives)})
    area = {k: curve[k].interior_area for k in keys}
    probe = {k: _probe(curve[k]) for k in keys}
    polys = {}
    for k in keys:
        if not curve[k].is_formal:
            polys[k] = curve[k].polygon()
            shapely.prepare(polys[k])
    order = sorted(keys, key=lambda k: (area[k], k))
    parent: dict[tuple[str, int], tuple[str, int] | None] = {}
    for k in keys:
        parent[k] = None
        for cand in order:
            if cand == k or not area[cand] > area[k]:
                continue
            c = curve[cand]
            if c.kind is CurveKind.J0 or (
                probe[k] is not None and shapely.contains_xy(polys[cand], *probe[k])
            ):
                parent[k] = cand
                break

    def ancestors(k):
        while parent[k] is not None:
            k = parent[k]
            yield k

    for k in keys:
        depth = sum(1 for _ in ancestors(k))
        if (depth % 2 == 0) != (k[0] == "+"):
            raise DecompositionError(f"curve {k} at depth {depth} has inconsistent orientation")
    components = []
    for i in range(len(positives)):
        inside = tuple(j for j in range(len(negatives)) if ("+", i) in set(ancestors(("-", j))))
        components.append(Component(i, inside))
    d = JordanDecomposition(positives, negatives, components, parent)
    if check:
        problems = verify_decomposition(d, E)
        if problems:
            raise DecompositionError("; ".join(problems))
    return d


def recompose(d: JordanDecomposition, grid: float | None = None) -> PerimeterSet:
    """Union over components of a positive interior minus its negative interiors."""
    claimed = {j for comp in d.components for j in comp.negatives}
    orphans = set(range(len(d.negatives))) - claimed
    if orphans:
        raise DecompositionError(f"negative curves {sorted(orphans)} lie in no positive curve")
    out = PerimeterSet.empty()
    for comp in d.components:
        piece = interior_set(d.positives[comp.positive], grid)
        for j in comp.negatives:
            piece = piece.difference(interior_set(d.negatives[j], grid), grid)
        out = out.union(piece, grid)
    return out


def _inside_matrix(curves: list[PolyCurve], tol: float) -> np.ndarray:
    """``m[a, b]`` is True when int(curves[b]) is contained in int(curves[a]), a != b."""
    n = len(curves)
    m = np.zeros((n, n), dtype=bool)
    sets = [None if c.is_formal else c.polygon() for c in curves]
    areas = [c.interior_area for c in curves]
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            if curves[a].kind is CurveKind.J0:
                m[a, b] = curves[b].kind is not CurveKind.J0
                continue
            if curves[b].is_formal or curves[a].is_formal:
                continue
            if areas[b] >= areas[a]:
                continue
            ov = sets[a].intersection(sets[b]).area
            m[a, b] = abs(ov - areas[b]) <= tol
    return m


def _disjoint(c1: PolyCurve, c2: PolyCurve, tol: float) -> bool:
    if c1.is_formal or c2.is_formal:
        return c1.kind is CurveKind.JINF or c2.kind is CurveKind.JINF
    return c1.polygon().intersection(c2.polygon()).area <= tol


def verify_decomposition(d: JordanDecomposition, E: PerimeterSet | None = None, rel: float = 1e-9) -> list[str]:
    """Check the four structural properties by brute force over all curve pairs."""
    problems: list[str] = []
    allc = d.positives + d.negatives
    npos = len(d.positives)
    finite = [c.interior_area for c in allc if not c.is_formal]
    scale = max(finite) if finite else 1.0
    tol = max(scale * rel, 1e-300)
    inside = _inside_matrix(allc, tol)
    # (1) nesting or disjointness among curves of equal sign
    for group, lo in ((d.positives, 0), (d.negatives, npos)):
        for i in range(len(group)):
            for k in range(i + 1, len(group)):
                a, b = lo + i, lo + k
                if not (inside[a, b] or inside[b, a] or _disjoint(allc[a], allc[b], tol)):
                    problems.append(f"curves {a} and {b} cross")
    for k in range(len(d.negatives)):
        if not any(inside[i, npos + k] for i in range(npos)):
            problems.append(f"negative curve {k} lies in no positive curve")
    # (3) strictly nested equal-sign curves are separated by an opposite-sign curve
    for group_lo, group_n, other_lo, other_n in ((0, npos, npos, len(d.negatives)), (npos, len(d.negatives), 0, npos)):
        for i in range(group_lo, group_lo + group_n):
            for j in range(group_lo, group_lo + group_n):
                if i != j and inside[j, i]:
                    if not any(inside[k, i] and inside[j, k] for k in range(other_lo, other_lo + other_n)):
                        problems.append(f"nested curves {i} in {j} are not separated")
    # (4) components are pairwise disjoint and recover the set
    pieces = []
    for comp in d.components:
        piece = interior_set(d.positives[comp.positive])
        for j in comp.negatives:
            piece = piece.difference(interior_set(d.negatives[j]))
        pieces.append(piece)
    for i in range(len(pieces)):
        for k in range(i + 1, len(pieces)):
            ov = pieces[i].intersection(pieces[k])
            if ov.area > tol:
                problems.append(f"components {i} and {k} overlap by {ov.area:g}")
    if E is not None:
        rebuilt = PerimeterSet.empty()
        for p in pieces:
            rebuilt = rebuilt.union(p)
        eps_area = max(E.eps_area, rebuilt.eps_area)
        diff = sym_diff_area(rebuilt, E)
        if not diff <= eps_area:
            problems.append(f"components differ from the set by area {diff:g}")
        per = perimeter(E)
        if abs(per - d.total_length) > 1e-9 * max(per, 1.0):
            problems.append(f"perimeter {per!r} != total curve length {d.total_length!r}")
    return problems
