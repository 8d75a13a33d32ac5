"""Piecewise-affine bi-Lipschitz maps on triangulations of a closed domain."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely

from .domain import PlanarDomain
from .geom import EPS_REL, GeometryError, Point, PolyCurve, PolyLine, bbox_diameter
from .perimeter import PerimeterSet, snap_grid

# barycentric coordinates below this are treated as exactly zero
_BARY_SNAP = 1e-12


class MapError(GeometryError):
    """The triangulated map is not a valid bi-Lipschitz homeomorphism."""


class OutsideSupport(GeometryError):
    """A point lies outside the triangulated support of the map."""


def _triangle_distance(tris: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Distance from ``p`` to the boundary of each triangle (for points outside them)."""
    a = tris
    b = np.roll(tris, -1, axis=1)
    ab = b - a
    t = np.einsum("tkj,tkj->tk", p - a, ab) / np.maximum(np.einsum("tkj,tkj->tk", ab, ab), 1e-300)
    q = a + np.clip(t, 0, 1)[..., None] * ab
    return np.hypot(*(q - p).transpose(2, 0, 1)).min(axis=1)


def triangulate(domain: PlanarDomain | shapely.Polygon) -> np.ndarray:
    """Conforming triangulation of a polygon with holes, using only its vertices."""
    poly = domain.polygon if isinstance(domain, PlanarDomain) else domain
    tris = shapely.constrained_delaunay_triangles(poly)
    out = np.array([np.asarray(t.exterior.coords)[:3] for t in shapely.get_parts(tris)])
    if abs(sum(shapely.area(shapely.get_parts(tris))) - poly.area) > 1e-9 * max(poly.area, 1.0):
        raise GeometryError("triangulation does not cover the polygon")
    return out


def _affine(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    S = np.stack([src[:, 1] - src[:, 0], src[:, 2] - src[:, 0]], axis=2)
    D = np.stack([dst[:, 1] - dst[:, 0], dst[:, 2] - dst[:, 0]], axis=2)
    detS = np.linalg.det(S)
    scale = np.einsum("tij,tij->t", S, S)
    if np.any(np.abs(detS) <= 1e-14 * scale):
        raise MapError("degenerate source triangle")
    Sinv = np.linalg.inv(S)
    A = D @ Sinv
    b = dst[:, 0] - np.einsum("tij,tj->ti", A, src[:, 0])
    return A, b, Sinv


@dataclass(frozen=True, eq=False)
class PwaMap:
    """Map given by source/destination vertex triples; affine on each triangle."""

    src: np.ndarray
    dst: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        src = np.array(self.src, dtype=float).reshape(-1, 3, 2)
        dst = np.array(self.dst, dtype=float).reshape(-1, 3, 2)
        if src.shape != dst.shape or len(src) == 0:
            raise MapError("source and destination triangle lists must match and be non-empty")
        if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
            raise MapError("non-finite map coordinates")
        for a in (src, dst):
            a.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        A, b, Sinv = _affine(src, dst)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_Sinv", Sinv)
        if self.check:
            self.validate()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_affine(cls, triangles: np.ndarray, matrix, offset=(0.0, 0.0)) -> "PwaMap":
        tri = np.asarray(triangles, dtype=float)
        M = np.asarray(matrix, dtype=float)
        return cls(tri, tri @ M.T + np.asarray(offset, dtype=float))

    @classmethod
    def identity(cls, triangles: np.ndarray) -> "PwaMap":
        return cls.from_affine(triangles, np.eye(2))

    @classmethod
    def from_vertex_map(cls, triangles: np.ndarray, fn) -> "PwaMap":
        """Map each source vertex through ``fn`` (shared vertices map identically)."""
        tri = np.asarray(triangles, dtype=float)
        flat = tri.reshape(-1, 2)
        keys, inv = np.unique(flat, axis=0, return_inverse=True)
        images = np.array([fn(p) for p in keys], dtype=float)
        return cls(tri, images[inv.ravel()].reshape(tri.shape))

    # -- validation -------------------------------------------------------------

    @cached_property
    def eps(self) -> float:
        return EPS_REL * max(bbox_diameter(self.src), bbox_diameter(self.dst))

    @cached_property
    def _vertex_ids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        flat = self.src.reshape(-1, 2)
        keys, inv = np.unique(flat, axis=0, return_inverse=True)
        ids = inv.reshape(-1, 3)
        images = np.zeros_like(keys)
        images[ids.ravel()] = self.dst.reshape(-1, 2)
        return keys, ids, images

    def validate(self) -> None:
        detA = np.linalg.det(self.A)
        if np.any(detA == 0) or not (np.all(detA > 0) or np.all(detA < 0)):
            raise MapError("destination triangles are degenerate or inconsistently oriented")
        keys, ids, images = self._vertex_ids
        got = self.dst.reshape(-1, 2)
        want = images[ids.ravel()]
        if np.max(np.abs(got - want)) > self.eps:
            raise MapError("a shared source vertex has two different images (discontinuous map)")
        edges: dict[tuple[int, int], int] = {}
        for t in ids:
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                e = (min(a, b), max(a, b))
                edges[e] = edges.get(e, 0) + 1
        if any(n > 2 for n in edges.values()):
            raise MapError("an edge is shared by more than two triangles")
        boundary = [e for e, n in edges.items() if n == 1]
        if boundary:
            segs = shapely.linestrings(keys[np.array(boundary)])
            tree = shapely.STRtree(shapely.points(keys))
            si, vi = tree.query(segs, predicate="dwithin", distance=self.eps)
            for s, v in zip(si.tolist(), vi.tolist()):
                if v not in boundary[s]:
                    raise MapError("non-conforming triangulation: vertex on the interior of a boundary edge")
        for tris, label in ((self.src, "source"), (self.dst, "destination")):
            polys = shapely.polygons(tris)
            tree = shapely.STRtree(polys)
            i, j = tree.query(polys, predicate="intersects")
            keep = i < j
            i, j = i[keep], j[keep]
            if len(i):
                ov = shapely.area(shapely.intersection(polys[i], polys[j]))
                tol = 1e-9 * np.minimum(shapely.area(polys[i]), shapely.area(polys[j]))
                if np.any(ov > tol):
                    raise MapError(f"{label} triangles overlap (map not injective)")

    @property
    def orientation_preserving(self) -> bool:
        return bool(np.linalg.det(self.A[0]) > 0)

    @cached_property
    def support(self) -> shapely.Geometry:
        g = shapely.union_all(shapely.polygons(self.src))
        shapely.prepare(g)
        return g

    @cached_property
    def image(self) -> shapely.Geometry:
        return shapely.union_all(shapely.polygons(self.dst))

    # -- point location -----------------------------------------------------------

    @cached_property
    def _grid(self):
        lo = self.src.reshape(-1, 2).min(axis=0) - self.eps
        hi = self.src.reshape(-1, 2).max(axis=0) + self.eps
        n = max(1, int(math.sqrt(len(self.src))))
        size = (hi - lo) / n
        size[size == 0] = 1.0
        cells: dict[tuple[int, int], list[int]] = {}
        tlo = self.src.min(axis=1) - self.eps
        thi = self.src.max(axis=1) + self.eps
        c0 = np.floor((tlo - lo) / size).astype(int).clip(0, n - 1)
        c1 = np.floor((thi - lo) / size).astype(int).clip(0, n - 1)
        for t in range(len(self.src)):
            for i in range(c0[t, 0], c1[t, 0] + 1):
                for j in range(c0[t, 1], c1[t, 1] + 1):
                    cells.setdefault((i, j), []).append(t)
        return lo, size, n, cells

    def _bary(self, t: int, p: np.ndarray) -> np.ndarray:
        l12 = self._Sinv[t] @ (p - self.src[t, 0])
        return np.array([1.0 - l12[0] - l12[1], l12[0], l12[1]])

    def locate(self, p) -> int | None:
        """Lowest-index triangle containing ``p`` (within eps), else None."""
        p = np.asarray(p, dtype=float)
        lo, size, n, cells = self._grid
        c = np.floor((p - lo) / size).astype(int)
        if np.any(c < 0) or np.any(c >= n):
            return None
        cand = cells.get((int(c[0]), int(c[1])))
        if not cand:
            return None
        cand = np.asarray(cand)
        l12 = np.einsum("tij,tj->ti", self._Sinv[cand], p - self.src[cand, 0])
        lam_min = np.minimum(1.0 - l12[:, 0] - l12[:, 1], l12.min(axis=1))
        inside = np.nonzero(lam_min >= -_BARY_SNAP)[0]
        if len(inside):
            return int(cand[inside[0]])
        d = _triangle_distance(self.src[cand], p)
        k = int(np.argmin(d))
        return int(cand[k]) if d[k] <= self.eps else None

    def map_point(self, p) -> Point:
        p = np.asarray(p, dtype=float)
        t = self.locate(p)
        if t is None:
            raise OutsideSupport(f"point {tuple(p)} is outside the support of the map")
        lam = self._bary(t, p)
        lam[lam < _BARY_SNAP] = 0.0
        lam /= lam.sum()
        _keys, ids, images = self._vertex_ids
        nz = np.nonzero(lam)[0]
        if len(nz) == 1:
            q = images[ids[t, nz[0]]]
        elif len(nz) == 2:
            # on an edge: interpolate in a triangle-independent way
            ia, ib = sorted((int(ids[t, nz[0]]), int(ids[t, nz[1]])))
            a, b = _keys[ia], _keys[ib]
            d = b - a
            s = float(np.dot(p - a, d) / np.dot(d, d))
            s = min(1.0, max(0.0, s))
            q = images[ia] + s * (images[ib] - images[ia])
        else:
            q = lam @ self.dst[t]
        return Point(float(q[0]), float(q[1]))

    # -- polylines ------------------------------------------------------------------

    @cached_property
    def _edges(self):
        _keys, ids, _ = self._vertex_ids
        e = set()
        for t in ids:
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                e.add((min(a, b), max(a, b)))
        e = np.array(sorted(e))
        segs = _keys[e]
        tree = shapely.STRtree(shapely.linestrings(segs))
        vtree = shapely.STRtree(shapely.points(_keys))
        return segs, tree, vtree

    def _refine(self, pts: np.ndarray, closed: bool) -> np.ndarray:
        """Insert crossings with triangulation edges so each piece lies in one triangle."""
        if len(pts) < 2:
            return pts
        segs = np.stack([pts[:-1], pts[1:]], axis=1)
        edge_segs, tree, vtree = self._edges
        lines = shapely.linestrings(segs)
        inserts: list[list[float]] = [[] for _ in range(len(segs))]
        si, ei = tree.query(lines, predicate="intersects")
        if len(si):
            p, q = segs[si, 0], segs[si, 1]
            a, b = edge_segs[ei, 0], edge_segs[ei, 1]
            d1, d2 = q - p, b - a
            den = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
            ok = den != 0
            with np.errstate(divide="ignore", invalid="ignore"):
                t = ((a[:, 0] - p[:, 0]) * d2[:, 1] - (a[:, 1] - p[:, 1]) * d2[:, 0]) / den
                u = ((a[:, 0] - p[:, 0]) * d1[:, 1] - (a[:, 1] - p[:, 1]) * d1[:, 0]) / den
            ok &= (t > 0) & (t < 1) & (u >= 0) & (u <= 1)
            for s, tt in zip(si[ok].tolist(), t[ok].tolist()):
                inserts[s].append(tt)
        keys = self._vertex_ids[0]
        si, vi = vtree.query(lines, predicate="dwithin", distance=self.eps)
        for s, v in zip(si.tolist(), vi.tolist()):
            p, q = segs[s]
            d = q - p
            tt = float(np.dot(keys[v] - p, d) / np.dot(d, d))
            if 0 < tt < 1:
                inserts[s].append(tt)
        out = [pts[0]]
        for s, (p, q) in enumerate(segs):
            for tt in sorted(set(inserts[s])):
                out.append(p + tt * (q - p))
            out.append(q)
        return np.array(out)

    def map_polyline(self, c: PolyLine) -> PolyLine:
        pts = self._refine(np.asarray(c.vertices, dtype=float), c.closed)
        img = np.array([self.map_point(p) for p in pts], dtype=float)
        # weld image vertices closer than eps (rounding across triangles)
        out = [img[0]]
        for q in img[1:-1]:
            if np.hypot(*(q - out[-1])) > self.eps:
                out.append(q)
        last = img[-1]
        if len(out) > 1 and np.hypot(*(last - out[-1])) <= self.eps:
            out.pop()
        out.append(last)
        img = np.array(out)
        if c.closed:
            img[-1] = img[0]
        return PolyLine(img, c.closed)

    def map_set(self, E: PerimeterSet, grid: float | None = None) -> PerimeterSet:
        if E.cobounded:
            raise OutsideSupport("cobounded sets extend beyond the support of the map")
        polys = []
        for poly in E.geom.geoms:
            ext = self.map_polyline(PolyLine(np.asarray(poly.exterior.coords), closed=True)).vertices
            if len(ext) < 4:
                continue  # collapsed below the welding tolerance
            holes = [self.map_polyline(PolyLine(np.asarray(r.coords), closed=True)).vertices for r in poly.interiors]
            holes = [h for h in holes if len(h) >= 4]
            poly = shapely.Polygon(ext, holes)
            if not poly.is_valid:
                poly = shapely.make_valid(poly, method="structure", keep_collapsed=False)
            polys.append(poly)
        if not polys:
            return PerimeterSet.empty()
        if grid is None:
            grid = snap_grid(bbox_diameter(self.dst))
        return PerimeterSet.from_geometry(shapely.union_all(polys), grid)

    def __repr__(self) -> str:
        return f"PwaMap({len(self.src)} triangles)"


def apply(f: PwaMap, g):
    """Image of a point, polyline, curve, set or domain under ``f``."""
    if isinstance(g, PolyCurve):
        if g.is_formal:
            raise OutsideSupport("formal curves have no image")
        line = f.map_polyline(g.base)
        if not f.orientation_preserving:
            line = line.reversed()
        return PolyCurve(line, g.orientation)
    if isinstance(g, PolyLine):
        return f.map_polyline(g)
    if isinstance(g, PerimeterSet):
        return f.map_set(g)
    if isinstance(g, PlanarDomain):
        return PlanarDomain(f.map_set(g.omega))
    return f.map_point(g)


def inverse(f: PwaMap) -> PwaMap:
    return PwaMap(f.dst, f.src, check=False)


def singular_values(f: PwaMap) -> np.ndarray:
    return np.linalg.svd(f.A, compute_uv=False)


def lip_constant(f: PwaMap) -> float:
    """Bi-Lipschitz constant max(sigma_max, 1 / sigma_min) over all triangles."""
    s = singular_values(f)
    if np.any(s[:, 1] <= 1e-12 * s[:, 0]):
        raise MapError("degenerate affine piece: map is not bi-Lipschitz")
    return float(max(s[:, 0].max(), (1.0 / s[:, 1]).max()))


@dataclass(frozen=True)
class HoleMatch:
    """Bijection between holes of the source and target closures."""

    pairs: dict[int, int]
    distances: dict[int, float]

    def __getitem__(self, j: int) -> int:
        return self.pairs[j]


def hole_correspondence(f: PwaMap, omega: PlanarDomain, omega_img: PlanarDomain) -> HoleMatch:
    """Match every hole to the target hole whose boundary is the image of its boundary."""
    n_src, n_dst = len(omega.holes), len(omega_img.holes)
    if n_src != n_dst:
        raise GeometryError(f"{n_src} holes cannot correspond to {n_dst} holes")
    targets = [shapely.LineString(omega_img.hole_boundary(k).vertices) for k in range(n_dst)]
    tol = 10 * max(omega_img.eps_geom, f.eps)
    pairs, dists = {}, {}
    for j in range(n_src):
        img = shapely.LineString(f.map_polyline(omega.hole_boundary(j)).vertices)
        d = [shapely.hausdorff_distance(img, t) for t in targets]
        k = int(np.argmin(d))
        if d[k] > tol:
            raise GeometryError(f"hole {j} has no matching image hole (Hausdorff distance {d[k]:g})")
        if k in pairs.values():
            raise GeometryError(f"two holes map to image hole {k}")
        pairs[j], dists[j] = k, float(d[k])
    return HoleMatch(pairs, dists)
