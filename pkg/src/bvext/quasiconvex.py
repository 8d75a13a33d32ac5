"""Geodesics and quasiconvexity constants of closed polygonal regions.

Shortest paths are computed on a tangent visibility graph: a taut path can
only bend at reflex vertices of the region, and only at those where the
incoming and outgoing segments are tangent to the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import shapely
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial import cKDTree

from .geom import EPS_REL, GeometryError, Point, PolyLine, bbox_diameter
from .perimeter import _canonical


class GeodesicError(ValueError):
    pass


class PointOutsideRegion(GeodesicError):
    pass


class Unreachable(GeodesicError):
    pass


@dataclass(frozen=True)
class GeodesicResult:
    path: PolyLine
    length: float
    straight_distance: float

    @property
    def ratio(self) -> float:
        return self.length / self.straight_distance if self.straight_distance > 0 else 1.0


@dataclass(frozen=True)
class QuasiconvexityEstimate:
    constant: float
    witness: tuple[Point, Point] | None
    pairs_tested: int


@dataclass(frozen=True, eq=False)
class Region:
    """Closure of a bounded polygonal open set (outer curve plus holes).

    The unbounded complementary component of a domain is represented after
    clipping to a working box, and flagged ``unbounded``.
    """

    polygon: shapely.Geometry
    unbounded: bool = False
    eps: float = field(default=0.0)

    def __post_init__(self):
        g = self.polygon
        if isinstance(g, shapely.Polygon):
            g = shapely.MultiPolygon([g])
        if not g.is_valid:
            g = _canonical(g, None)
        g = shapely.orient_polygons(g)
        if g.is_empty:
            raise GeometryError("empty region")
        object.__setattr__(self, "polygon", g)
        if not self.eps:
            object.__setattr__(self, "eps", EPS_REL * bbox_diameter(np.array(g.bounds).reshape(2, 2)))

    @classmethod
    def from_rings(cls, outer, holes: Sequence = (), unbounded: bool = False) -> "Region":
        return cls(shapely.Polygon(outer, list(holes)), unbounded)

    @property
    def connected(self) -> bool:
        return len(self.polygon.geoms) == 1

    @property
    def rings(self) -> list[np.ndarray]:
        out = []
        for p in self.polygon.geoms:
            out.append(np.asarray(p.exterior.coords))
            out.extend(np.asarray(r.coords) for r in p.interiors)
        return out

    # -- cached structure ---------------------------------------------------

    @cached_property
    def _vis(self):
        # visibility is judged against the region grown by eps, so points on
        # the boundary up to rounding still see along it
        g = self.polygon.buffer(self.eps, join_style="mitre")
        shapely.prepare(g)
        return g

    @cached_property
    def _parts(self) -> list:
        parts = []
        for p in self.polygon.geoms:
            q = p.buffer(self.eps, join_style="mitre")
            shapely.prepare(q)
            parts.append(q)
        return parts

    @cached_property
    def _vertices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(positions, prev, next, reflex mask) over all ring vertices."""
        pos, prv, nxt = [], [], []
        for ring in self.rings:
            v = ring[:-1]
            pos.append(v)
            prv.append(np.roll(v, 1, axis=0))
            nxt.append(np.roll(v, -1, axis=0))
        pos, prv, nxt = (np.concatenate(a) for a in (pos, prv, nxt))
        turn = _cross(pos - prv, nxt - pos)
        scale = np.hypot(*(pos - prv).T) * np.hypot(*(nxt - pos).T)
        reflex = turn < -1e-14 * scale
        return pos, prv, nxt, reflex

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices[0]

    @cached_property
    def _reflex(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos, prv, nxt, reflex = self._vertices
        return pos[reflex], prv[reflex], nxt[reflex]

    @cached_property
    def _graph_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Mutually tangent, mutually visible pairs of reflex vertices."""
        R, P, N = self._reflex
        ii, jj = np.triu_indices(len(R), k=1)
        ok = _tangent(R[jj], R[ii], P[ii], N[ii], self.eps) & _tangent(R[ii], R[jj], P[jj], N[jj], self.eps)
        ii, jj = ii[ok], jj[ok]
        vis = self.visible_many(R[ii], R[jj])
        return ii[vis], jj[vis]

    @cached_property
    def _graph(self) -> tuple[np.ndarray, np.ndarray]:
        """All-pairs shortest distances and predecessors over reflex vertices."""
        R = self._reflex[0]
        r = len(R)
        if r == 0:
            return np.zeros((0, 0)), np.zeros((0, 0), dtype=int)
        rows, cols = self._graph_edges
        w = np.hypot(*(R[cols] - R[rows]).T)
        mat = coo_matrix((w, (rows, cols)), shape=(r, r)).tocsr()
        dist, pred = shortest_path(mat, method="D", directed=False, return_predecessors=True)
        return dist, pred

    # -- queries --------------------------------------------------------------

    def visible(self, a, b) -> bool:
        if a[0] == b[0] and a[1] == b[1]:
            return bool(self._vis.covers(shapely.Point(a)))
        return bool(self._vis.covers(shapely.LineString([a, b])))

    def visible_many(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Vectorized ``visible`` over paired point arrays."""
        a = np.asarray(a, dtype=float).reshape(-1, 2)
        b = np.asarray(b, dtype=float).reshape(-1, 2)
        if len(a) == 0:
            return np.zeros(0, dtype=bool)
        segs = shapely.linestrings(np.stack([a, b], axis=1))
        out = shapely.covers(self._vis, segs)
        same = np.all(a == b, axis=1)
        if np.any(same):
            out[same] = shapely.covers(self._vis, shapely.points(a[same]))
        return out

    def distance_to(self, p) -> float:
        return float(self.polygon.distance(shapely.Point(p)))

    def contains(self, p) -> bool:
        return self.distance_to(p) <= self.eps

    def _component(self, p) -> int:
        pt = shapely.Point(p)
        for k, part in enumerate(self._parts):
            if part.covers(pt):
                return k
        raise PointOutsideRegion(f"point {tuple(p)} is not in the region")

    def _reach(self, a) -> tuple[np.ndarray, np.ndarray]:
        """Reflex vertices a taut path from ``a`` can bend at first, with distances."""
        R, P, N = self._reflex
        if len(R) == 0:
            return np.zeros(0, dtype=int), np.zeros(0)
        a = np.asarray(a, dtype=float)
        cand = np.nonzero(_tangent(np.broadcast_to(a, R.shape), R, P, N, self.eps))[0]
        idx = cand[self.visible_many(np.broadcast_to(a, (len(cand), 2)), R[cand])]
        return idx, np.hypot(*(R[idx] - a).T)

    def _path_via(self, u: int, v: int) -> list[np.ndarray]:
        R = self._reflex[0]
        _, pred = self._graph
        seq = [v]
        while seq[-1] != u:
            seq.append(int(pred[u, seq[-1]]))
        return [R[k] for k in reversed(seq)]

    def geodesic(self, a, b) -> GeodesicResult:
        a = (float(a[0]), float(a[1]))
        b = (float(b[0]), float(b[1]))
        for p in (a, b):
            if not self.contains(p):
                raise PointOutsideRegion(f"point {p} lies outside the region")
        straight = math.hypot(b[0] - a[0], b[1] - a[1])
        if straight == 0.0:
            return GeodesicResult(PolyLine(np.array([a])), 0.0, 0.0)
        if not self.connected and self._component(a) != self._component(b):
            raise Unreachable(f"{a} and {b} lie in different components")
        if self.visible(a, b):
            return GeodesicResult(PolyLine(np.array([a, b])), straight, straight)
        return self._taut(a, b, straight)

    def _taut(self, a, b, straight: float, _reach_a=None, _reach_b=None) -> GeodesicResult:
        """Shortest path between two points of the region that do not see each other."""
        ia, da = _reach_a if _reach_a is not None else self._reach(a)
        ib, db = _reach_b if _reach_b is not None else self._reach(b)
        if len(ia) == 0 or len(ib) == 0:
            raise Unreachable(f"no taut path from {a} to {b}")
        dist, _ = self._graph
        total = da[:, None] + dist[np.ix_(ia, ib)] + db[None, :]
        k = int(np.argmin(total))
        best = float(total.flat[k])
        if not math.isfinite(best):
            raise Unreachable(f"no path from {a} to {b}")
        u, v = ia[k // len(ib)], ib[k % len(ib)]
        pts = [np.array(a)] + self._path_via(u, v) + [np.array(b)]
        path = PolyLine(np.array(pts))
        return GeodesicResult(path, path.length, straight)

    # -- upper bounds -----------------------------------------------------------

    @cached_property
    def _bound(self) -> tuple[np.ndarray, np.ndarray, shapely.STRtree]:
        """Triangulation of the region and a path metric over its vertices.

        Paths run along triangle edges and visible reflex-to-reflex segments,
        so the metric bounds geodesic distance from above.
        """
        pos = self.vertices
        tris = [t for p in self.polygon.geoms for t in shapely.get_parts(shapely.constrained_delaunay_triangles(p))]
        corners = np.array([np.asarray(t.exterior.coords)[:3] for t in tris])
        _, ids = cKDTree(pos).query(corners.reshape(-1, 2))
        ids = ids.reshape(-1, 3)
        rows = np.concatenate([ids[:, 0], ids[:, 1], ids[:, 2]])
        cols = np.concatenate([ids[:, 1], ids[:, 2], ids[:, 0]])
        reflex_ids = np.nonzero(self._vertices[3])[0]
        if len(reflex_ids):
            r, c = self._graph_edges
            rows = np.concatenate([rows, reflex_ids[r]])
            cols = np.concatenate([cols, reflex_ids[c]])
        w = np.hypot(*(pos[rows] - pos[cols]).T)
        keep = rows != cols
        n = len(pos)
        mat = coo_matrix((w[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
        metric = shortest_path(mat, method="D", directed=False)
        return ids, metric, shapely.STRtree(tris)

    def _triangle_of(self, pts: np.ndarray) -> np.ndarray:
        _, _, tree = self._bound
        geoms = shapely.points(pts)
        hit = tree.query(geoms, predicate="intersects")
        out = np.full(len(pts), -1)
        # first triangle per point; the rest are equally valid
        out[hit[0][::-1]] = hit[1][::-1]
        missing = np.nonzero(out < 0)[0]
        if len(missing):
            near = tree.query_nearest(geoms[missing])
            out[missing[near[0]]] = near[1]
        return out

    def upper_bounds(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Upper bounds on the geodesic distance between paired points."""
        A = np.asarray(A, dtype=float).reshape(-1, 2)
        B = np.asarray(B, dtype=float).reshape(-1, 2)
        if len(A) == 0:
            return np.zeros(0)
        ids, metric, _ = self._bound
        pos = self.vertices
        ia = ids[self._triangle_of(A)]
        ib = ids[self._triangle_of(B)]
        da = np.hypot(*(pos[ia] - A[:, None, :]).transpose(2, 0, 1))
        db = np.hypot(*(pos[ib] - B[:, None, :]).transpose(2, 0, 1))
        total = da[:, :, None] + metric[ia[:, :, None], ib[:, None, :]] + db[:, None, :]
        return total.reshape(len(A), -1).min(axis=1)

    # -- sampling -------------------------------------------------------------

    def sample_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Half boundary points (uniform in arc length), half interior points."""
        nb = n // 2
        ni = n - nb
        rings = self.rings
        segs = np.concatenate([np.stack([r[:-1], r[1:]], axis=1) for r in rings])
        lens = np.hypot(*(segs[:, 1] - segs[:, 0]).T)
        cum = np.cumsum(lens)
        s = rng.uniform(0, cum[-1], nb)
        k = np.searchsorted(cum, s, side="right").clip(0, len(segs) - 1)
        t = (s - (cum[k] - lens[k])) / np.where(lens[k] > 0, lens[k], 1)
        bpts = segs[k, 0] + t[:, None] * (segs[k, 1] - segs[k, 0])
        xmin, ymin, xmax, ymax = self.polygon.bounds
        ipts = np.zeros((0, 2))
        while len(ipts) < ni:
            cand = rng.uniform([xmin, ymin], [xmax, ymax], size=(max(2 * ni, 16), 2))
            ok = shapely.contains_xy(self.polygon, cand[:, 0], cand[:, 1])
            ipts = np.vstack([ipts, cand[ok]])
        return np.vstack([bpts, ipts[:ni]])


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _tangent(a: np.ndarray, v: np.ndarray, prev: np.ndarray, nxt: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Whether the line through ``a`` and reflex vertex ``v`` keeps both neighbours of v on one side.

    A neighbour within ``eps`` of the line counts as on it; admitting extra
    candidates is harmless.
    """
    d = v - a
    w1, w2 = prev - v, nxt - v
    s1 = _cross(d, w1)
    s2 = _cross(d, w2)
    nd = np.hypot(*d.T)
    n1, n2 = np.hypot(*w1.T), np.hypot(*w2.T)
    t1 = np.maximum(1e-12 * nd * n1, eps * n1)
    t2 = np.maximum(1e-12 * nd * n2, eps * n2)
    return ~(((s1 > t1) & (s2 < -t2)) | ((s1 < -t1) & (s2 > t2)))


def geodesic(R: Region, a, b) -> GeodesicResult:
    """Shortest path from ``a`` to ``b`` inside the closed region."""
    return R.geodesic(a, b)


def _pairs(R: Region, samples: int, seed: int, max_vertex_pairs: int, extra: Iterable) -> Iterator[tuple]:
    rng = np.random.default_rng(seed)
    verts = R.vertices
    n = len(verts)
    ii, jj = np.triu_indices(n, k=1)
    if len(ii) > max_vertex_pairs:
        pick = np.sort(rng.choice(len(ii), size=max_vertex_pairs, replace=False))
        ii, jj = ii[pick], jj[pick]
    for i, j in zip(ii.tolist(), jj.tolist()):
        yield ("v", i), ("v", j), verts[i], verts[j]
    if samples > 0:
        pts = R.sample_points(2 * samples, rng)
        for k in range(samples):
            yield ("s", 2 * k), ("s", 2 * k + 1), pts[2 * k], pts[2 * k + 1]
    for k, (a, b) in enumerate(extra):
        yield ("x", 2 * k), ("x", 2 * k + 1), np.asarray(a, float), np.asarray(b, float)


class _Scan:
    """The tested pairs of one estimate, evaluated most promising first.

    Pairs that see each other have ratio 1. The rest are ordered by an upper
    bound on their ratio; once that bound falls to the running floor, no later
    pair can exceed it and the scan stops.
    """

    def __init__(self, R: Region, samples: int, seed: int, max_vertex_pairs: int, extra: Iterable):
        self.R = R
        self.pairs = list(_pairs(R, samples, seed, max_vertex_pairs, extra))
        # vertices and samples are in the region by construction; extra pairs are not
        for ka, kb, a, b in self.pairs:
            if ka[0] == "x":
                for p in (a, b):
                    if not R.contains(p):
                        raise PointOutsideRegion(f"point {tuple(p)} lies outside the region")
        A = np.array([p[2] for p in self.pairs], dtype=float).reshape(-1, 2)
        B = np.array([p[3] for p in self.pairs], dtype=float).reshape(-1, 2)
        self.A, self.B = A, B
        self.D = np.hypot(*(B - A).T)
        self.live = np.nonzero(self.D > R.eps)[0]
        self.count = len(self.live)
        self.evaluated = 0

    def run(self, floor: Callable[[], float]) -> Iterator[tuple]:
        """Yield ``(a, b, geodesic length, distance)`` for every pair that may exceed ``floor()``."""
        R, A, B, D = self.R, self.A, self.B, self.D
        live = self.live
        if len(live) == 0:
            return
        vis = R.visible_many(A[live], B[live])
        for k in live[vis]:
            self.evaluated += 1
            yield self.pairs[k][2], self.pairs[k][3], float(D[k]), float(D[k])
        hidden = live[~vis]
        if len(hidden) == 0:
            return
        ratio = R.upper_bounds(A[hidden], B[hidden]) / D[hidden]
        order = np.argsort(-ratio, kind="stable")
        cache: dict = {}

        def reach(key, p):
            if key not in cache:
                cache[key] = R._reach(p)
            return cache[key]

        for o in order:
            if ratio[o] <= floor():
                break
            ka, kb, a, b = self.pairs[hidden[o]]
            d = float(D[hidden[o]])
            g = R._taut((float(a[0]), float(a[1])), (float(b[0]), float(b[1])), d, reach(ka, a), reach(kb, b))
            self.evaluated += 1
            yield a, b, g.length, d


def quasiconvexity_constant(
    R: Region,
    samples: int = 1000,
    seed: int = 0,
    extra_pairs: Iterable = (),
    max_vertex_pairs: int = 4096,
) -> QuasiconvexityEstimate:
    """Lower estimate of the quasiconvexity constant.

    The supremum of geodesic length over straight distance is taken over
    vertex pairs, ``samples`` random pairs and any ``extra_pairs``; pairs of
    coincident points are skipped. Pairs whose ratio is bounded by the
    running maximum are counted as tested without computing their geodesic.
    """
    scan = _Scan(R, samples, seed, max_vertex_pairs, extra_pairs)
    best, witness = 1.0, None
    for a, b, length, d in scan.run(lambda: best):
        ratio = length / d
        if ratio > best:
            best, witness = ratio, (Point(*map(float, a)), Point(*map(float, b)))
    return QuasiconvexityEstimate(best, witness, scan.count)


def is_quasiconvex(
    R: Region, c: float, samples: int = 1000, seed: int = 0, max_vertex_pairs: int = 4096
) -> tuple[bool, tuple[Point, Point] | None]:
    """Test ``geodesic <= c * |a - b| + eps`` on the sampled pairs; return a violating pair if any."""
    if c < 1:
        raise ValueError("quasiconvexity constants are at least 1")
    scan = _Scan(R, samples, seed, max_vertex_pairs, ())
    for a, b, length, d in scan.run(lambda: c):
        if length > c * d + R.eps:
            return False, (Point(*map(float, a)), Point(*map(float, b)))
    return True, None
