"""Planar primitives: robust predicates, polylines, Jordan curves, arrangements.

Everything downstream (sets of finite perimeter, geodesics, the transfer
construction) makes topological decisions through the predicates defined
here. Sign decisions are exact: a floating-point filter answers the easy
cases and rational arithmetic settles the rest.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import shapely
from scipy.spatial import cKDTree

EPS_REL = 1e-9
# Shewchuk's ccwerrboundA
_ORIENT_ERRBOUND = (3.0 + 16.0 * 2.0**-53) * 2.0**-53


class GeometryError(ValueError):
    """Malformed or inconsistent geometric input."""


class Point(NamedTuple):
    x: float
    y: float


def _as_point(p) -> Point:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite coordinate {p!r}")
    return Point(x, y)


def bbox_diameter(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return 0.0
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return float(np.hypot(*(hi - lo)))


def eps_for(points: np.ndarray) -> float:
    """Scale-relative welding tolerance: 1e-9 times the bounding-box diameter."""
    d = bbox_diameter(points)
    return EPS_REL * d if d > 0 else EPS_REL


# ---------------------------------------------------------------------------
# predicates


def orientation(p, q, r) -> int:
    """Sign of the signed area of triangle ``pqr`` (+1 ccw, -1 cw, 0 collinear)."""
    px, py = float(p[0]), float(p[1])
    qx, qy = float(q[0]), float(q[1])
    rx, ry = float(r[0]), float(r[1])
    detleft = (qx - px) * (ry - py)
    detright = (qy - py) * (rx - px)
    det = detleft - detright
    bound = _ORIENT_ERRBOUND * (abs(detleft) + abs(detright))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    if not all(map(math.isfinite, (px, py, qx, qy, rx, ry))):
        raise GeometryError("non-finite coordinate in orientation test")
    if (rx == px and ry == py) or (rx == qx and ry == qy) or (px == qx and py == qy):
        return 0
    fx, fy = Fraction(px), Fraction(py)
    exact = (Fraction(qx) - fx) * (Fraction(ry) - fy) - (Fraction(qy) - fy) * (Fraction(rx) - fx)
    return (exact > 0) - (exact < 0)


def _param_on(p, q, s) -> float:
    """Projection parameter of ``s`` on segment ``pq``, clamped to [0, 1]."""
    dx, dy = q[0] - p[0], q[1] - p[1]
    den = dx * dx + dy * dy
    if den == 0.0:
        return 0.0
    t = ((s[0] - p[0]) * dx + (s[1] - p[1]) * dy) / den
    return min(1.0, max(0.0, t))


def segment_pair_intersections(p1, p2, q1, q2) -> list[tuple[float, float, Point]]:
    """Intersections of closed segments ``p1p2`` and ``q1q2``.

    Returns ``(t, u, point)`` triples with ``t`` the parameter along p and ``u``
    along q. A collinear overlap yields its two endpoint events.
    """
    o1 = orientation(p1, p2, q1)
    o2 = orientation(p1, p2, q2)
    if o1 == o2 != 0:
        return []
    o3 = orientation(q1, q2, p1)
    o4 = orientation(q1, q2, p2)
    if o3 == o4 != 0:
        return []
    if o1 == 0 and o2 == 0:
        # collinear: overlap of the two parameter intervals
        events = []
        for s in (q1, q2, p1, p2):
            t = _param_on(p1, p2, s)
            u = _param_on(q1, q2, s)
            onp = _between(p1, p2, s)
            onq = _between(q1, q2, s)
            if onp and onq:
                events.append((float(t), float(u), Point(float(s[0]), float(s[1]))))
        events.sort()
        out = []
        for ev in events:
            if not out or ev[2] != out[-1][2]:
                out.append(ev)
        if len(out) > 2:
            out = [out[0], out[-1]]
        return out
    # single intersection point; prefer exact input vertices when touching
    if o1 == 0:
        s = q1
    elif o2 == 0:
        s = q2
    elif o3 == 0:
        s = p1
    elif o4 == 0:
        s = p2
    else:
        d1x, d1y = p2[0] - p1[0], p2[1] - p1[1]
        d2x, d2y = q2[0] - q1[0], q2[1] - q1[1]
        den = d1x * d2y - d1y * d2x
        t = ((q1[0] - p1[0]) * d2y - (q1[1] - p1[1]) * d2x) / den
        t = float(min(1.0, max(0.0, t)))
        pt = Point(float(p1[0] + t * d1x), float(p1[1] + t * d1y))
        return [(t, float(_param_on(q1, q2, pt)), pt)]
    pt = Point(float(s[0]), float(s[1]))
    return [(float(_param_on(p1, p2, pt)), float(_param_on(q1, q2, pt)), pt)]


def _between(p, q, s) -> bool:
    # s assumed collinear with pq
    return (min(p[0], q[0]) <= s[0] <= max(p[0], q[0])) and (
        min(p[1], q[1]) <= s[1] <= max(p[1], q[1])
    )


# ---------------------------------------------------------------------------
# curves


def _clean_vertices(pts: np.ndarray, eps: float) -> np.ndarray:
    keep = [0]
    for i in range(1, len(pts)):
        if np.hypot(*(pts[i] - pts[keep[-1]])) > eps:
            keep.append(i)
    return pts[keep]


@dataclass(frozen=True, eq=False)
class PolyLine:
    """Ordered vertex list; closed polylines repeat the first vertex at the end."""

    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise GeometryError("polyline has non-finite coordinates")
        if self.closed and len(pts) >= 2 and not np.array_equal(pts[0], pts[-1]):
            pts = np.vstack([pts, pts[:1]])
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)

    @classmethod
    def from_points(cls, points: Iterable, closed: bool = False, eps: float | None = None) -> "PolyLine":
        pts = np.array([tuple(p) for p in points], dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise GeometryError("polyline has non-finite coordinates")
        if eps is None:
            eps = 0.0
        if len(pts):
            pts = _clean_vertices(pts, eps)
            if closed and len(pts) > 1 and np.hypot(*(pts[-1] - pts[0])) <= eps:
                pts = pts[:-1]
        return cls(pts, closed)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def segments(self) -> np.ndarray:
        """Array of shape (m, 2, 2)."""
        v = self.vertices
        return np.stack([v[:-1], v[1:]], axis=1)

    @property
    def length(self) -> float:
        return polyline_length(self)

    def reversed(self) -> "PolyLine":
        return PolyLine(self.vertices[::-1].copy(), self.closed)

    def points(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self.vertices]

    def almost_equal(self, other: "PolyLine", tol: float = 0.0) -> bool:
        return (
            self.closed == other.closed
            and self.vertices.shape == other.vertices.shape
            and bool(np.all(np.abs(self.vertices - other.vertices) <= tol))
        )

    def __repr__(self) -> str:
        kind = "closed" if self.closed else "open"
        return f"PolyLine({kind}, {len(self.vertices)} vertices)"


def polyline_length(c: PolyLine) -> float:
    v = c.vertices
    if len(v) < 2:
        return 0.0
    d = np.diff(v, axis=0)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


class CurveKind(str, enum.Enum):
    ORDINARY = "ordinary"
    J0 = "J0"  # formal curve with interior the whole plane
    JINF = "Jinf"  # formal curve with empty interior


class Orientation(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True, eq=False)
class PolyCurve:
    """Closed polygonal Jordan curve.

    ``orientation`` says on which side the set lies: positive curves have it
    inside and are stored counterclockwise, negative curves bound holes and are
    stored clockwise.
    """

    base: PolyLine
    orientation: Orientation = Orientation.POSITIVE
    kind: CurveKind = CurveKind.ORDINARY

    @classmethod
    def from_points(cls, points, orientation: Orientation | str | None = None, eps: float | None = None) -> "PolyCurve":
        line = PolyLine.from_points(points, closed=True, eps=eps)
        if len(line.vertices) < 4:
            raise GeometryError("a closed curve needs at least three distinct vertices")
        area = _shoelace(line.vertices)
        if orientation is None:
            orientation = Orientation.POSITIVE if area >= 0 else Orientation.NEGATIVE
        orientation = Orientation(orientation)
        want_ccw = orientation is Orientation.POSITIVE
        if (area > 0) != want_ccw and area != 0:
            line = line.reversed()
        return cls(line, orientation)

    @classmethod
    def raw(cls, points) -> "PolyCurve":
        """Keep the vertex order as given (possibly self-intersecting input)."""
        line = PolyLine.from_points(points, closed=True)
        area = _shoelace(line.vertices) if len(line.vertices) >= 2 else 0.0
        return cls(line, Orientation.POSITIVE if area >= 0 else Orientation.NEGATIVE)

    @classmethod
    def j0(cls) -> "PolyCurve":
        return cls(PolyLine(np.zeros((0, 2)), closed=True), Orientation.POSITIVE, CurveKind.J0)

    @classmethod
    def jinf(cls) -> "PolyCurve":
        return cls(PolyLine(np.zeros((0, 2)), closed=True), Orientation.POSITIVE, CurveKind.JINF)

    @property
    def is_formal(self) -> bool:
        return self.kind is not CurveKind.ORDINARY

    @property
    def vertices(self) -> np.ndarray:
        return self.base.vertices

    @property
    def length(self) -> float:
        return 0.0 if self.is_formal else polyline_length(self.base)

    @property
    def interior_area(self) -> float:
        if self.kind is CurveKind.J0:
            return math.inf
        if self.kind is CurveKind.JINF:
            return 0.0
        return abs(signed_area(self))

    def reversed(self) -> "PolyCurve":
        flip = Orientation.NEGATIVE if self.orientation is Orientation.POSITIVE else Orientation.POSITIVE
        return PolyCurve(self.base.reversed(), flip, self.kind)

    def polygon(self) -> shapely.Polygon:
        """Closed interior of an ordinary curve as a shapely polygon."""
        if self.is_formal:
            raise GeometryError("formal curves have no polygonal interior")
        return shapely.Polygon(self.base.vertices)

    def canonical_key(self) -> tuple:
        """Rotation-invariant identity used for determinism checks."""
        v = [tuple(map(float, p)) for p in self.base.vertices[:-1]]
        if not v:
            return (self.kind.value,)
        k = min(range(len(v)), key=lambda i: v[i])
        return (self.kind.value, self.orientation.value, tuple(v[k:] + v[:k]))

    def __repr__(self) -> str:
        if self.is_formal:
            return f"PolyCurve({self.kind.value})"
        return f"PolyCurve({self.orientation.value}, {len(self.base.vertices) - 1} vertices, length={self.length:.6g})"


def signed_area(c: PolyCurve | PolyLine) -> float:
    """Shoelace signed area, positive for counterclockwise curves."""
    base = c.base if isinstance(c, PolyCurve) else c
    if isinstance(c, PolyCurve) and c.is_formal:
        return 0.0
    v = base.vertices
    if len(v) < 3:
        return 0.0
    if not np.array_equal(v[0], v[-1]):
        v = np.vstack([v, v[:1]])
    return _shoelace(v)


class Location(str, enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


def _point_segment_distance(p, a, b) -> float:
    t = _param_on(a, b, p)
    return math.hypot(a[0] + t * (b[0] - a[0]) - p[0], a[1] + t * (b[1] - a[1]) - p[1])


def point_in_interior(p, c: PolyCurve, eps: float | None = None) -> Location:
    """Classify ``p`` against a closed curve by crossing number with exact predicates."""
    if c.kind is CurveKind.J0:
        return Location.INSIDE
    if c.kind is CurveKind.JINF:
        return Location.OUTSIDE
    v = c.base.vertices
    if eps is None:
        eps = eps_for(v)
    p = _as_point(p)
    inside = False
    for i in range(len(v) - 1):
        a, b = v[i], v[i + 1]
        if _point_segment_distance(p, a, b) <= eps:
            return Location.BOUNDARY
        if (a[1] > p.y) != (b[1] > p.y):
            o = orientation(a, b, p)
            if o == 0:
                return Location.BOUNDARY
            # upward edge with p on its left, or downward edge with p on its right
            if (o > 0) == (b[1] > a[1]):
                inside = not inside
    return Location.INSIDE if inside else Location.OUTSIDE


def winding_number(p, vertices: np.ndarray) -> int:
    """Winding number of a closed vertex loop around ``p`` (p not on the loop)."""
    v = np.asarray(vertices, dtype=float)
    if len(v) and not np.array_equal(v[0], v[-1]):
        v = np.vstack([v, v[:1]])
    w = 0
    for i in range(len(v) - 1):
        a, b = v[i], v[i + 1]
        if a[1] <= p[1] < b[1]:
            if orientation(a, b, p) > 0:
                w += 1
        elif b[1] <= p[1] < a[1]:
            if orientation(a, b, p) < 0:
                w -= 1
    return w


def winding_numbers(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Vectorized float winding numbers for many query points (none on the loop)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    v = np.asarray(vertices, dtype=float)
    if len(v) and not np.array_equal(v[0], v[-1]):
        v = np.vstack([v, v[:1]])
    a, b = v[:-1], v[1:]
    px, py = pts[:, 0:1], pts[:, 1:2]
    cross = (b[:, 0] - a[:, 0]) * (py - a[:, 1]) - (b[:, 1] - a[:, 1]) * (px - a[:, 0])
    up = (a[:, 1] <= py) & (py < b[:, 1]) & (cross > 0)
    down = (b[:, 1] <= py) & (py < a[:, 1]) & (cross < 0)
    return up.sum(axis=1) - down.sum(axis=1)


# ---------------------------------------------------------------------------
# segment intersection


def _candidate_pairs(segs_a: np.ndarray, segs_b: np.ndarray, pad: float) -> np.ndarray:
    """Index pairs (i, j) whose padded bounding boxes overlap."""
    if len(segs_a) == 0 or len(segs_b) == 0:
        return np.zeros((2, 0), dtype=int)

    def boxes(s):
        lo = np.minimum(s[:, 0], s[:, 1]) - pad
        hi = np.maximum(s[:, 0], s[:, 1]) + pad
        return shapely.box(lo[:, 0], lo[:, 1], hi[:, 0], hi[:, 1])

    tree = shapely.STRtree(boxes(segs_b))
    return tree.query(boxes(segs_a))


def split_parameters(segs_a: np.ndarray, segs_b: np.ndarray, pad: float = 0.0) -> list[list[tuple[float, Point]]]:
    """For each segment of ``segs_a``, the sorted (t, point) events where it meets ``segs_b``."""
    events: list[list[tuple[float, Point]]] = [[] for _ in range(len(segs_a))]
    ia, ib = _candidate_pairs(segs_a, segs_b, pad)
    for i, j in zip(ia.tolist(), ib.tolist()):
        pa, pb = segs_a[i], segs_b[j]
        for t, _u, pt in segment_pair_intersections(pa[0], pa[1], pb[0], pb[1]):
            events[i].append((t, pt))
    for ev in events:
        ev.sort()
    return events


def segment_intersections(a: PolyLine, b: PolyLine | Sequence[PolyLine], eps: float | None = None):
    """All intersections of polyline ``a`` with ``b``, sorted along ``a``.

    Parameters are polyline parameters: segment index plus local parameter.
    With several ``b`` polylines, their segments are indexed consecutively.
    Events closer than ``eps`` along ``a`` are merged.
    """
    lines_b = [b] if isinstance(b, PolyLine) else list(b)
    sa = a.segments
    sb_list = [ln.segments for ln in lines_b if len(ln) >= 2]
    if len(sa) == 0 or not sb_list:
        return []
    sb = np.concatenate(sb_list)
    if eps is None:
        eps = eps_for(np.concatenate([a.vertices] + [ln.vertices for ln in lines_b]))
    raw = []
    ia, ib = _candidate_pairs(sa, sb, 0.0)
    for i, j in zip(ia.tolist(), ib.tolist()):
        for t, u, pt in segment_pair_intersections(sa[i][0], sa[i][1], sb[j][0], sb[j][1]):
            raw.append((i + t, j + u, pt))
    raw.sort(key=lambda e: e[0])
    out = []
    for ev in raw:
        if out and math.hypot(ev[2].x - out[-1][2].x, ev[2].y - out[-1][2].y) <= eps:
            continue
        out.append(ev)
    if a.closed and len(out) > 1:
        if math.hypot(out[0][2].x - out[-1][2].x, out[0][2].y - out[-1][2].y) <= eps:
            out.pop()
    return out


# ---------------------------------------------------------------------------
# arrangement


@dataclass(eq=False)
class Face:
    """A face of an arrangement: a connected component of the plane minus the curves."""

    index: int
    bounded: bool
    outer: list[int] | None  # vertex cycle of the outer boundary (None for the unbounded face)
    inner: list[list[int]]  # vertex cycles of inner boundaries
    polygon: shapely.Geometry | None  # polygonal closure; None for the unbounded face
    representative: Point | None
    area: float


@dataclass(eq=False)
class Arrangement:
    vertices: np.ndarray
    edges: list[tuple[int, int]]
    faces: list[Face]
    components: int
    eps: float
    adjacency: dict[int, set[int]] = field(default_factory=dict)

    @property
    def unbounded_face(self) -> Face:
        return next(f for f in self.faces if not f.bounded)

    @property
    def bounded_faces(self) -> list[Face]:
        return [f for f in self.faces if f.bounded]

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.faces)

    def edge_length(self) -> float:
        if not self.edges:
            return 0.0
        e = np.array(self.edges)
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def _node_segments(segs: np.ndarray, eps: float):
    """Snap-rounded noding: returns welded vertices and the undirected edge set."""
    n = len(segs)
    params: list[list[tuple[float, Point]]] = [[] for _ in range(n)]
    ia, ib = _candidate_pairs(segs, segs, 0.0)
    for i, j in zip(ia.tolist(), ib.tolist()):
        if j <= i:
            continue
        for t, u, pt in segment_pair_intersections(segs[i][0], segs[i][1], segs[j][0], segs[j][1]):
            params[i].append((t, pt))
            params[j].append((u, pt))
    pts = [segs[:, 0], segs[:, 1]]
    extra = [(i, t, pt) for i, ev in enumerate(params) for t, pt in ev]
    if extra:
        pts.append(np.array([[pt.x, pt.y] for _, _, pt in extra]))
    allpts = np.concatenate(pts)
    # weld points closer than eps (hot pixels)
    uf = _UnionFind(len(allpts))
    for i, j in cKDTree(allpts).query_pairs(eps):
        uf.union(i, j)
    roots = np.array([uf.find(i) for i in range(len(allpts))])
    uniq, node_of = np.unique(roots, return_inverse=True)
    nodes = allpts[uniq]
    start_node, end_node = node_of[:n], node_of[n : 2 * n]
    per_seg: list[set[int]] = [{int(start_node[i]), int(end_node[i])} for i in range(n)]
    for k, (i, _t, _pt) in enumerate(extra):
        per_seg[i].add(int(node_of[2 * n + k]))
    # hot pixels passing near segment interiors are inserted as well
    node_geoms = shapely.points(nodes)
    tree = shapely.STRtree(node_geoms)
    seg_geoms = shapely.linestrings(segs)
    si, ni = tree.query(seg_geoms, predicate="dwithin", distance=eps)
    for i, k in zip(si.tolist(), ni.tolist()):
        per_seg[i].add(int(k))
    edges: set[tuple[int, int]] = set()
    for i in range(n):
        a, b = segs[i]
        ids = sorted(per_seg[i], key=lambda k: _param_on(a, b, nodes[k]))
        for u, v in zip(ids[:-1], ids[1:]):
            if u != v:
                edges.add((min(u, v), max(u, v)))
    return nodes, sorted(edges)


def build_arrangement(curves: Sequence[PolyLine], eps: float | None = None) -> Arrangement:
    """Planar subdivision induced by polylines, with half-edge face extraction."""
    seg_list = [c.segments for c in curves if len(c) >= 2]
    segs = np.concatenate(seg_list) if seg_list else np.zeros((0, 2, 2))
    if len(segs):
        seglen = np.hypot(*(segs[:, 1] - segs[:, 0]).T)
        segs = segs[seglen > 0]
    all_pts = np.concatenate([c.vertices for c in curves]) if curves else np.zeros((0, 2))
    if eps is None:
        eps = eps_for(all_pts)
    if len(segs) == 0:
        verts = np.unique(all_pts, axis=0) if len(all_pts) else np.zeros((0, 2))
        faces = [Face(0, False, None, [], None, None, math.inf)]
        return Arrangement(verts, [], faces, len(verts), eps)
    nodes, edges = _node_segments(segs, eps)
    used = sorted({k for e in edges for k in e})
    remap = {k: i for i, k in enumerate(used)}
    verts = nodes[used]
    edges = [(remap[u], remap[v]) for u, v in edges]
    nv = len(verts)

    # half-edges: 2k is u->v, 2k+1 is v->u for edge k
    src = np.empty(2 * len(edges), dtype=int)
    dst = np.empty(2 * len(edges), dtype=int)
    for k, (u, v) in enumerate(edges):
        src[2 * k], dst[2 * k] = u, v
        src[2 * k + 1], dst[2 * k + 1] = v, u
    vec = verts[dst] - verts[src]
    ang = np.arctan2(vec[:, 1], vec[:, 0])
    outgoing: list[list[int]] = [[] for _ in range(nv)]
    for h in np.lexsort((np.arange(len(src)), ang)).tolist():
        outgoing[src[h]].append(h)
    pos = np.empty(len(src), dtype=int)
    for v in range(nv):
        for k, h in enumerate(outgoing[v]):
            pos[h] = k
    nxt = np.empty(len(src), dtype=int)
    for h in range(len(src)):
        twin = h ^ 1
        v = dst[h]
        ring = outgoing[v]
        nxt[h] = ring[(pos[twin] - 1) % len(ring)]

    uf = _UnionFind(nv)
    for u, v in edges:
        uf.union(u, v)
    comp_of = np.array([uf.find(i) for i in range(nv)])
    n_components = len(set(comp_of.tolist()))

    seen = np.zeros(len(src), dtype=bool)
    cycle_of = np.empty(len(src), dtype=int)
    cycles: list[list[int]] = []
    for h0 in range(len(src)):
        if seen[h0]:
            continue
        cyc = []
        h = h0
        steps = 0
        while not seen[h]:
            seen[h] = True
            cycle_of[h] = len(cycles)
            cyc.append(int(src[h]))
            h = nxt[h]
            steps += 1
            if steps > len(src):
                raise GeometryError("face loop failed to close; corrupted arrangement")
        if h != h0:
            raise GeometryError("face loop failed to close; corrupted arrangement")
        cycles.append(cyc)

    areas = [_shoelace(verts[c + c[:1]]) for c in cycles]
    # a cycle running both ways along every edge it uses (around a tree)
    # encloses nothing, whatever sign rounding gives its area
    twin_closed = np.ones(len(cycles), dtype=bool)
    twin_closed[cycle_of[cycle_of != cycle_of[np.arange(len(src)) ^ 1]]] = False
    outer_ids = [i for i, a in enumerate(areas) if a > 0 and not twin_closed[i]]
    inner_ids = [i for i, a in enumerate(areas) if not (a > 0 and not twin_closed[i])]
    holes_of: dict[int, list[int]] = {i: [] for i in outer_ids}
    top_level: list[int] = []
    # only shells whose bounding box holds the probe can own a hole
    boxes = [np.r_[verts[cycles[j]].min(axis=0), verts[cycles[j]].max(axis=0)] for j in outer_ids]
    tree = shapely.STRtree(shapely.box(*np.array(boxes).T)) if outer_ids else None
    for i in inner_ids:
        comp = comp_of[cycles[i][0]]
        probe = verts[cycles[i][0]]
        owner = None
        cand = tree.query(shapely.Point(probe), predicate="intersects") if tree is not None else []
        for j in sorted((outer_ids[k] for k in cand), key=lambda j: (areas[j], j)):
            if comp_of[cycles[j][0]] == comp:
                continue
            if winding_number(probe, verts[cycles[j]]) != 0:
                owner = j
                break
        if owner is None:
            top_level.append(i)
        else:
            holes_of[owner].append(i)

    face_of_cycle: dict[int, int] = {}
    faces: list[Face] = []
    for j in outer_ids:
        face_of_cycle[j] = len(faces)
        for i in holes_of[j]:
            face_of_cycle[i] = len(faces)
        shell = verts[cycles[j]]
        holes = [verts[cycles[i]][::-1] for i in holes_of[j]]
        poly = shapely.Polygon(shell, [h for h in holes if len(h) >= 3])
        if not poly.is_valid:
            poly = _polygonal(shapely.make_valid(poly, method="structure", keep_collapsed=False))
        rep = poly.point_on_surface() if not poly.is_empty else None
        faces.append(
            Face(
                len(faces),
                True,
                cycles[j],
                [cycles[i] for i in holes_of[j]],
                poly,
                Point(rep.x, rep.y) if rep is not None and not rep.is_empty else None,
                float(poly.area),
            )
        )
    for i in top_level:
        face_of_cycle[i] = len(faces)
    faces.append(Face(len(faces), False, None, [cycles[i] for i in top_level], None, None, math.inf))
    adjacency: dict[int, set[int]] = {f.index: set() for f in faces}
    for k in range(len(edges)):
        f1 = face_of_cycle[int(cycle_of[2 * k])]
        f2 = face_of_cycle[int(cycle_of[2 * k + 1])]
        if f1 != f2:
            adjacency[f1].add(f2)
            adjacency[f2].add(f1)
    return Arrangement(verts, edges, faces, n_components, eps, adjacency)


def _polygonal(g) -> shapely.Geometry:
    """Keep only the areal part of a geometry."""
    if g.is_empty:
        return shapely.MultiPolygon()
    if isinstance(g, (shapely.Polygon, shapely.MultiPolygon)):
        return g
    polys = [p for p in shapely.get_parts(g) if isinstance(p, (shapely.Polygon, shapely.MultiPolygon))]
    if not polys:
        return shapely.MultiPolygon()
    return shapely.union_all(polys)
