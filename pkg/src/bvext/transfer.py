"""Transfer of perimeter extensions across a bi-Lipschitz piecewise-affine map.

Given Omega, its image Omega' = f(Omega), a set E' in Omega' and a plane set
Ext with Ext & Omega = f^-1(E'), every boundary curve of Ext is cut where it
leaves the closure of Omega. The pieces inside are mapped by f and the
excursions into holes are replaced by geodesics of the matching image holes.
The faces of the resulting closed curve that meet the image of the curve's
interior are kept, and the kept sets are recombined component by component.
Every inequality along the way is recorded in a ledger.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import shapely

from .domain import PlanarDomain
from .geom import (
    CurveKind,
    GeometryError,
    Point,
    PolyCurve,
    PolyLine,
    build_arrangement,
    segment_intersections,
)
from .perimeter import (
    PerimeterSet,
    decompose,
    interior_set,
    perimeter,
    snap_grid,
    sym_diff_area,
)
from .pwamap import HoleMatch, PwaMap, hole_correspondence, inverse, lip_constant
from .quasiconvex import GeodesicResult, QuasiconvexityEstimate, quasiconvexity_constant, is_quasiconvex
from . import svg

log = logging.getLogger(__name__)

SPLIT_REL = 1e-9
FACE_AREA_REL = 1e-9


class PreconditionError(ValueError):
    """Inputs do not satisfy the hypotheses of the construction."""


class LedgerViolation(AssertionError):
    def __init__(self, ledger: "TransferLedger", svg_text: str | None = None):
        self.ledger = ledger
        self.svg = svg_text
        names = ", ".join(c.name for c in ledger.failures)
        super().__init__(f"ledger checks failed: {names}")


# ---------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class OutsideArc:
    arc: PolyLine
    x: Point
    y: Point
    hole: int

    @property
    def chord(self) -> float:
        return math.hypot(self.y.x - self.x.x, self.y.y - self.x.y)


@dataclass(frozen=True)
class Piece:
    line: PolyLine
    hole: int | None  # None for pieces in the closure of the domain


@dataclass(frozen=True, eq=False)
class ArcSplit:
    """A closed curve cut at the boundary of a domain, pieces in cyclic order."""

    curve: PolyCurve
    pieces: tuple[Piece, ...]
    closed_in_hole: int | None = None

    @property
    def inside_arcs(self) -> list[PolyLine]:
        return [p.line for p in self.pieces if p.hole is None]

    @property
    def outside_arcs(self) -> list[OutsideArc]:
        if self.closed_in_hole is not None:
            return []
        out = []
        for p in self.pieces:
            if p.hole is not None:
                v = p.line.vertices
                out.append(OutsideArc(p.line, Point(*map(float, v[0])), Point(*map(float, v[-1])), p.hole))
        return out

    @property
    def inside_length(self) -> float:
        return float(sum(a.length for a in self.inside_arcs))

    @property
    def chord_sum(self) -> float:
        return float(sum(a.chord for a in self.outside_arcs))

    @property
    def split_budget(self) -> tuple[float, float]:
        """Both sides of: inside length + sum of chords <= length of the curve."""
        return self.inside_length + self.chord_sum, self.curve.length


def _subline(V: np.ndarray, m: int, s0: float, p0, s1: float, p1) -> np.ndarray:
    idx = [i % m for i in range(math.floor(s0) + 1, math.ceil(s1)) if s0 < i < s1]
    pts = [np.asarray(p0, float)] + [V[i] for i in idx] + [np.asarray(p1, float)]
    return np.array(pts)


def _farthest(pts: np.ndarray, omega: PlanarDomain) -> tuple[np.ndarray, float]:
    """Vertex or segment midpoint of a polyline farthest from the closure of the domain."""
    probes = np.vstack([pts[1:-1], 0.5 * (pts[:-1] + pts[1:])])
    dist = shapely.distance(shapely.points(probes), omega.polygon)
    k = int(np.argmax(dist))
    return probes[k], float(dist[k])


def split_curve(gamma: PolyCurve, omega: PlanarDomain, eps: float | None = None) -> ArcSplit:
    """Cut ``gamma`` where it meets the boundary of the domain and classify the pieces."""
    if gamma.is_formal:
        raise GeometryError("formal curves cannot be split")
    eps = omega.eps_geom if eps is None else eps
    line = gamma.base
    V = line.vertices
    m = len(V) - 1
    events = segment_intersections(line, omega.boundary_lines, eps)
    cuts: dict[float, Point] = {}
    for s, _u, p in events:
        s = float(s) % m
        cuts.setdefault(s, p)
    if not cuts:
        # no crossing: the curve lies in the closure or in one hole, possibly
        # touching the boundary within rounding
        far, dist = _farthest(V, omega)
        if dist <= eps:
            return ArcSplit(gamma, (Piece(line, None),))
        j = omega.hole_of(far)
        return ArcSplit(gamma, (Piece(line, j),), closed_in_hole=j)
    params = sorted(cuts)
    pieces = []
    for k, s0 in enumerate(params):
        s1 = params[k + 1] if k + 1 < len(params) else params[0] + m
        pts = _subline(V, m, s0, cuts[s0], s1, cuts[params[(k + 1) % len(params)]])
        piece = PolyLine(pts)
        if len(params) == 1 and piece.length == 0:
            continue
        far, dist = _farthest(pts, omega)
        if dist <= eps:
            pieces.append(Piece(piece, None))
            continue
        j = omega.hole_of(far)
        ring = shapely.LinearRing(omega.hole_boundary(j).vertices)
        for end in (pts[0], pts[-1]):
            if ring.distance(shapely.Point(end)) > 10 * eps:
                raise GeometryError(f"arc endpoint {tuple(end)} is not on the boundary of hole {j}")
        pieces.append(Piece(piece, j))
    if not pieces:
        return ArcSplit(gamma, (Piece(line, None),))
    return ArcSplit(gamma, tuple(pieces))


# ---------------------------------------------------------------------------
# surgery


@dataclass(frozen=True, eq=False)
class SurgeryResult:
    gamma_prime: PolyLine
    geodesics: tuple[GeodesicResult, ...]
    image_holes: tuple[int, ...]
    mapped_length: float  # length of the images of the inside pieces

    @property
    def length(self) -> float:
        return self.gamma_prime.length


def _append(out: list[np.ndarray], pts: np.ndarray) -> None:
    for p in pts:
        if not out or not np.array_equal(out[-1], p):
            out.append(p)


def surgery(
    split: ArcSplit,
    omega: PlanarDomain,
    omega_img: PlanarDomain,
    f: PwaMap,
    match: HoleMatch,
) -> SurgeryResult:
    """Closed curve made of the images of inside pieces and geodesics through image holes."""
    if split.closed_in_hole is not None:
        return SurgeryResult(PolyLine(np.zeros((0, 2)), closed=True), (), (), 0.0)
    out: list[np.ndarray] = []
    geos, holes = [], []
    mapped = 0.0
    for piece in split.pieces:
        if piece.hole is None:
            img = f.map_polyline(piece.line)
            mapped += img.length
            _append(out, img.vertices)
            continue
        if piece.hole not in match.pairs:
            raise GeometryError(f"hole {piece.hole} has no match in the image domain")
        k = match[piece.hole]
        v = piece.line.vertices
        a, b = f.map_point(v[0]), f.map_point(v[-1])
        g = omega_img.holes[k].geodesic(a, b)
        path = g.path.vertices
        if not (np.array_equal(path[0], a) and np.array_equal(path[-1], b)):
            raise GeometryError("geodesic endpoints do not match the mapped arc endpoints")
        geos.append(g)
        holes.append(k)
        _append(out, path)
    pts = np.array(out).reshape(-1, 2)
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    return SurgeryResult(PolyLine(pts, closed=True), tuple(geos), tuple(holes), mapped)


# ---------------------------------------------------------------------------
# face selection


@dataclass(frozen=True)
class Selection:
    result: PerimeterSet
    faces_total: int
    faces_selected: int
    unbounded_selected: bool
    flagged: str | None = None


def select_faces(
    gamma_prime: PolyLine,
    J_img: PerimeterSet,
    area_floor: float | None = None,
    grid: float | None = None,
) -> Selection:
    """Union of the complementary components of ``gamma_prime`` meeting ``J_img`` in positive area."""
    if J_img.cobounded:
        raise GeometryError("the image of a curve interior must be bounded")
    total = J_img.area
    pts = gamma_prime.vertices
    if area_floor is None:
        geoms = [J_img.geom] + ([shapely.MultiPoint(pts)] if len(pts) else [])
        b = shapely.union_all(geoms).bounds if total > 0 or len(pts) else (0, 0, 0, 0)
        area_floor = FACE_AREA_REL * (b[2] - b[0]) * (b[3] - b[1])
    if J_img.is_empty or total <= area_floor:
        return Selection(PerimeterSet.empty(), 0, 0, False, "empty image of the curve interior")
    distinct = np.unique(pts, axis=0) if len(pts) else pts
    if len(distinct) < 2:
        # degenerate curve: the only component is the whole plane
        return Selection(PerimeterSet.plane(), 1, 1, True)
    arr = build_arrangement([gamma_prime])
    faces = [fc for fc in arr.bounded_faces if fc.polygon is not None and not fc.polygon.is_empty]
    polys = np.array([fc.polygon for fc in faces], dtype=object)
    shares = shapely.area(shapely.intersection(polys, J_img.geom)) if len(faces) else np.zeros(0)
    chosen = shares > area_floor
    outside_share = total - float(np.sum(shares))
    unbounded = outside_share > area_floor
    if grid is None:
        grid = snap_grid(max(J_img.diameter, float(np.hypot(*(pts.max(0) - pts.min(0))))))
    if unbounded:
        rest = shapely.union_all(polys[~chosen]) if np.any(~chosen) else None
        result = PerimeterSet.from_geometry(rest, grid, cobounded=True)
    else:
        if not np.any(chosen):
            raise GeometryError("no face meets the image of the curve interior")
        result = PerimeterSet.from_geometry(shapely.union_all(polys[chosen]), grid)
    return Selection(result, len(faces) + 1, int(np.sum(chosen)) + int(unbounded), bool(unbounded))


# ---------------------------------------------------------------------------
# ledger


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    tol: float
    passed: bool
    curve: str | None = None

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass
class CurveRecord:
    key: str
    orientation: str
    length: float
    case: str  # inside, crossing, in-hole, formal
    inside_length: float = 0.0
    chord_sum: float = 0.0
    arcs: int = 0
    gamma_prime_length: float = 0.0
    image_area: float = 0.0
    selected_perimeter: float = 0.0
    selected_faces: int = 0
    unbounded_selected: bool = False


@dataclass
class TransferLedger:
    tolerance: float
    perimeter_target: float = 0.0  # P(E', Omega')
    perimeter_pullback: float = 0.0  # P(E, Omega)
    perimeter_extension: float = 0.0  # P(Ext, plane)
    decomposition_length: float = 0.0
    perimeter_result: float = 0.0  # P(Ext', plane)
    restriction_area: float = 0.0
    eps_area: float = 0.0
    lip: float = 1.0
    lip_effective: float = 1.0
    hole_constants: dict = field(default_factory=dict)
    image_hole_constants: dict = field(default_factory=dict)
    hole_pairs: dict = field(default_factory=dict)  # source hole -> image hole
    c_prime: float = 1.0
    baseline_constant: float = math.inf
    achieved_ratio: float = math.inf
    curves: list[CurveRecord] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def check(self, name: str, lhs: float, rhs: float, tol: float | None = None, curve: str | None = None, absolute: float = 0.0) -> Check:
        tol = self.tolerance if tol is None else tol
        bound = rhs + tol * abs(rhs) + absolute if math.isfinite(rhs) else rhs
        c = Check(name, float(lhs), float(rhs), tol, bool(lhs <= bound), curve)
        self.checks.append(c)
        if not c.passed:
            log.warning("ledger check %s failed: %g > %g", name, lhs, rhs)
        return c

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def check_named(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed

        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
            if isinstance(x, dict):
                return {str(k): clean(v) for k, v in x.items()}
            if isinstance(x, list):
                return [clean(v) for v in x]
            return x

        return clean(d)


# ---------------------------------------------------------------------------
# baseline


def baseline_extension(omega: PlanarDomain, E: PerimeterSet) -> tuple[PerimeterSet, float]:
    """Trivial extension by E itself, with its achieved constant P(E, plane) / P(E, Omega)."""
    total = perimeter(E)
    inner = perimeter(E, omega)
    if inner == 0:
        if total > 0:
            log.info("baseline constant is infinite: the set has no boundary inside the domain")
        return E, (math.inf if total > 0 else 1.0)
    return E, total / inner


# ---------------------------------------------------------------------------
# driver


def _curve_svg(omega, omega_img, gamma, sr: SurgeryResult | None) -> str:
    layers = [
        svg.Layer("domain", [omega.omega], stroke="#777777"),
        svg.Layer("image_domain", [omega_img.omega], stroke="#bbbbbb"),
        svg.Layer("curve", [gamma], stroke=svg.PALETTE[0], width=1.5),
    ]
    if sr is not None:
        layers.append(svg.Layer("curve_image", [sr.gamma_prime], stroke=svg.PALETTE[1], width=1.5))
        layers.append(svg.Layer("geodesics", [g.path for g in sr.geodesics], stroke=svg.PALETTE[2], width=2.5))
    return svg.render(layers)


@dataclass(frozen=True, eq=False)
class CurveWork:
    key: str
    curve: PolyCurve
    split: ArcSplit | None


def transfer_extension(
    omega: PlanarDomain,
    omega_img: PlanarDomain,
    f: PwaMap,
    E_img: PerimeterSet,
    extension: PerimeterSet,
    samples: int = 10_000,
    tol: float = 1e-6,
    seed: int = 0,
    c_hypothesis: float | None = None,
    max_vertex_pairs: int = 4096,
    strict: bool = True,
) -> tuple[PerimeterSet, TransferLedger]:
    """Build an extension of E' from an extension of its pullback, and check every bound.

    With ``strict`` a failed ledger check raises LedgerViolation carrying an
    SVG of the first offending curve; otherwise the ledger is returned as is.
    """
    t0 = time.perf_counter()
    ledger = TransferLedger(tolerance=tol)
    eps_img = omega_img.eps_area
    ledger.eps_area = eps_img
    # snapping grids never exceed the geometric tolerance of their side
    grid, grid_img = omega.grid, omega_img.grid

    # preconditions
    outside = E_img.difference(omega_img.omega)
    if outside.area > eps_img:
        raise PreconditionError(f"E' is not contained in the image domain (area {outside.area:g} outside)")
    try:
        match = hole_correspondence(f, omega, omega_img)
    except GeometryError as exc:
        raise PreconditionError(str(exc)) from exc
    E = inverse(f).map_set(E_img)
    restricted = extension.intersection(omega.omega)
    mismatch = sym_diff_area(restricted, E)
    if mismatch > omega.eps_area:
        raise PreconditionError(f"extension restricted to the domain differs from the pullback by area {mismatch:g}")

    # perimeters of the inputs
    ledger.lip = lip_constant(f)
    ledger.perimeter_target = perimeter(E_img, omega_img)
    ledger.perimeter_pullback = perimeter(E, omega)
    ledger.perimeter_extension = perimeter(extension)
    # achieved extension constant of the given extension
    if ledger.perimeter_pullback > 0:
        ledger.baseline_constant = ledger.perimeter_extension / ledger.perimeter_pullback
    elif ledger.perimeter_extension == 0:
        ledger.baseline_constant = 1.0
    ledger.check("pullback_perimeter", ledger.perimeter_pullback, ledger.lip * ledger.perimeter_target)

    d = decompose(extension, check=False)
    ledger.decomposition_length = d.total_length
    ledger.check(
        "decomposition_length",
        abs(ledger.perimeter_extension - ledger.decomposition_length),
        0.0,
        absolute=1e-9 * ledger.perimeter_extension,
    )

    # split every curve and collect the hole pairs used by the construction
    work: list[CurveWork] = []
    src_pairs: dict[int, list] = {}
    img_pairs: dict[int, list] = {}
    chord_ratios = []
    for sign, i, c in d.curves():
        key = f"{sign}{i}"
        if c.is_formal:
            work.append(CurveWork(key, c, None))
            continue
        sp = split_curve(c, omega)
        work.append(CurveWork(key, c, sp))
        for arc in sp.outside_arcs:
            a, b = f.map_point(arc.x), f.map_point(arc.y)
            k = match[arc.hole]
            src_pairs.setdefault(arc.hole, []).append((arc.x, arc.y))
            img_pairs.setdefault(k, []).append((a, b))
            dx = arc.chord
            dy = math.hypot(b.x - a.x, b.y - a.y)
            if dx > omega.eps_geom and dy > omega_img.eps_geom:
                chord_ratios.extend([dy / dx, dx / dy])
    ledger.lip_effective = max([ledger.lip] + chord_ratios)
    if ledger.lip_effective > ledger.lip:
        ledger.notes.append(
            f"chord ratio {ledger.lip_effective:.6g} exceeds the per-triangle constant {ledger.lip:.6g}; "
            "the larger value is used as the global constant"
        )
    ledger.timings["split"] = time.perf_counter() - t0

    # hole constants, including the pairs the construction relies on
    for j, hole in enumerate(omega.holes):
        if c_hypothesis is not None:
            ok, witness = is_quasiconvex(hole, c_hypothesis, samples, seed, max_vertex_pairs)
            if not ok:
                raise PreconditionError(f"hole {j} is not {c_hypothesis}-quasiconvex (witness {witness})")
    estimates: dict[int, QuasiconvexityEstimate] = {}
    img_estimates: dict[int, QuasiconvexityEstimate] = {}
    used = sorted(set(src_pairs))
    for j in used:
        estimates[j] = quasiconvexity_constant(omega.holes[j], samples, seed, src_pairs[j], max_vertex_pairs)
        k = match[j]
        img_estimates[k] = quasiconvexity_constant(omega_img.holes[k], samples, seed, img_pairs[k], max_vertex_pairs)
    ledger.hole_constants = {j: e.constant for j, e in estimates.items()}
    ledger.image_hole_constants = {k: e.constant for k, e in img_estimates.items()}
    ledger.hole_pairs = {j: match[j] for j in used}
    ledger.c_prime = max([1.0] + list(ledger.image_hole_constants.values()))
    for j in used:
        k = match[j]
        ledger.check(
            f"vaisala[{j}->{k}]",
            img_estimates[k].constant,
            ledger.lip_effective**2 * estimates[j].constant,
            tol=0.0,
            absolute=1e-6,
        )
    ledger.timings["constants"] = time.perf_counter() - t0

    # surgery and face selection, curve by curve
    selected: dict[str, PerimeterSet] = {}
    area_floor = FACE_AREA_REL * omega_img.working_box.area / 9.0
    bound = ledger.c_prime * ledger.lip_effective
    first_bad: tuple | None = None
    for w in work:
        c = w.curve
        rec = CurveRecord(w.key, c.orientation.value, c.length, "formal")
        ledger.curves.append(rec)
        if w.split is None:
            selected[w.key] = PerimeterSet.plane() if c.kind is CurveKind.J0 else PerimeterSet.empty()
            continue
        sp = w.split
        rec.inside_length = sp.inside_length
        rec.chord_sum = sp.chord_sum
        rec.arcs = len(sp.outside_arcs)
        if sp.closed_in_hole is not None:
            rec.case = "in-hole"
        elif rec.arcs:
            rec.case = "crossing"
        else:
            rec.case = "inside"
        n_before = len(ledger.checks)
        lhs, rhs = sp.split_budget
        ledger.check(f"split_budget[{w.key}]", lhs, rhs, tol=SPLIT_REL, curve=w.key)
        sr = surgery(sp, omega, omega_img, f, match)
        for a, (arc, g) in enumerate(zip(sp.outside_arcs, sr.geodesics)):
            k = match[arc.hole]
            ledger.check(
                f"geodesic_bound[{w.key}.{a}]",
                g.length,
                ledger.image_hole_constants[k] * g.straight_distance,
                absolute=omega_img.eps_geom,
                curve=w.key,
            )
        J_img = f.map_set(interior_set(c, grid).intersection(omega.omega, grid), grid_img)
        sel = select_faces(sr.gamma_prime, J_img, area_floor, grid_img)
        if sp.closed_in_hole is not None:
            what = "encloses the domain" if sel.unbounded_selected else "is dropped"
            ledger.notes.append(f"curve {w.key} lies in hole {sp.closed_in_hole} and {what}")
        selected[w.key] = sel.result
        rec.gamma_prime_length = sr.length
        rec.image_area = J_img.area
        rec.selected_perimeter = perimeter(sel.result)
        rec.selected_faces = sel.faces_selected
        rec.unbounded_selected = sel.unbounded_selected
        ledger.check(f"face_boundary[{w.key}]", rec.selected_perimeter, sr.length, curve=w.key)
        ledger.check(f"surgery_bound[{w.key}]", sr.length, bound * c.length, curve=w.key)
        if first_bad is None and any(not ch.passed for ch in ledger.checks[n_before:]):
            first_bad = (c, sr)
    ledger.timings["surgery"] = time.perf_counter() - t0

    # recombine component by component
    result = PerimeterSet.empty()
    for comp in d.components:
        piece = selected[f"+{comp.positive}"]
        for i in comp.negatives:
            piece = piece.difference(selected[f"-{i}"], grid_img)
        result = result.union(piece, grid_img)
    ledger.perimeter_result = perimeter(result)
    ledger.restriction_area = sym_diff_area(result.intersection(omega_img.omega, grid_img), E_img)
    ledger.check("restriction", ledger.restriction_area, eps_img, tol=0.0)
    ledger.check("extension_bound", ledger.perimeter_result, bound * ledger.perimeter_extension)
    C = ledger.baseline_constant
    chain = C * ledger.c_prime * ledger.lip_effective**2 * ledger.perimeter_target if math.isfinite(C) else math.inf
    ledger.check("final_chain", ledger.perimeter_result, chain)
    if ledger.perimeter_target > 0:
        ledger.achieved_ratio = ledger.perimeter_result / ledger.perimeter_target
    ledger.timings["total"] = time.perf_counter() - t0

    if strict and not ledger.passed:
        if first_bad is not None:
            text = _curve_svg(omega, omega_img, *first_bad)
        else:
            text = svg.render(
                [
                    svg.Layer("image_domain", [omega_img.omega], stroke="#777777"),
                    svg.Layer("result", [result], stroke=svg.PALETTE[1]),
                ]
            )
        raise LedgerViolation(ledger, text)
    return result, ledger
