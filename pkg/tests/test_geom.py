import math

import numpy as np
import pytest
import shapely
from hypothesis import given, strategies as st

from bvext.geom import (
    CurveKind,
    Location,
    Orientation,
    PolyCurve,
    PolyLine,
    build_arrangement,
    orientation,
    point_in_interior,
    polyline_length,
    segment_intersections,
    signed_area,
    winding_number,
    winding_numbers,
)
from factories import star

UNIT = [(0, 0), (1, 0), (1, 1), (0, 1)]


def square(x, y, s=1.0):
    return PolyLine.from_points([(x, y), (x + s, y), (x + s, y + s), (x, y + s)], closed=True)


# -- orientation ---------------------------------------------------------------


@pytest.mark.parametrize(
    "p, q, r, sign",
    [((0, 0), (1, 0), (0, 1), 1), ((0, 0), (1, 1), (2, 2), 0), ((0, 0), (0, 1), (1, 0), -1)],
)
def test_orientation_examples(p, q, r, sign):
    assert orientation(p, q, r) == sign


def test_orientation_is_exact_near_degeneracy():
    # the rounded determinant of these nearly collinear points is unreliable
    p = (0.5, 0.5)
    q = (12.0, 12.0)
    r = (24.0, 24.0)
    for k in range(-4, 5):
        rr = (r[0] + k * 2.0**-48, r[1])
        expected = 0 if k == 0 else (-1 if k > 0 else 1)
        assert orientation(p, q, rr) == expected


coord = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
pt = st.tuples(coord, coord)


@given(pt, pt, pt)
def test_orientation_antisymmetric(p, q, r):
    o = orientation(p, q, r)
    assert orientation(q, p, r) == -o
    assert orientation(p, r, q) == -o
    assert orientation(r, q, p) == -o


# -- lengths and areas ---------------------------------------------------------------


def test_polyline_length_examples():
    assert polyline_length(PolyLine.from_points(UNIT, closed=True)) == 4.0
    assert polyline_length(PolyLine.from_points([(0, 0), (3, 4)])) == 5.0
    diamond = PolyLine.from_points([(1, 0), (0, 1), (-1, 0), (0, -1)], closed=True)
    assert polyline_length(diamond) == pytest.approx(4 * math.sqrt(2), rel=1e-15)


@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi), st.floats(0.01, 100.0))
def test_polyline_length_rigid_and_scaling(seed, theta, s):
    rng = np.random.default_rng(seed)
    v = rng.uniform(-5, 5, (int(rng.integers(2, 30)), 2))
    line = PolyLine.from_points(v)
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    moved = PolyLine(line.vertices @ R.T + rng.uniform(-10, 10, 2), False)
    scaled = PolyLine(line.vertices * s, False)
    assert polyline_length(moved) == pytest.approx(line.length, rel=1e-12)
    assert polyline_length(scaled) == pytest.approx(s * line.length, rel=1e-12)


def test_signed_area_examples():
    assert signed_area(PolyCurve.from_points(UNIT, "positive")) == 1.0
    assert signed_area(PolyCurve.from_points(UNIT, "negative")) == -1.0
    assert signed_area(PolyCurve.from_points([(0, 0), (2, 0), (0, 2)], "positive")) == 2.0


@given(st.integers(0, 2**32 - 1))
def test_signed_area_reverses(seed):
    rng = np.random.default_rng(seed)
    c = PolyCurve.from_points(star(rng, (0, 0), 1.0, int(rng.integers(3, 40))))
    assert signed_area(c.reversed()) == -signed_area(c)


def test_formal_curves():
    j0, jinf = PolyCurve.j0(), PolyCurve.jinf()
    assert j0.kind is CurveKind.J0 and jinf.kind is CurveKind.JINF
    assert j0.length == 0 and jinf.length == 0
    assert j0.interior_area == math.inf and jinf.interior_area == 0
    assert point_in_interior((1e6, -3), j0) is Location.INSIDE
    assert point_in_interior((0, 0), jinf) is Location.OUTSIDE


def test_curve_orientation_is_normalized():
    c = PolyCurve.from_points(UNIT[::-1], "positive")
    assert c.orientation is Orientation.POSITIVE
    assert signed_area(c) > 0


def test_polyline_rejects_nonfinite():
    with pytest.raises(ValueError):
        PolyLine.from_points([(0, 0), (math.nan, 1)])


# -- point classification ---------------------------------------------------------------


@pytest.mark.parametrize("p, where", [((0.5, 0.5), "inside"), ((2, 2), "outside"), ((1, 0.5), "boundary")])
def test_point_in_interior_examples(p, where):
    c = PolyCurve.from_points(UNIT)
    assert point_in_interior(p, c).value == where


@given(st.integers(0, 2**32 - 1))
def test_point_in_interior_matches_winding(seed):
    rng = np.random.default_rng(seed)
    c = PolyCurve.from_points(star(rng, (0, 0), 1.0, int(rng.integers(3, 25)), jag=0.7))
    pts = rng.uniform(-1.2, 1.2, (10_000, 2))
    v = c.vertices
    for p in pts[:400]:
        loc = point_in_interior(p, c)
        if loc is Location.BOUNDARY:
            continue
        assert (loc is Location.INSIDE) == (winding_number(p, v) != 0)
    # the bulk of the 10^4 queries through the vectorized count
    w = winding_numbers(pts, v)
    ref = np.array([winding_number(p, v) for p in pts[::50]])
    assert np.array_equal(w[::50], ref)


# -- intersections ---------------------------------------------------------------


def test_segment_intersections_examples():
    xa = PolyLine.from_points([(-1, 0), (1, 0)])
    ya = PolyLine.from_points([(0, -1), (0, 1)])
    hits = segment_intersections(xa, ya)
    assert len(hits) == 1 and hits[0][2] == (0.0, 0.0)

    assert segment_intersections(square(0, 0), square(2, 0)) == []

    line = PolyLine.from_points([(-1, 0.5), (2, 0.5)])
    hits = segment_intersections(line, square(0, 0))
    assert [tuple(h[2]) for h in hits] == [(0.0, 0.5), (1.0, 0.5)]
    assert [h[0] for h in hits] == sorted(h[0] for h in hits)


def test_segment_intersections_overlap_gives_endpoints():
    a = PolyLine.from_points([(0, 0), (3, 0)])
    b = PolyLine.from_points([(1, 0), (2, 0)])
    pts = sorted(tuple(h[2]) for h in segment_intersections(a, b))
    assert pts == [(1.0, 0.0), (2.0, 0.0)]


# -- arrangements ---------------------------------------------------------------


def test_arrangement_single_square():
    arr = build_arrangement([square(0, 0)])
    assert len(arr.faces) == 2
    assert [f.area for f in arr.bounded_faces] == [pytest.approx(1.0)]


def test_arrangement_figure_eight():
    # pixel flood fill at 1200^2 over [-0.5, 2.5]^2: 3 faces, bounded areas 0.995, 0.995
    arr = build_arrangement([square(0, 0), square(1, 1)])
    assert len(arr.faces) == 3
    assert sorted(f.area for f in arr.bounded_faces) == pytest.approx([1.0, 1.0], abs=0.01)


def test_arrangement_crossing_squares():
    # pixel flood fill at 1200^2: 4 faces, bounded areas 0.248, 0.745, 0.745
    arr = build_arrangement([square(0, 0), square(0.5, 0.5)])
    assert len(arr.faces) == 4
    assert sorted(f.area for f in arr.bounded_faces) == pytest.approx([0.248, 0.745, 0.745], abs=0.01)


def test_arrangement_open_path_has_no_bounded_face():
    # the shoelace area of the doubled-back face walk rounds to a tiny positive value
    path = PolyLine.from_points([(0.24517356359595754, 0.12003521726531308), (0.10803874467390606, 0.5237856672304366), (0.7692726314305244, 0.2974725165811527)])
    arr = build_arrangement([path])
    assert len(arr.faces) == 1 and arr.bounded_faces == []
    assert arr.euler_characteristic() == 2


def test_arrangement_faces_carry_interior_points():
    arr = build_arrangement([square(0, 0), square(0.5, 0.5)])
    for f in arr.bounded_faces:
        p = f.representative
        assert f.polygon.contains(shapely.Point(p))


@given(st.integers(0, 2**32 - 1))
def test_arrangement_euler_formula(seed):
    rng = np.random.default_rng(seed)
    lines = []
    for _ in range(int(rng.integers(1, 5))):
        n = int(rng.integers(2, 8))
        closed = bool(rng.uniform() < 0.6) and n >= 3
        lines.append(PolyLine.from_points(rng.uniform(0, 1, (n, 2)), closed=closed))
    arr = build_arrangement(lines)
    assert arr.euler_characteristic() == 1 + arr.components


@given(st.integers(0, 2**32 - 1))
def test_arrangement_faces_partition_plane(seed):
    rng = np.random.default_rng(seed)
    curves = [PolyLine.from_points(star(rng, rng.uniform(0, 1, 2), 0.5, int(rng.integers(3, 9))), closed=True) for _ in range(3)]
    arr = build_arrangement(curves)
    union = shapely.union_all([shapely.Polygon(c.vertices) for c in curves])
    filled = shapely.union_all([shapely.Polygon(p.exterior) for p in shapely.get_parts(union)])
    # bounded faces tile the union of the curve interiors with its holes filled
    assert sum(f.area for f in arr.bounded_faces) == pytest.approx(filled.area, rel=1e-9)
    polys = [f.polygon for f in arr.bounded_faces]
    for i in range(len(polys)):
        for k in range(i + 1, len(polys)):
            assert polys[i].intersection(polys[k]).area <= 1e-9
