import math

import numpy as np
import pytest
import shapely
from hypothesis import given, strategies as st

from bvext.domain import PlanarDomain
from bvext.geom import GeometryError, PolyCurve, PolyLine
from bvext.perimeter import PerimeterSet, perimeter, sym_diff_area
from bvext.pwamap import (
    MapError,
    OutsideSupport,
    PwaMap,
    apply,
    hole_correspondence,
    inverse,
    lip_constant,
    triangulate,
)
from factories import annulus, nested_set, random_map, star
from oracles import dense_ring_points, gram_singular_values, hausdorff

seeds = st.integers(0, 2**32 - 1)
SQUARE_TRIS = np.array([[(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 1), (0, 1)]], dtype=float)
SHEAR = [[1, 1], [0, 1]]


def big_square_tris():
    return triangulate(shapely.box(-10, -10, 10, 10))


# -- lip_constant ---------------------------------------------------------------


def test_lip_constant_examples():
    assert lip_constant(PwaMap.identity(SQUARE_TRIS)) == 1.0
    assert lip_constant(PwaMap.from_affine(SQUARE_TRIS, 2 * np.eye(2))) == 2.0
    sv = gram_singular_values(SHEAR)
    oracle = max(sv.max(), 1 / sv.min())
    assert oracle == pytest.approx((1 + math.sqrt(5)) / 2, rel=1e-12)
    assert lip_constant(PwaMap.from_affine(SQUARE_TRIS, SHEAR)) == pytest.approx(oracle, rel=1e-12)


def test_lip_constant_of_shrinking_map():
    assert lip_constant(PwaMap.from_affine(SQUARE_TRIS, 0.25 * np.eye(2))) == pytest.approx(4.0)


def test_degenerate_map_rejected():
    with pytest.raises(MapError):
        PwaMap.from_affine(SQUARE_TRIS, [[1, 0], [0, 0]])


@given(seeds)
def test_triangle_bounds_hold(seed):
    rng = np.random.default_rng(seed)
    f = random_map(rng, shapely.Polygon(star(rng, (0, 0), 1.0, int(rng.integers(4, 12)))))
    L = lip_constant(f)
    for t in range(len(f.src)):
        w = rng.uniform(0, 1, (20, 3))
        w /= w.sum(axis=1, keepdims=True)
        x = w @ f.src[t]
        fx = w @ f.dst[t]
        d = np.hypot(*(x[:10] - x[10:]).T)
        fd = np.hypot(*(fx[:10] - fx[10:]).T)
        assert (fd <= L * d * (1 + 1e-12)).all()
        assert (fd >= d / L * (1 - 1e-12)).all()


# -- validation ---------------------------------------------------------------


def test_validate_rejects_bad_maps():
    with pytest.raises(MapError):
        # a shared vertex sent to two places
        PwaMap(SQUARE_TRIS, SQUARE_TRIS + np.array([[[0, 0], [0, 0], [0, 0]], [[0, 0], [0.1, 0], [0, 0]]]))
    with pytest.raises(MapError):
        # second triangle flipped
        dst = SQUARE_TRIS.copy()
        dst[1] = [(0, 0), (1, 1), (2, 0)]
        PwaMap(SQUARE_TRIS, dst)
    with pytest.raises(MapError):
        PwaMap(SQUARE_TRIS, SQUARE_TRIS[:1])
    with pytest.raises(MapError):
        PwaMap(SQUARE_TRIS, np.full_like(SQUARE_TRIS, np.nan))


def test_validate_rejects_folded_image():
    # consistent orientation but overlapping images
    src = np.array([[(0, 0), (1, 0), (0, 1)], [(3, 0), (4, 0), (3, 1)]], dtype=float)
    dst = np.array([[(0, 0), (1, 0), (0, 1)], [(0.2, 0.2), (1.2, 0.2), (0.2, 1.2)]], dtype=float)
    with pytest.raises(MapError):
        PwaMap(src, dst)


# -- apply ---------------------------------------------------------------


def test_apply_identity_and_scale():
    tris = big_square_tris()
    E = PerimeterSet.box(0, 0, 1, 1)
    assert sym_diff_area(apply(PwaMap.identity(tris), E), E) == 0.0
    F = apply(PwaMap.from_affine(tris, 2 * np.eye(2)), E)
    assert F.area == pytest.approx(4.0) and perimeter(F) == pytest.approx(8.0)
    assert tuple(apply(PwaMap.identity(tris), (0.3, -0.7))) == pytest.approx((0.3, -0.7), abs=1e-12)


def test_apply_inserts_edge_crossing():
    f = PwaMap.from_affine(SQUARE_TRIS, SHEAR)
    # the segment crosses the diagonal y = x once, at (0.5, 0.5)
    img = apply(f, PolyLine.from_points([(0.8, 0.2), (0.2, 0.8)]))
    assert np.allclose(img.vertices, [[1.0, 0.2], [1.0, 0.5], [1.0, 0.8]], rtol=0, atol=1e-15)


def test_apply_piecewise_polyline_length():
    # bend along the diagonal: the straight segment maps to a two-piece path
    dst = SQUARE_TRIS.copy()
    dst[0] = [(0, 0), (2, 0), (1, 1)]
    f = PwaMap(SQUARE_TRIS, dst)
    img = apply(f, PolyLine.from_points([(0.9, 0.1), (0.1, 0.9)]))
    crossing = (0.5, 0.5)
    expected = math.dist((1.7, 0.1), crossing) + math.dist(crossing, (0.1, 0.9))
    assert img.length == pytest.approx(expected, rel=1e-12)


def test_apply_outside_support():
    f = PwaMap.identity(SQUARE_TRIS)
    with pytest.raises(OutsideSupport):
        apply(f, (2.0, 2.0))


def test_apply_curve_keeps_orientation():
    f = PwaMap.from_affine(big_square_tris(), [[0, 1], [1, 0]])  # reflection
    c = PolyCurve.from_points([(0, 0), (1, 0), (1, 1), (0, 1)], "positive")
    assert apply(f, c).orientation is c.orientation


@given(seeds)
def test_curve_lipschitz_bound(seed):
    rng = np.random.default_rng(seed)
    f = random_map(rng, shapely.box(-2, -2, 2, 2))
    line = PolyLine.from_points(rng.uniform(-2, 2, (int(rng.integers(2, 12)), 2)))
    assert apply(f, line).length <= lip_constant(f) * line.length + 1e-9


@given(seeds)
def test_set_perimeter_bound(seed):
    rng = np.random.default_rng(seed)
    f = random_map(rng, shapely.box(-7, -7, 7, 7))
    E = nested_set(rng, 80)
    assert perimeter(apply(f, E)) <= lip_constant(f) * perimeter(E) * (1 + 1e-9)


@given(seeds)
def test_apply_respects_null_differences(seed):
    rng = np.random.default_rng(seed)
    f = random_map(rng, shapely.box(-7, -7, 7, 7))
    E = nested_set(rng, 80)
    # the same set with extra collinear vertices on every ring
    dense = PerimeterSet.from_geometry(E.geom.segmentize(0.3))
    assert sym_diff_area(E, dense) <= E.eps_area
    A, B = apply(f, E), apply(f, dense)
    assert sym_diff_area(A, B) <= A.eps_area


# -- inverse ---------------------------------------------------------------


def test_inverse_examples():
    tris = big_square_tris()
    ident = PwaMap.identity(tris)
    assert np.array_equal(inverse(ident).A, ident.A)
    half = inverse(PwaMap.from_affine(tris, 2 * np.eye(2)))
    assert np.allclose(half.A, 0.5 * np.eye(2), rtol=0, atol=1e-15)


@given(seeds)
def test_inverse_round_trip(seed):
    rng = np.random.default_rng(seed)
    f = random_map(rng, shapely.box(-1, -1, 1, 1))
    g = inverse(f)
    pts = rng.uniform(-1, 1, (1000, 2))
    back = np.array([g.map_point(f.map_point(p)) for p in pts])
    assert np.abs(back - pts).max() < 1e-9


# -- hole correspondence ---------------------------------------------------------------


def test_hole_correspondence_identity_and_scale():
    dom = annulus()
    tris = triangulate(dom)
    m = hole_correspondence(PwaMap.identity(tris), dom, dom)
    assert m.pairs == {0: 0, 1: 1}
    f = PwaMap.from_affine(tris, 2 * np.eye(2))
    m = hole_correspondence(f, dom, apply(f, dom))
    assert m.pairs == {0: 0, 1: 1}


def test_hole_correspondence_three_holes_under_shear():
    holes = [
        [(1, 1), (2, 1), (2, 2), (1, 2)],
        [(4, 1), (5, 1.5), (4, 3)],
        [(1, 4), (3, 4), (3, 5), (1, 5)],
    ]
    dom = PlanarDomain.from_rings([(0, 0), (6, 0), (6, 6), (0, 6)], holes)
    f = PwaMap.from_affine(triangulate(dom), [[1, 0.6], [0, 1]], (0.5, -1))
    img = apply(f, dom)
    m = hole_correspondence(f, dom, img)
    assert len(m.pairs) == 4 and sorted(m.pairs.values()) == [0, 1, 2, 3]
    # dense-sample Hausdorff oracle: every match is the nearest image boundary
    sheared = lambda r: np.asarray(r) @ np.array([[1, 0.6], [0, 1]]).T + (0.5, -1)
    for j in range(3):
        src = dense_ring_points(sheared(np.vstack([holes[j], holes[j][:1]])), 0.01)
        k = m[j]
        d = [hausdorff(src, dense_ring_points(r, 0.01)) for r in img.hole_rings]
        assert int(np.argmin(d)) == k and d[k] < 0.01
        assert m.distances[j] <= img.eps_geom


def test_hole_correspondence_errors():
    dom = annulus()
    other = PlanarDomain.from_rings([(0, 0), (3, 0), (3, 3), (0, 3)])
    with pytest.raises(GeometryError):
        hole_correspondence(PwaMap.identity(triangulate(dom)), dom, other)
    moved = annulus(hole=(0.5, 1.2))
    with pytest.raises(GeometryError):
        hole_correspondence(PwaMap.identity(triangulate(dom)), dom, moved)
