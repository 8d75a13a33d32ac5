import math

import numpy as np
import pytest
import shapely
from hypothesis import given, strategies as st

from bvext.pwamap import inverse, lip_constant
from bvext.quasiconvex import (
    PointOutsideRegion,
    Region,
    geodesic,
    is_quasiconvex,
    quasiconvexity_constant,
)
from factories import L_SHAPE, convex_polygon, random_map, star
from oracles import brute_geodesic

seeds = st.integers(0, 2**32 - 1)
L_REGION = Region.from_rings(L_SHAPE)
# brute-force Dijkstra over the full visibility graph of the L-shape
L_GEODESIC = 1.886796226411321
# sup of the ratio over 10^5 pairs (half of them on the two inner edges), chords tested by dense probing
L_DENSE = 1.414213562238302


def test_geodesic_visible_pair_is_straight():
    g = geodesic(L_REGION, (0.2, 0.2), (1.8, 0.7))
    assert g.length == pytest.approx(math.hypot(1.6, 0.5), rel=1e-15)
    assert len(g.path.vertices) == 2


def test_geodesic_l_shape_bends_at_corner():
    g = geodesic(L_REGION, (1.8, 0.5), (0.5, 1.8))
    assert brute_geodesic([L_SHAPE], (1.8, 0.5), (0.5, 1.8)) == pytest.approx(L_GEODESIC, rel=1e-15)
    assert g.length == pytest.approx(2 * math.sqrt(0.89), rel=1e-9)
    assert g.length == pytest.approx(L_GEODESIC, rel=1e-9)
    assert [tuple(v) for v in g.path.vertices] == [(1.8, 0.5), (1.0, 1.0), (0.5, 1.8)]


def test_geodesic_around_a_hole():
    ring = [(0, 0), (4, 0), (4, 4), (0, 4)]
    hole = [(1, 1), (3, 1), (3, 3), (1, 3)]
    R = Region.from_rings(ring, [hole])
    a, b = (0.5, 2.0), (3.5, 2.0)
    ref = brute_geodesic([ring + [ring[0]], hole + [hole[0]]], a, b)
    assert geodesic(R, a, b).length == pytest.approx(ref, rel=1e-12)


def test_geodesic_rejects_outside_points():
    with pytest.raises(PointOutsideRegion):
        geodesic(L_REGION, (1.5, 1.5), (0.1, 0.1))


@given(seeds)
def test_geodesic_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    ring = star(rng, (0, 0), 1.0, int(rng.integers(4, 12)), jag=0.7)
    R = Region.from_rings(ring)
    a, b = R.sample_points(2, rng)
    closed = np.vstack([ring, ring[:1]])
    assert geodesic(R, a, b).length == pytest.approx(brute_geodesic([closed], a, b), rel=1e-9)


@given(seeds)
def test_geodesic_symmetric_and_triangle(seed):
    rng = np.random.default_rng(seed)
    R = Region.from_rings(star(rng, (0, 0), 1.0, int(rng.integers(4, 20)), jag=0.7))
    a, b, c = R.sample_points(3, rng)
    ab, ba = geodesic(R, a, b).length, geodesic(R, b, a).length
    assert ab == pytest.approx(ba, rel=1e-12)
    assert ab <= geodesic(R, a, c).length + geodesic(R, c, b).length + 1e-12
    assert ab >= math.dist(a, b) * (1 - 1e-12)


def test_convex_constant_is_one():
    rng = np.random.default_rng(3)
    for _ in range(5):
        R = Region(convex_polygon(rng))
        est = quasiconvexity_constant(R, samples=500)
        assert est.constant == pytest.approx(1.0, abs=1e-9)


def test_l_shape_constant():
    est = quasiconvexity_constant(L_REGION, samples=10_000)
    assert est.constant >= 2 * math.sqrt(0.89) / math.hypot(1.3, 1.3)
    assert est.constant == pytest.approx(L_DENSE, abs=1e-6)
    assert est.constant <= math.sqrt(2) + 1e-12
    a, b = est.witness
    assert geodesic(L_REGION, a, b).length / math.dist(a, b) == pytest.approx(est.constant, rel=1e-12)


def test_extra_pairs_are_tested():
    est = quasiconvexity_constant(L_REGION, samples=0, max_vertex_pairs=0, extra_pairs=[((1.8, 0.5), (0.5, 1.8))])
    assert est.constant == pytest.approx(2 * math.sqrt(0.89) / math.hypot(1.3, 1.3), rel=1e-12)
    with pytest.raises(PointOutsideRegion):
        quasiconvexity_constant(L_REGION, samples=0, extra_pairs=[((1.5, 1.5), (0, 0))])


def test_is_quasiconvex_examples():
    ok, witness = is_quasiconvex(L_REGION, 1.0)
    assert not ok and witness is not None
    a, b = witness
    assert geodesic(L_REGION, a, b).length > math.dist(a, b) + L_REGION.eps
    c = quasiconvexity_constant(L_REGION).constant
    assert is_quasiconvex(L_REGION, c + 0.01) == (True, None)
    with pytest.raises(ValueError):
        is_quasiconvex(L_REGION, 0.5)


@given(seeds, st.floats(0, 2 * math.pi), st.floats(0.1, 50.0))
def test_constant_invariant_under_similarity(seed, theta, s):
    rng = np.random.default_rng(seed)
    ring = star(rng, (0, 0), 1.0, int(rng.integers(4, 12)), jag=0.6)
    R = Region.from_rings(ring)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    moved = Region.from_rings(s * ring @ rot.T + rng.uniform(-10, 10, 2))
    # vertex pairs alone carry over exactly between the two copies
    c0 = quasiconvexity_constant(R, samples=0).constant
    c1 = quasiconvexity_constant(moved, samples=0).constant
    assert c1 == pytest.approx(c0, rel=1e-9)


@given(seeds)
def test_upper_bounds_dominate_geodesics(seed):
    rng = np.random.default_rng(seed)
    R = Region.from_rings(star(rng, (0, 0), 1.0, int(rng.integers(4, 20)), jag=0.7))
    P = R.sample_points(40, rng)
    A, B = P[:20], P[20:]
    ub = R.upper_bounds(A, B)
    exact = np.array([geodesic(R, a, b).length for a, b in zip(A, B)])
    assert (ub >= exact * (1 - 1e-12)).all()


@given(seeds)
def test_vaisala_bound_on_image(seed):
    rng = np.random.default_rng(seed)
    ring = star(rng, (0, 0), 1.0, int(rng.integers(4, 10)), jag=0.6)
    poly = shapely.Polygon(ring)
    f = random_map(rng, poly)
    L = lip_constant(f)
    R = Region(poly)
    image = Region(f.image)
    c = quasiconvexity_constant(R, samples=300, seed=seed).constant
    est = quasiconvexity_constant(image, samples=300, seed=seed)
    # feed the image witness back so the source side tests the matching pair
    if est.witness is not None:
        g = inverse(f)
        a, b = (g.map_point(p) for p in est.witness)
        c = max(c, quasiconvexity_constant(R, samples=0, max_vertex_pairs=0, extra_pairs=[(a, b)]).constant)
    assert est.constant <= L**2 * c + 1e-6
