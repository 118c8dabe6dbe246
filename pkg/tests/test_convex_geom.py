import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from birkspec.convex_geom import (OutsideHull, Polytope, forbidden_run_mask, minimal_face, parabolic_hull,
                                  relative_interior_contains, rotation_set, strict_convex_decomposition,
                                  support_graph, surrounding_simplex)
from birkspec.map_model import BranchSystem, discretize_analytic
from birkspec.symbolic import PotentialTable


def segment():
    return Polytope.from_points([[0.0, 1.0], [1.0, 0.0]])


def test_parabolic_hull_examples(doubling, digit1, mp, mp_x, dp, dp_pair):
    assert parabolic_hull(doubling, digit1).is_empty
    A = parabolic_hull(mp, mp_x)
    assert A.dim == 0 and A.vertices.tolist() == [[0.0]]
    A = parabolic_hull(dp, dp_pair)
    assert sorted(map(tuple, A.vertices)) == [(0.0, 1.0), (1.0, 0.0)]


def test_rotation_set_examples(doubling, digit1):
    R = rotation_set(doubling, digit1, 1)
    assert R.bounding_box()[0].tolist() == [0.0] and R.bounding_box()[1].tolist() == [1.0]
    both = discretize_analytic(doubling, [{"id": "digit_indicator", "j": 1}, {"id": "digit_indicator", "j": 2}], 1)
    R = rotation_set(doubling, both, 1)
    assert R.dim == 1 and sorted(map(tuple, R.vertices)) == [(0.0, 1.0), (1.0, 0.0)]
    R = rotation_set(doubling, PotentialTable.constant(2, [0.7]), 2)
    assert R.dim == 0 and R.vertices[0] == pytest.approx([0.7])


def test_relative_interior_examples():
    P = segment()
    assert relative_interior_contains(P, [0.5, 0.5], 1e-6)
    assert not relative_interior_contains(P, [1.0, 0.0], 1e-6)
    assert not relative_interior_contains(P, [0.4, 0.59], 1e-6)


def test_decomposition_examples():
    sq = Polytope.from_points([[1, 1], [1, -1], [-1, 1], [-1, -1]])
    V, r = strict_convex_decomposition(sq, [0, 0])
    assert len(V) == 4 and r == pytest.approx([0.25] * 4, abs=1e-9)
    V, r = strict_convex_decomposition(Polytope.from_points([[0.0], [1.0]]), [0.25])
    assert dict(zip(V[:, 0], r)) == pytest.approx({0.0: 0.75, 1.0: 0.25})
    tri = Polytope.from_points([[0, 0], [1, 0], [0, 1]])
    V, r = strict_convex_decomposition(tri, [0.5, 0])
    assert sorted(map(tuple, V)) == [(0.0, 0.0), (1.0, 0.0)] and r == pytest.approx([0.5, 0.5])


def test_decomposition_outside():
    with pytest.raises(OutsideHull):
        strict_convex_decomposition(segment(), [0.6, 0.6])


def test_surrounding_simplex_examples():
    S = surrounding_simplex(Polytope.from_points([[0.0], [1.0]]), [0.5], 0.1)
    assert sorted(S.vertices[:, 0]) == pytest.approx([0.4, 0.6])
    pieces = sorted(tuple(sorted(p[:, 0])) for p in S.pieces)
    assert pieces == [pytest.approx((0.4, 0.5)), pytest.approx((0.5, 0.6))]
    sq = Polytope.from_points([[0, 0], [1, 0], [0, 1], [1, 1]])
    S = surrounding_simplex(sq, [0.5, 0.5], 0.1)
    assert len(S.vertices) == 3
    assert S.vertices.mean(axis=0) == pytest.approx([0.5, 0.5])
    assert all(sq.contains(v) for v in S.vertices)
    with pytest.raises(ValueError):
        surrounding_simplex(Polytope.from_points([[0.3, 0.3]]), [0.3, 0.3], 0.1)


def test_forbidden_runs_shrink_graph():
    edges_all, _ = support_graph(2, 4)
    mask = forbidden_run_mask(2, 4, [(1, 3)])
    edges, _ = support_graph(2, 4, mask)
    assert len(edges) < len(edges_all)
    assert all(mask[e] for e in edges)


def test_subsystem_excludes_parabolic_value(mp, mp_x):
    # forbidding 1^L keeps every invariant measure away from the fixed point 0
    for L in (2, 4):
        R = rotation_set(mp, mp_x, 6, mask=forbidden_run_mask(2, 6, [(1, L)]))
        assert R.bounding_box()[0][0] >= 1 / L - 1e-9


@st.composite
def depth_tables(draw, d=1):
    r = draw(st.integers(1, 2))
    vals = draw(st.lists(st.floats(-1, 1), min_size=2**r * d, max_size=2**r * d))
    return PotentialTable(2, r, np.array(vals).reshape(2**r, d))


@given(depth_tables(d=2))
def test_rotation_sets_grow_with_order(f):
    sys_ = BranchSystem.doubling()
    R2 = rotation_set(sys_, f, 2)
    R3 = rotation_set(sys_, f, 3)
    assert R3.includes(R2, 1e-7)


@given(st.sampled_from([0.3, 0.5, 1.0]), st.integers(1, 4))
def test_parabolic_hull_inside_rotation_set(gamma, k):
    dp = BranchSystem.double_parabolic(gamma)
    F = discretize_analytic(dp, [{"id": "coordinate"}, {"id": "affine", "a": -1.0, "b": 1.0}], 1)
    assert rotation_set(dp, F, k).includes(parabolic_hull(dp, F), 1e-9)


@st.composite
def polytopes(draw):
    d = draw(st.integers(1, 3))
    n = draw(st.integers(1, 7))
    pts = draw(st.lists(st.lists(st.floats(-5, 5), min_size=d, max_size=d), min_size=n, max_size=n))
    return np.array(pts, dtype=float)


@given(polytopes(), st.data())
def test_decomposition_reconstructs(pts, data):
    P = Polytope.from_points(pts)
    w = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(pts), max_size=len(pts))))
    if w.sum() < 1e-3:
        w = np.ones(len(pts))
    alpha = (w / w.sum()) @ pts
    V, r = strict_convex_decomposition(P, alpha, tol=1e-7)
    assert np.all(r > 0)
    assert r.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(r @ V, alpha, atol=1e-6 * max(1.0, np.abs(pts).max()))
    # every chosen vertex is a vertex of the minimal face
    face = P.vertices[minimal_face(P, alpha, 1e-7)]
    assert all(any(np.allclose(v, u) for u in face) for v in V)


@given(polytopes())
def test_vertex_sets_are_extreme(pts):
    P = Polytope.from_points(pts)
    for v in P.vertices:
        assert P.contains(v, 1e-9)
    for p in pts:
        assert P.contains(p, 1e-7)


def test_centroid_of_simplex_is_relative_interior():
    for d in (1, 2, 3):
        verts = np.vstack([np.zeros(d), np.eye(d)])
        assert relative_interior_contains(Polytope.from_points(verts), verts.mean(axis=0), 1e-6)


def test_cycle_averages_hit_brute_force(doubling):
    # order 1, depth 2: every simple cycle of length <= 2 gives a point in the set
    f = PotentialTable(2, 2, [0.0, 1.0, 0.5, -1.0])
    R = rotation_set(doubling, f, 1)
    for cyc in [(1,), (2,), (1, 2)]:
        w = cyc * 2
        val = np.mean([f.at(w[j:j + 2]) for j in range(len(cyc))])
        assert R.contains([val], 1e-9)
    lo, hi = R.bounding_box()
    # cycles 1, 2 and 12 average 0, -1 and (1 + 0.5)/2
    assert lo[0] == pytest.approx(-1.0) and hi[0] == pytest.approx(0.75)


def test_to_dict_shape(doubling, digit1):
    d = rotation_set(doubling, digit1, 2).to_dict()
    assert d["intrinsic_dim"] == 1 and len(d["vertices"]) == 2


def test_interior_points_are_not_vertices():
    # the square has exactly four extreme points even with interior samples
    pts = list(itertools.product([0.0, 1.0], repeat=2)) + [(0.5, 0.5), (0.2, 0.7)]
    assert len(Polytope.from_points(pts).vertices) == 4
