import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from birkspec.map_model import BranchSystem, discretize_analytic
from birkspec.spectrum_solver import (PressureError, TransferModel, bowen_dimension, continuity_scan,
                                      dual_dimension, level_cover, pressure, primal_dimension,
                                      spectrum_grid, theorem2_dimension)
from birkspec.convex_geom import edge_values
from birkspec.symbolic import PotentialTable, all_words

from oracles import besicovitch, binomial_cover_root, full_shift_pressure, weighted_dimension


def test_pressure_trivial(doubling, digit1, mp):
    for sys_ in (doubling, mp, BranchSystem.linear_lengths([0.2, 0.3, 0.4])):
        f = PotentialTable.constant(sys_.m, 0.0)
        assert pressure(sys_, f, 1, [0.0], 0.0).value == pytest.approx(math.log(sys_.m), abs=1e-12)
    assert pressure(doubling, digit1, 1, [0.0], 1.0).value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("q", [-3.0, 0.0, 0.4, 2.5])
def test_pressure_log_sum_exp(doubling, digit1, q):
    ev = pressure(doubling, digit1, 1, [q], 0.0)
    assert ev.value == pytest.approx(math.log(math.exp(q) + 1), abs=1e-12)
    assert ev.grad_q[0] == pytest.approx(math.exp(q) / (math.exp(q) + 1), abs=1e-12)
    assert ev.d_s == pytest.approx(-math.log(2), abs=1e-12)


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(-2, 2), st.floats(0, 2),
       st.integers(2, 3))
def test_pressure_matches_state_by_state_oracle(vals, q, s, k):
    sys_ = BranchSystem.linear_lengths([0.3, 0.5])
    f = PotentialTable(2, 2, vals)
    edges = all_words(k + 1, 2)
    ref = full_shift_pressure(edge_values(f, k), sys_.edge_log_ratios(edges), 2, k, [q], s)
    assert pressure(sys_, f, k, [q], s).value == pytest.approx(ref, abs=1e-9)


def test_gibbs_measure_is_consistent(doubling, digit1):
    ev = pressure(doubling, digit1, 2, [0.8], 0.5)
    st_ = ev.gibbs
    # Gibbs average of the digit equals the gradient, and entropy recovers the pressure
    assert st_.marginal(1)[0] == pytest.approx(ev.grad_q[0], abs=1e-10)
    assert ev.entropy + 0.8 * ev.grad_q[0] - 0.5 * ev.lyapunov == pytest.approx(ev.value, abs=1e-10)


def test_reducible_mask_is_reported(doubling, digit1):
    with pytest.raises(PressureError):
        TransferModel(doubling, digit1, 1, mask=np.zeros(4, dtype=bool))


def test_order_below_depth_rejected(doubling):
    with pytest.raises(ValueError):
        TransferModel(doubling, PotentialTable(2, 3, np.zeros(8)), 2)


def test_bowen_examples(doubling, mp):
    assert bowen_dimension(BranchSystem.linear_lengths([1 / 3, 1 / 3]), 1) == pytest.approx(
        math.log(2) / math.log(3), abs=1e-6)
    assert bowen_dimension(doubling, 3) == 1.0
    assert bowen_dimension(mp, 8) == pytest.approx(1.0, abs=1e-9)


def test_bowen_matches_moran_equation():
    from oracles import moran_root

    lengths = [0.1, 0.25, 0.3]
    assert bowen_dimension(BranchSystem.linear_lengths(lengths), 1) == pytest.approx(moran_root(lengths), abs=1e-8)


def test_dual_examples(doubling, digit1):
    assert dual_dimension(doubling, digit1, 0.5, 1).D == pytest.approx(1.0, abs=1e-6)
    pt = dual_dimension(doubling, digit1, 0.25, 1)
    assert pt.status == "interior_solved" and pt.D == pytest.approx(0.811278, abs=1e-4)
    pt = dual_dimension(doubling, digit1, 1.0, 1)
    assert pt.status == "boundary_fallback" and pt.D == pytest.approx(0.0, abs=1e-4)
    assert dual_dimension(doubling, digit1, 1.2, 1).status == "infeasible"


def test_dual_certificate_is_tight(doubling, digit1):
    pt = dual_dimension(doubling, digit1, 0.3, 2, tol=1e-8)
    assert abs(pt.average[0] - 0.3) <= 1e-6
    assert abs(pt.h / pt.lam - pt.D) <= 1e-6
    assert pt.measure.marginal(1)[0] == pytest.approx(0.3, abs=1e-6)


def test_primal_examples(doubling, digit1):
    assert primal_dimension(doubling, digit1, 0.25, 1).D == pytest.approx(0.8113, abs=1e-3)
    sys_ = BranchSystem.linear_lengths([0.25, 0.75])
    f = discretize_analytic(sys_, {"id": "digit_indicator", "j": 1}, 1)
    assert primal_dimension(sys_, f, 0.25, 1).D == pytest.approx(1.0, abs=1e-4)
    # only the fixed point 2^inf has digit frequency 0
    assert primal_dimension(doubling, digit1, 0.0, 2).D == pytest.approx(0.0, abs=1e-4)


def test_primal_outside_is_infeasible(doubling, digit1):
    assert primal_dimension(doubling, digit1, 1.5, 1).status == "infeasible"


def test_theorem2_examples(mp, mp_x, dp, dp_pair):
    pt = theorem2_dimension(mp, mp_x, 0.0, 6)
    assert pt.status == "in_A" and pt.D == pytest.approx(1.0, abs=1e-9)
    pt = theorem2_dimension(dp, dp_pair, [0.5, 0.5], 3)
    assert pt.status == "in_A" and pt.D == pytest.approx(1.0, abs=1e-9)
    pt = theorem2_dimension(mp, mp_x, 0.9, 6)
    assert pt.status == "interior_solved" and pt.D < 1
    solved = [e["D"] for e in pt.extras["sweep"][:-1] if e["status"] != "infeasible"]
    assert len(solved) >= 2 and all(b > a for a, b in zip(solved, solved[1:]))
    assert pt.extras["monotone_in_L"]


def test_theorem2_without_parabolic_matches_dual(doubling, digit1):
    a = theorem2_dimension(doubling, digit1, 0.3, 2).D
    assert a == pytest.approx(dual_dimension(doubling, digit1, 0.3, 2).D, abs=1e-9)


def test_subsystem_sweep_grows_at_moderate_alpha(mp, mp_x):
    pt = theorem2_dimension(mp, mp_x, 0.3, 8, runs=[2, 4, 8])
    vals = [e["D"] for e in pt.extras["sweep"][:-1]]
    assert vals[0] < vals[1] < vals[2]


def test_level_cover_examples(doubling, digit1):
    count, root = binomial_cover_root(10, 0.5, 0.1)
    cov = level_cover(doubling, digit1, 0.5, 10, 0.1)
    assert cov.count == count == 252
    assert cov.root == pytest.approx(root, abs=1e-9)
    cov = level_cover(doubling, digit1, 1.0, 10, 0.01)
    assert [tuple(w) for w in cov.words] == [(1,) * 10] and cov.root == 0.0
    cov = level_cover(doubling, digit1, 3.0, 10, 0.01)
    assert cov.empty and cov.root == 0.0


def test_level_cover_constant_potential():
    sys_ = BranchSystem.linear_lengths([1 / 3, 1 / 3])
    cov = level_cover(sys_, PotentialTable.constant(2, 0.4), 0.4, 8, 0.01)
    assert cov.count == 2**8
    assert cov.root == pytest.approx(bowen_dimension(sys_, 1), abs=1e-8)


@given(st.integers(4, 12), st.floats(0.05, 0.95), st.floats(0.02, 0.3))
def test_level_cover_matches_binomial_count(n, alpha, radius):
    d = BranchSystem.doubling()
    f = discretize_analytic(d, {"id": "digit_indicator", "j": 1}, 1)
    # keep off the sphere so rounding in the frequency cannot flip membership
    gaps = [abs(abs(j / n - alpha) - radius) for j in range(n + 1)]
    if min(gaps) < 1e-9:
        return
    count, root = binomial_cover_root(n, alpha, radius)
    cov = level_cover(d, f, alpha, n, radius)
    assert cov.count == count
    assert cov.root == pytest.approx(root, abs=1e-8)


def test_spectrum_grid_arch(doubling, digit1):
    grid = [[a / 10] for a in range(11)]
    pts = spectrum_grid(doubling, digit1, grid, 1)
    for a, pt in zip(grid, pts):
        assert pt.D == pytest.approx(besicovitch(a[0]), abs=1e-3)
    assert max(pts, key=lambda p: p.D).alpha[0] == 0.5
    out = spectrum_grid(doubling, digit1, [[-0.1], [1.1]], 1)
    assert [p.status for p in out] == ["infeasible", "infeasible"]


def test_spectrum_grid_order_independent(doubling, digit1):
    grid = [[0.2], [0.7], [0.45]]
    a = [p.D for p in spectrum_grid(doubling, digit1, grid, 2)]
    b = [p.D for p in spectrum_grid(doubling, digit1, grid[::-1], 2, threads=3)]
    assert a == b[::-1]


def test_mp_grid_near_zero(mp, mp_x):
    # flat at 0; away from it the finite-order values climb toward 1 as k grows
    grid = [[0.0], [0.02], [0.05]]
    low = spectrum_grid(mp, mp_x, grid, 4)
    high = spectrum_grid(mp, mp_x, grid, 8)
    assert low[0].status == high[0].status == "in_A" and high[0].D == 1.0
    for a, b in zip(low[1:], high[1:]):
        assert a.D < b.D < 1.0


def test_weighted_grid():
    sys_ = BranchSystem.linear_lengths([0.25, 0.75])
    f = discretize_analytic(sys_, {"id": "digit_indicator", "j": 1}, 1)
    for a in (0.1, 0.25, 0.6):
        assert dual_dimension(sys_, f, a, 1).D == pytest.approx(weighted_dimension(a), abs=1e-3)


def test_continuity_scan_examples(doubling, digit1):
    osc = [r["oscillation"] for r in continuity_scan(doubling, digit1, 0.3, 1, [0.1, 0.05, 0.01])]
    assert osc[0] > osc[1] > osc[2] and osc[2] < 0.02
    osc = [r["oscillation"] for r in continuity_scan(doubling, digit1, 0.5, 1, [0.1, 0.05, 0.01])]
    assert osc[0] > osc[1] > osc[2]
    # near the peak the drop is quadratic in the radius
    assert osc[0] <= 0.1**2 / (2 * 0.25 * math.log(2)) * 1.2
    with pytest.raises(ValueError):
        continuity_scan(doubling, PotentialTable.constant(2, 1.0), 1.0, 1, [0.1])


def test_continuity_scan_rejects_parabolic_hull(mp, mp_x):
    with pytest.raises(ValueError):
        continuity_scan(mp, mp_x, 0.0, 4, [0.1])


def test_point_serialises(doubling, digit1):
    d = dual_dimension(doubling, digit1, 0.25, 1).to_dict()
    assert d["status"] == "interior_solved" and d["alpha"] == [0.25]
    assert dual_dimension(doubling, digit1, 2.0, 1).to_dict()["q_star"] is None


@st.composite
def probes(draw):
    q = np.array(draw(st.lists(st.floats(-2, 2), min_size=2, max_size=2)))
    s = draw(st.floats(0, 1.5))
    return q, s


@given(probes(), probes())
def test_pressure_midpoint_convex(a, b):
    model = TransferModel(BranchSystem.double_parabolic(0.5), discretize_analytic(
        BranchSystem.double_parabolic(0.5), [{"id": "coordinate"}, {"id": "affine", "a": -1.0, "b": 1.0}], 1), 3)
    (qa, sa), (qb, sb) = a, b
    mid = model.evaluate((qa + qb) / 2, (sa + sb) / 2).value
    assert mid <= 0.5 * (model.evaluate(qa, sa).value + model.evaluate(qb, sb).value) + 1e-8


@given(probes())
def test_pressure_gradient_finite_differences(p):
    sys_ = BranchSystem.manneville_pomeau(0.5)
    f = PotentialTable(2, 2, np.array([[0.0, 1.0], [0.5, -1.0], [1.0, 0.2], [0.3, 0.3]]))
    model = TransferModel(sys_, f, 3)
    q, s = p
    ev = model.evaluate(q, s)
    h = 1e-5
    fd = []
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd.append((model.evaluate(q + e, s).value - model.evaluate(q - e, s).value) / (2 * h))
    fd_s = (model.evaluate(q, s + h).value - model.evaluate(q, s - h).value) / (2 * h)
    scale = max(1.0, np.abs(fd).max())
    assert np.abs(ev.grad_q - fd).max() <= 1e-4 * scale
    assert abs(ev.d_s - fd_s) <= 1e-4 * max(1.0, abs(fd_s))


@given(st.floats(0.05, 0.95), st.integers(1, 2))
def test_weak_duality_and_dominance(alpha, k):
    d = BranchSystem.doubling()
    f = discretize_analytic(d, {"id": "digit_indicator", "j": 1}, 1)
    dual = dual_dimension(d, f, alpha, k)
    primal = primal_dimension(d, f, alpha, k)
    assert primal.D <= dual.D + 1e-3
    assert abs(primal.D - dual.D) <= 1e-3
    assert dual.D <= bowen_dimension(d, k) + 1e-6


@pytest.mark.parametrize("alpha", [0.15, 0.3, 0.45, 0.6, 0.8])
def test_monotone_in_order(doubling, alpha):
    # a depth-two potential makes the higher orders genuinely richer
    f = PotentialTable(2, 2, [1.0, 0.0, 0.0, 1.0])
    vals = [dual_dimension(doubling, f, alpha, k).D for k in (2, 3, 4)]
    assert vals[0] <= vals[1] + 1e-6 and vals[1] <= vals[2] + 1e-6


def test_legendre_consistency(doubling, digit1):
    pt = dual_dimension(doubling, digit1, 0.35, 2, tol=1e-8)
    inner = pt.extras["inner_value"]
    assert abs(pt.h - pt.s_star * pt.lam - inner) <= 1e-6
