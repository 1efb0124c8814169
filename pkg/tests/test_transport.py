import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog
from scipy.stats import wasserstein_distance

from spatial_ldp.geometry import GridSpec
from spatial_ldp.histogram import DiscreteMeasure, Histogram
from spatial_ldp.transport import (
    cost_matrix,
    sinkhorn,
    sinkhorn_plan,
    sliced_wasserstein,
    solve_transport,
    support_size,
    wasserstein_1d,
    wasserstein_exact,
)


def reference_cost(a, b, C):
    m, n = C.shape
    A = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def random_hist(rng, grid, sparsity=0.0):
    w = rng.dirichlet(np.ones(grid.n_cells))
    w[rng.random(grid.n_cells) < sparsity] = 0
    if w.sum() == 0:
        w[0] = 1
    return Histogram(grid, w / w.sum())


def test_matches_reference_lp_on_small_grids():
    rng = np.random.default_rng(0)
    grid = GridSpec.from_cells(3)
    for _ in range(30):
        P, Q = random_hist(rng, grid, 0.3), random_hist(rng, grid, 0.3)
        value, plan = wasserstein_exact(P, Q, 2)
        ref = reference_cost(P.mass.ravel(), Q.mass.ravel(), cost_matrix(grid.centers(), grid.centers(), 2))
        assert value**2 == pytest.approx(ref, abs=1e-9)
        assert plan.duality_gap < 1e-9


def test_rectangular_and_degenerate_instances():
    rng = np.random.default_rng(1)
    for m, n in [(1, 5), (5, 1), (4, 7), (12, 3)]:
        a = rng.dirichlet(np.ones(m))
        b = rng.dirichlet(np.ones(n))
        C = rng.integers(0, 3, size=(m, n)).astype(float)  # many ties
        plan = solve_transport(a, b, C)
        assert plan.cost == pytest.approx(reference_cost(a, b, C), abs=1e-10)
        assert plan.marginal_error(a, b) < 1e-12
    # equal partial sums force degenerate pivots
    a = np.full(6, 1 / 6)
    plan = solve_transport(a, a, cost_matrix(rng.random((6, 2)), rng.random((6, 2))))
    assert plan.marginal_error(a, a) < 1e-12


def test_point_masses():
    grid = GridSpec.from_cells(4)
    P = Histogram.point_mass(grid, (0, 0))
    Q = Histogram.point_mass(grid, (3, 0))
    value, plan = wasserstein_exact(P, Q, 2)
    assert value == pytest.approx(3.0, abs=1e-12)
    assert plan.coupling[0, 12] == pytest.approx(1.0)


def test_identical_measures():
    grid = GridSpec.from_cells(3)
    P = random_hist(np.random.default_rng(2), grid)
    value, plan = wasserstein_exact(P, P)
    assert value == 0.0
    assert np.allclose(plan.coupling, np.diag(P.mass.ravel()))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    grid = GridSpec.from_cells(3)
    P, Q, R = (random_hist(rng, grid, 0.2) for _ in range(3))
    pq = wasserstein_exact(P, Q)[0]
    assert pq == pytest.approx(wasserstein_exact(Q, P)[0], abs=1e-9)
    assert pq <= wasserstein_exact(P, R)[0] + wasserstein_exact(R, Q)[0] + 1e-7
    assert pq >= 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_plan_feasible(seed):
    rng = np.random.default_rng(seed)
    grid = GridSpec.from_cells(4)
    P, Q = random_hist(rng, grid, 0.4), random_hist(rng, grid, 0.4)
    _, plan = wasserstein_exact(P, Q)
    assert plan.coupling.min() >= 0
    assert plan.marginal_error(P.mass.ravel(), Q.mass.ravel()) < 1e-9


def test_rejects_bad_inputs():
    g3, g4 = GridSpec.from_cells(3), GridSpec.from_cells(4)
    with pytest.raises(ValueError):
        wasserstein_exact(Histogram.uniform(g3), Histogram.uniform(g4))
    with pytest.raises(ValueError):
        wasserstein_exact(([[0, 0]], [0.5]), ([[1, 1]], [1.0]))
    with pytest.raises(ValueError):
        sliced_wasserstein(Histogram.uniform(g3), Histogram.uniform(g3), n_angles=0)
    with pytest.raises(ValueError):
        sinkhorn(Histogram.uniform(g3), Histogram.uniform(g3), reg=-1)


def test_accepts_point_weight_pairs_and_measures():
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    a = np.array([0.5, 0.5])
    v1 = wasserstein_exact((X, a), DiscreteMeasure(X[:1], [1.0]), 2)[0]
    assert v1 == pytest.approx(math.sqrt(0.5))
    assert support_size((X, a), (X, [1.0, 0.0])) == 3


def test_sinkhorn_close_to_exact():
    rng = np.random.default_rng(3)
    grid = GridSpec.from_cells(4)
    for _ in range(5):
        P, Q = random_hist(rng, grid), random_hist(rng, grid)
        exact = wasserstein_exact(P, Q)[0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            approx = sinkhorn(P, Q)
        assert abs(approx - exact) / exact < 0.05
        assert approx >= exact - 1e-9  # the rounded plan is feasible


def test_sinkhorn_identical_is_small():
    grid = GridSpec.from_cells(4)
    P = random_hist(np.random.default_rng(4), grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        assert sinkhorn(P, P) < 1e-3


def test_sinkhorn_annealing_tightens():
    rng = np.random.default_rng(5)
    grid = GridSpec.from_cells(3)
    P, Q = random_hist(rng, grid), random_hist(rng, grid)
    res = sinkhorn_plan(P, Q, levels=6)
    hist = np.array(res.history)
    assert np.all(np.diff(hist) <= 1e-9 * hist[0])
    assert hist[-1] >= wasserstein_exact(P, Q)[1].cost - 1e-12


def test_sinkhorn_reports_non_convergence():
    grid = GridSpec.from_cells(3)
    rng = np.random.default_rng(6)
    P, Q = random_hist(rng, grid), random_hist(rng, grid)
    with pytest.warns(RuntimeWarning, match="marginal violation"):
        res = sinkhorn_plan(P, Q, max_iter=1, tol=1e-15)
    assert not res.converged and res.marginal_violation > 0


def test_1d_hand_values():
    assert wasserstein_1d([0, 1], [0.5, 0.5], [0, 1], [1.0, 0.0]) == pytest.approx(0.5)
    assert wasserstein_1d([0, 1, 2], [0.2, 0.3, 0.5], [0, 1, 2], [0.2, 0.3, 0.5]) == 0.0
    with pytest.raises(ValueError):
        wasserstein_1d([0, 1], [0.5, 0.6], [0], [1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_1d_matches_references(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=10), rng.normal(size=10)
    a, b = rng.dirichlet(np.ones(10)), rng.dirichlet(np.ones(10))
    assert wasserstein_1d(x, a, y, b, 1) == pytest.approx(wasserstein_distance(x, y, a, b), abs=1e-9)
    line = lambda t: np.column_stack([t, np.zeros_like(t)])
    for p in (1, 2):
        exact = wasserstein_exact((line(x), a), (line(y), b), p)[0]
        assert wasserstein_1d(x, a, y, b, p) == pytest.approx(exact, abs=1e-9)


def test_sliced_translated_point_masses():
    grid = GridSpec.from_cells(12)
    P = Histogram.point_mass(grid, (1, 2))
    Q = Histogram.point_mass(grid, (8, 6))
    expect = 2 / math.pi * math.hypot(7, 4)
    assert sliced_wasserstein(P, Q, 256) == pytest.approx(expect, rel=1e-3)
    assert sliced_wasserstein(P, P, 16) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_sliced_below_exact(seed):
    rng = np.random.default_rng(seed)
    grid = GridSpec.from_cells(3)
    P, Q = random_hist(rng, grid), random_hist(rng, grid)
    assert sliced_wasserstein(P, Q, 64, 1) <= wasserstein_exact(P, Q, 1)[0] + 1e-9
    assert sliced_wasserstein(P, Q, 64, 2) <= wasserstein_exact(P, Q, 2)[0] + 1e-9


def test_sliced_order_independent():
    rng = np.random.default_rng(9)
    grid = GridSpec.from_cells(5)
    P, Q = random_hist(rng, grid), random_hist(rng, grid)
    assert sliced_wasserstein(P, Q, 90) == sliced_wasserstein(P, Q, 90)
    assert sliced_wasserstein(P, Q, 90) == pytest.approx(sliced_wasserstein(Q, P, 90), abs=1e-12)


def test_cost_matrix_exponent():
    X = np.array([[0.0, 0.0]])
    Y = np.array([[3.0, 4.0], [0.0, 0.0]])
    assert np.allclose(cost_matrix(X, Y, 1), [[5.0, 0.0]])
    assert np.allclose(cost_matrix(X, Y, 2), [[25.0, 0.0]])
