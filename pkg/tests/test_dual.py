import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from elmeta.el import hull_contains_origin, solve_dual
from elmeta.errors import InfeasibleHull
from oracles import dual_loglik_grid_1d, dual_loglik_grid_2d


def _random_instance(rng, r):
    while True:
        k = int(rng.integers(3 if r == 2 else 2, 9))
        scale = 10.0 ** rng.uniform(-2, 2, size=r)
        v = rng.standard_normal((k, r)) * scale + rng.standard_normal(r) * scale * 0.8
        if hull_contains_origin(v):
            return v


@pytest.mark.parametrize("seed", range(10))
def test_1d_matches_dense_grid(seed):
    v = _random_instance(np.random.default_rng(seed), 1)
    sol = solve_dual(v)
    ref, _ = dual_loglik_grid_1d(v[:, 0])
    assert abs(sol.log_lik - ref) <= 1e-6


@pytest.mark.parametrize("seed", range(10))
def test_2d_matches_zoom_grid(seed):
    v = _random_instance(np.random.default_rng(100 + seed), 2)
    sol = solve_dual(v)
    ref, _ = dual_loglik_grid_2d(v)
    assert abs(sol.log_lik - ref) <= 1e-6


def test_weights_satisfy_constraint_and_sum_to_one():
    v = np.array([[1.0, 0.2], [-0.5, 1.0], [0.1, -2.0], [-1.0, -0.1], [0.3, 0.4]])
    sol = solve_dual(v)
    assert sol.weights.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(sol.weights @ v, 0.0, atol=1e-12)
    assert np.all(sol.weights > 0)
    assert sol.log_lik == pytest.approx(np.sum(np.log(sol.weights)), abs=1e-12)


def test_zero_mean_vectors_give_uniform_weights():
    v = np.array([-1.0, 1.0, -2.0, 2.0])
    sol = solve_dual(v)
    np.testing.assert_allclose(sol.weights, 0.25, atol=1e-14)
    assert sol.log_lik == pytest.approx(-4 * math.log(4))


def test_all_zero_vectors_are_feasible():
    sol = solve_dual(np.zeros((3, 2)))
    assert sol.log_lik == pytest.approx(-3 * math.log(3))


def test_target_shifts_constraint():
    x = np.array([0.0, 1.0, 1.0, 0.0, 1.0])
    a = solve_dual(x, target=[0.5])
    b = solve_dual(x - 0.5)
    assert a.log_lik == pytest.approx(b.log_lik, abs=1e-14)


def test_infeasible_hull_raises():
    with pytest.raises(InfeasibleHull):
        solve_dual([1.0, 2.0, 3.0])
    with pytest.raises(InfeasibleHull):
        # origin on the boundary of the hull
        solve_dual([0.0, 1.0, 2.0])
    with pytest.raises(InfeasibleHull):
        solve_dual([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])


def test_hull_test_2d():
    square = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float)
    assert hull_contains_origin(square)
    assert not hull_contains_origin(square + [1.0, 0.0])
    assert not hull_contains_origin(square[:2])


def test_near_boundary_instance_converges():
    # One point carries almost all the negative mass.
    v = np.array([[-1e-3, 0.5], [1.0, -0.2], [2.0, 0.3], [0.5, -0.1], [3.0, 0.05]])
    v = np.vstack([v, [[-1e-4, -0.4]]])
    sol = solve_dual(v)
    ref, _ = dual_loglik_grid_2d(v)
    assert abs(sol.log_lik - ref) <= 1e-6


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=12))
def test_1d_stationarity(xs):
    x = np.array(xs)
    assume(hull_contains_origin(x) and np.ptp(x) > 1e-6)
    sol = solve_dual(x)
    z = 1.0 + sol.lam[0] * x
    assert np.all(z > 0)
    assert abs(np.sum(x / z)) <= 1e-8 * max(1.0, np.abs(x).max()) * x.size * max(1.0, 1 / z.min())
    assert sol.log_lik <= -x.size * math.log(x.size) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 10), st.integers(0, 2 ** 32 - 1))
def test_2d_log_lik_bounded_and_invariant_to_row_order(k, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((k, 2)) + rng.uniform(-0.5, 0.5, 2)
    assume(hull_contains_origin(v))
    a = solve_dual(v)
    b = solve_dual(v[::-1])
    assert a.log_lik <= -k * math.log(k) + 1e-12
    assert a.log_lik == pytest.approx(b.log_lik, abs=1e-9)
    # Linear reparametrisation of the constraint leaves the optimum unchanged.
    c = solve_dual(v @ np.array([[2.0, 1.0], [0.0, 3.0]]))
    assert a.log_lik == pytest.approx(c.log_lik, abs=1e-9)
