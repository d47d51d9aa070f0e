import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskbandit.comparator import (
    HindsightAccumulator,
    HindsightProblem,
    LPStatus,
    audit_feasibility,
    bandit_problem,
    best_feasible,
    linprog,
    on_average_value_closed_form,
    simplex_standard,
)
from riskbandit.core import Box, InputError, Simplex
from riskbandit.environments import CONS_1, CONS_2, LOSS_1, LOSS_2


def simplex_grid(d, step=1e-3):
    ts = np.arange(0.0, 1.0 + step / 2, step)
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        return np.column_stack([ts, 1 - ts])
    a, b = np.meshgrid(ts, ts, indexing="ij")
    m = a + b <= 1 + 1e-12
    return np.column_stack([a[m], b[m], np.clip(1 - a[m] - b[m], 0, None)])


def grid_optimum(problem, pts):
    ok = np.all(pts @ problem.rows.T <= problem.bounds + 1e-12, axis=1) if problem.rows.size else np.ones(len(pts), bool)
    if not ok.any():
        return None
    return float((pts[ok] @ problem.objective).min()) + problem.offset


def random_problem(rng, d):
    c = rng.normal(size=d)
    c /= np.abs(c).max()
    n_rows = int(rng.integers(0, 4))
    A = rng.normal(size=(n_rows, d))
    # keep a random interior point feasible
    x0 = rng.dirichlet(np.ones(d))
    b = A @ x0 + rng.random(n_rows) * 0.3
    return HindsightProblem(c, Simplex(d), A, b)


def test_examples():
    T = 7
    res = best_feasible(HindsightProblem(np.array([-T, 0.0]), Simplex(2)))
    np.testing.assert_allclose(res.x, [1, 0])
    assert res.value == -T
    res = best_feasible(HindsightProblem(np.array([-T, 0.0]), Simplex(2), [[1.0, 0.0]], [0.5]))
    np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-12)
    assert res.value == pytest.approx(-0.5 * T, abs=1e-12)
    pts = simplex_grid(2)
    assert grid_optimum(HindsightProblem(np.array([-T, 0.0]), Simplex(2), [[1.0, 0.0]], [0.5]), pts) == pytest.approx(-0.5 * T, abs=1e-9)


def test_lp_matches_grid_search_on_random_instances():
    rng = np.random.default_rng(2024)
    grids = {1: simplex_grid(1), 2: simplex_grid(2, 1e-4), 3: simplex_grid(3, 5e-4)}
    for i in range(100):
        d = int(rng.integers(1, 4))
        prob = random_problem(rng, d)
        res = best_feasible(prob)
        ref = grid_optimum(prob, grids[d])
        assert res.feasible and ref is not None
        assert abs(res.value - ref) <= 2e-3, (i, res.value, ref)
        assert res.value <= ref + 1e-9


def test_box_base_matches_grid():
    rng = np.random.default_rng(3)
    ts = np.arange(-1.0, 2.0 + 1e-9, 3e-3)
    a, b = np.meshgrid(ts, ts, indexing="ij")
    pts = np.column_stack([a.ravel(), b.ravel()])
    for _ in range(20):
        c = rng.normal(size=2)
        A = rng.normal(size=(2, 2))
        bnd = A @ np.array([0.5, 0.5]) + rng.random(2)
        prob = HindsightProblem(c, Box(-1.0, 2.0, 2), A, bnd)
        assert abs(best_feasible(prob).value - grid_optimum(prob, pts)) <= 1e-2


def test_infeasible_is_reported_not_raised():
    prob = HindsightProblem(np.array([1.0, 0.0]), Simplex(2), [[1.0, 0.0], [-1.0, 0.0]], [0.2, -0.8])
    res = best_feasible(prob)
    assert not res.feasible and res.value is None and res.status == "infeasible"
    assert audit_feasibility(prob) == (False, None)


def test_audit_examples():
    ok, w = audit_feasibility(HindsightProblem(np.zeros(3), Simplex(3), [[0.0, 0.0, 0.0]], [0.0]))
    assert ok
    np.testing.assert_allclose(w, 1 / 3)
    prob = HindsightProblem(np.zeros(3), Simplex(3), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [0.0, 0.0])
    ok, w = audit_feasibility(prob)
    assert ok and np.all(prob.rows @ w <= prob.bounds + 1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_witness_satisfies_rows(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 6))
    A = rng.normal(size=(int(rng.integers(1, 10)), d))
    b = A @ rng.dirichlet(np.ones(d))
    prob = HindsightProblem(np.zeros(d), Simplex(d), A, b)
    ok, w = audit_feasibility(prob)
    assert ok and np.all(A @ w - b <= 1e-9) and Simplex(d).contains(w)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_every_round_value_at_least_on_average_value(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    acc = HindsightAccumulator(d)
    x0 = rng.dirichlet(np.ones(d))
    for _ in range(int(rng.integers(1, 30))):
        a = rng.normal(size=d)
        acc.add(rng.normal(size=d), a, float(a @ x0 + rng.random() * 0.1))
    strict = best_feasible(acc.problem(Simplex(d), "every_round"))
    loose = best_feasible(acc.problem(Simplex(d), "on_average"))
    assert strict.feasible and loose.feasible
    assert strict.value >= loose.value - 1e-9


def prop1_value(q, T=1000):
    n2 = int(round(q * T))
    acc = HindsightAccumulator(2)
    acc.add_batch(np.tile(LOSS_2, (n2, 1)), np.tile(CONS_2, (n2, 1)), 0.0)
    acc.add_batch(np.tile(LOSS_1, (T - n2, 1)), np.tile(CONS_1, (T - n2, 1)), 0.0)
    return best_feasible(acc.problem(Simplex(2), "on_average")).value / T


@pytest.mark.parametrize("q", [0.25, 0.5, 0.75, 1.0])
def test_closed_form_on_average_value(q):
    assert abs(prop1_value(q) - on_average_value_closed_form(q)) <= 1e-6


def test_closed_form_values():
    assert on_average_value_closed_form(0.25) == -1.0
    assert on_average_value_closed_form(1.0) == pytest.approx(-0.5 - 0.5 + 1.0)
    assert on_average_value_closed_form(0.75) == pytest.approx(-0.5 - 1 / 1.5 + 0.75)
    with pytest.raises(InputError):
        on_average_value_closed_form(1.5)


def test_dedup_keeps_problem_small():
    acc = HindsightAccumulator(2)
    acc.add_batch(np.zeros((10**5, 2)), np.tile([[1.0, -0.0]], (10**5, 1)), 0.5)
    acc.add([0.0, 0.0], [1.0, 0.0], 0.5)
    assert acc.n_distinct == 1
    assert acc.count == 10**5 + 1


def test_lexicographic_tie_break():
    # every point of simplex(3) with x[2] = 0 is optimal
    res = best_feasible(HindsightProblem(np.array([0.0, 0.0, 1.0]), Simplex(3)))
    np.testing.assert_allclose(res.x, [0.0, 1.0, 0.0], atol=1e-9)


def test_linprog_core():
    res = linprog(np.array([-1.0, -2.0]), np.array([[1.0, 1.0], [1.0, 0.0]]), np.array([4.0, 3.0]))
    assert res.status is LPStatus.OPTIMAL and res.value == pytest.approx(-8.0)
    res = linprog(np.array([-1.0, 0.0]), np.array([[0.0, 1.0]]), np.array([1.0]))
    assert res.status is LPStatus.UNBOUNDED
    res = simplex_standard(np.array([1.0, 1.0]), np.array([[1.0, 1.0], [2.0, 2.0]]), np.array([1.0, 2.0]))
    assert res.status is LPStatus.OPTIMAL and res.value == pytest.approx(1.0)
    res = simplex_standard(np.array([1.0]), np.array([[1.0]]), np.array([-1.0]))
    assert res.status is LPStatus.INFEASIBLE


def test_bandit_problem_uses_ground_truth_vectors():
    table = np.array([[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]])
    ctx = np.zeros(4, dtype=int)
    C = np.array([[0.0, 1.0]] * 4)
    R = np.array([[1.0, 0.0]] * 4)
    prob = bandit_problem(table, ctx, C, R, 0.5)
    np.testing.assert_allclose(prob.objective, [0.0, 4.0, 2.0])
    assert prob.rows.shape[0] == 1
    res = best_feasible(prob)
    assert res.value == pytest.approx(2.0)
    avg = bandit_problem(table, ctx, C, R, 0.5, "on_average")
    np.testing.assert_allclose(avg.rows, [[1.0, 0.0, 0.5]])


def test_problem_validation():
    with pytest.raises(InputError):
        HindsightProblem(np.zeros(2), Simplex(3))
    with pytest.raises(InputError):
        HindsightProblem(np.zeros(2), Simplex(2), [[np.inf, 0]], [0])
    with pytest.raises(InputError):
        HindsightProblem(np.zeros(2), Simplex(2), [[1, 0]], [0, 1])
    with pytest.raises(InputError):
        HindsightProblem(np.zeros(2), Simplex(2), mode="sometimes")
