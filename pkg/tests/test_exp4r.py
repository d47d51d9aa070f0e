import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskbandit.core import InputError, InvariantViolation
from riskbandit.exp4r import (
    EXP4R,
    BanditFeedback,
    BanditRound,
    Exp4rState,
    PolicyTable,
    check_advice,
    expert_estimates,
    exp4r_round,
    exp4r_update,
    importance_weighted,
    mix_experts,
    theorem2_params,
)


def random_instance(rng, K=None, N=None):
    K = K or int(rng.integers(1, 6))
    N = N or int(rng.integers(1, 9))
    advice = rng.dirichlet(np.ones(K), size=N)
    w = rng.dirichlet(np.ones(N))
    return advice, w, rng.random(K), rng.random(K)


@pytest.mark.parametrize(
    "w,rows,expected",
    [((1, 0), ((0.3, 0.7), (0.9, 0.1)), (0.3, 0.7)), ((0.5, 0.5), ((1, 0), (0, 1)), (0.5, 0.5)), ((0.25, 0.75), ((0.8, 0.2), (0.4, 0.6)), (0.5, 0.5))],
)
def test_mix_experts(w, rows, expected):
    np.testing.assert_allclose(mix_experts(w, rows), expected, atol=1e-15)


def test_mix_experts_dimension_mismatch():
    with pytest.raises(InputError):
        mix_experts([0.5, 0.5], np.eye(3))


def test_importance_weighted_examples():
    c_hat, r_hat = importance_weighted(0.8, 0.4, 1, [0.5, 0.25, 0.25])
    np.testing.assert_allclose(c_hat, [0, 3.2, 0])
    np.testing.assert_allclose(r_hat, [0, 1.6, 0])
    c_hat, _ = importance_weighted(0.0, 0.0, 0, [1.0, 0.0])
    assert not c_hat.any()
    with pytest.raises(InvariantViolation):
        importance_weighted(0.5, 0.5, 1, [1.0, 0.0])


def test_expert_estimates_examples():
    advice = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    y, z = expert_estimates(advice, np.zeros(3), np.zeros(3))
    assert not y.any() and not z.any()
    y, _ = expert_estimates(advice, [0.0, 3.2, 0.0], np.zeros(3))
    assert y[1] == 3.2
    with pytest.raises(InputError):
        expert_estimates(advice, np.zeros(2), np.zeros(2))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unbiasedness_and_second_moment_by_enumeration(seed):
    """Sum over every possible pulled arm, weighted by its probability."""
    rng = np.random.default_rng(seed)
    advice, w, c, r = random_instance(rng)
    p = mix_experts(w, advice)
    K = p.shape[0]
    e_c, e_y, e_z, second = np.zeros(K), 0.0, 0.0, 0.0
    for a in range(K):
        if p[a] == 0:
            continue
        c_hat, r_hat = importance_weighted(c[a], r[a], a, p)
        y_hat, z_hat = expert_estimates(advice, c_hat, r_hat)
        e_c = e_c + p[a] * c_hat
        e_y = e_y + p[a] * y_hat
        e_z = e_z + p[a] * z_hat
        second += p[a] * float(w @ y_hat**2)
        # realised identities
        assert abs(float(w @ y_hat) - c[a]) <= 1e-12
        assert abs(float(w @ z_hat) - r[a]) <= 1e-12
    np.testing.assert_allclose(e_c, c, atol=1e-12, rtol=0)
    np.testing.assert_allclose(e_y, advice @ c, atol=1e-12, rtol=0)
    np.testing.assert_allclose(e_z, advice @ r, atol=1e-12, rtol=0)
    assert second <= K + 1e-12


def test_exp4r_update_examples():
    s = Exp4rState.from_weights([0.5, 0.5], 0.0, math.log(2), 1.0)
    new = exp4r_update(s, [1.0, 0.0], [0.0, 0.0], 0.5)
    np.testing.assert_allclose(new.weights, [1 / 3, 2 / 3], atol=1e-15)
    s = Exp4rState.from_weights([0.2, 0.8], 0.7, 0.1, 3.0)
    new = exp4r_update(s, [0.0, 0.0], [0.0, 0.0], 0.4)
    np.testing.assert_allclose(new.weights, [0.2, 0.8], atol=1e-15)
    assert new.lam == pytest.approx(max(0.0, 0.7 * (1 - 3.0 * 0.01) - 0.1 * 0.4), abs=1e-15)
    # equal Lagrangian losses leave weights unchanged
    new = exp4r_update(s, [1.0, 0.3], [0.0, 1.0], 0.0)
    np.testing.assert_allclose(new.weights, [0.2, 0.8], atol=1e-15)


def test_dual_step_uses_pre_step_weights():
    s = Exp4rState.from_weights([0.9, 0.1], 0.0, 1.0, 0.5)
    z = np.array([0.0, 2.0])
    new = exp4r_update(s, [5.0, 0.0], z, 0.0)
    assert new.lam == pytest.approx(1.0 * (0.1 * 2.0), abs=1e-15)


def test_extreme_losses_stay_on_simplex():
    s = Exp4rState.initial(3, 1.0, 1.0)
    new = exp4r_update(s, [1e12, 0.0, -1e12], [0.0, 0.0, 0.0], 0.0)
    w = new.weights
    assert np.all(np.isfinite(w)) and w.sum() == pytest.approx(1.0)
    assert w[2] == pytest.approx(1.0)


def test_theorem2_examples():
    mu, delta = theorem2_params(10_000, 4, 16)
    assert mu == pytest.approx(math.sqrt(math.log(16) / 80_000), rel=1e-12)
    assert mu == pytest.approx(0.0058869, abs=5e-7)  # rounded reference value
    assert delta == 12
    assert theorem2_params(10_000, 8, 16)[1] == 24
    assert theorem2_params(40_000, 4, 16)[0] == pytest.approx(mu / 2, rel=1e-12)
    with pytest.raises(InputError):
        theorem2_params(100, 4, 1)
    with pytest.warns(RuntimeWarning):
        theorem2_params(10, 4, 16)


def test_bandit_round_validation():
    BanditRound("s", [0, 1], [0.5, 0.5], 0.3)
    for bad in ([1.5, 0], [-0.1, 0]):
        with pytest.raises(InputError):
            BanditRound("s", bad, [0, 0], 0.3)
    with pytest.raises(InputError):
        BanditRound("s", [0, 1], [0, 0], 1.2)
    with pytest.raises(InputError):
        BanditRound("s", [0, 1], [0, 0, 0], 0.2)


def test_feedback_view_hides_other_arms():
    view = BanditFeedback(BanditRound("s", [0.1, 0.9], [0.2, 0.8], 0.5), 1)
    assert view.cost() == 0.9 and view.risk(1) == 0.8
    with pytest.raises(PermissionError):
        view.cost(0)
    with pytest.raises(PermissionError):
        view.risk(0)


def test_bandit_feedback_purity():
    """Changing unobserved entries never changes the transition."""
    rng = np.random.default_rng(5)
    advice, _, c, r = random_instance(rng, K=4, N=5)
    state = Exp4rState.initial(5, 0.2, 3.0)
    s1, rec1 = exp4r_round(state, advice, BanditRound(0, c, r, 0.4), np.random.default_rng(11))
    c2, r2 = rng.random(4), rng.random(4)
    c2[rec1.action], r2[rec1.action] = c[rec1.action], r[rec1.action]
    s2, rec2 = exp4r_round(state, advice, BanditRound(0, c2, r2, 0.4), np.random.default_rng(11))
    assert rec1.action == rec2.action
    np.testing.assert_array_equal(s1.log_w, s2.log_w)
    assert s1.lam == s2.lam


def test_single_expert_keeps_weight_and_plays_its_policy():
    table = PolicyTable(np.array([[[0.2, 0.8]]]))
    est = EXP4R(mu=0.1, delta=1.0, random_state=0)
    rounds = [BanditRound(0, [0.3, 0.7], [0.1, 0.9], 0.5)] * 50
    est.fit(rounds, table)
    np.testing.assert_allclose(est.weights_, [1.0])
    assert all(np.allclose(r.p, [0.2, 0.8]) for r in est.records_)


def test_beta_one_keeps_lambda_zero():
    rng = np.random.default_rng(2)
    table = PolicyTable(rng.dirichlet(np.ones(3), size=(1, 4)))
    rounds = [BanditRound(0, rng.random(3), rng.random(3), 1.0) for _ in range(1000)]
    est = EXP4R(horizon=1000, random_state=1).fit(rounds, table)
    assert all(r.lam == 0.0 for r in est.records_)
    assert est.lambda_ == 0.0


def test_seeded_runs_are_reproducible():
    rng = np.random.default_rng(3)
    table = PolicyTable(rng.dirichlet(np.ones(3), size=(2, 4)), contexts=["a", "b"])
    rounds = [BanditRound(["a", "b"][t % 2], rng.random(3), rng.random(3), 0.5) for t in range(300)]
    a = EXP4R(horizon=300, random_state=9).fit(rounds, table)
    b = EXP4R(horizon=300, random_state=9).fit(rounds, table)
    assert [r.action for r in a.records_] == [r.action for r in b.records_]
    np.testing.assert_array_equal(a.state_.log_w, b.state_.log_w)


def test_estimator_matches_functional_round():
    rng = np.random.default_rng(4)
    advice, _, c, r = random_instance(rng, K=3, N=4)
    est = EXP4R(mu=0.3, delta=2.0, random_state=np.random.default_rng(8))
    state = Exp4rState.initial(4, 0.3, 2.0)
    gen = np.random.default_rng(8)
    for _ in range(20):
        rnd = BanditRound(0, c, r, 0.3)
        rec = est.step(advice, rnd)
        state, rec2 = exp4r_round(state, advice, rnd, gen)
        assert rec.action == rec2.action
    np.testing.assert_allclose(est.weights_, state.weights, atol=1e-15)


def test_policy_table():
    t = PolicyTable(np.full((2, 3, 2), 0.5), contexts=["x", "y"])
    assert t.n_experts == 3 and t.n_arms == 2
    np.testing.assert_array_equal(t.advice("y"), np.full((3, 2), 0.5))
    with pytest.raises(InputError):
        t.advice("z")
    with pytest.raises(InputError):
        PolicyTable(np.full((1, 2, 2), 0.7))
    table, added = PolicyTable(np.array([[[1.0, 0.0]]])).with_uniform()
    assert added and table.n_experts == 2
    _, added = table.with_uniform()
    assert not added


def test_check_advice_rejects_non_simplex_rows():
    with pytest.raises(InputError):
        check_advice([[0.5, 0.6]])
    with pytest.raises(InputError):
        check_advice([0.5, 0.5])


def test_estimator_get_params():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = EXP4R(horizon=10, random_state=0)
    assert est.get_params() == {"horizon": 10, "mu": None, "delta": None, "random_state": 0}
