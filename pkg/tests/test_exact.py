import numpy as np
import pytest

from _oracles import iterative_values, monte_carlo_value, series_visitation, value_iteration
from capolab import exact, make_bandit, make_chain, make_random_mdp
from capolab.policy import softmax
from capolab.rng import make_rng


def rand_policy(S, A, seed):
    return softmax(make_rng(seed, "policy").normal(0, 1.5, (S, A)), axis=1)


def test_bandit_profile():
    m = make_bandit([10, 9.9, 9.9, 0])
    prof = exact.policy_eval(m, np.full((2, 4), 0.25))
    assert prof.v[0] == pytest.approx(7.45, abs=1e-12)
    assert np.allclose(prof.adv[0], [2.55, 2.45, 2.45, -7.45], atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_policy_eval_matches_iteration(seed):
    m = make_random_mdp(4, 3, 0.9, seed)
    pi = rand_policy(4, 3, seed)
    prof = exact.policy_eval(m, pi)
    v, q = iterative_values(m.transition, m.reward, m.gamma, pi)
    assert np.allclose(prof.v, v, atol=1e-10) and np.allclose(prof.q, q, atol=1e-10)
    assert np.allclose(np.sum(pi * prof.adv, axis=1), 0, atol=1e-10)
    assert np.allclose(prof.adv, prof.q - prof.v[:, None], atol=0)


def test_policy_eval_monte_carlo():
    m = make_random_mdp(3, 2, 0.9, 1)
    pi = np.full((3, 2), 0.5)
    v = exact.policy_eval(m, pi).v
    rng = make_rng(1, "rollout")
    for s in range(3):
        mean, se = monte_carlo_value(m.transition, m.reward, m.gamma, pi, s, 100_000, 200, rng)
        assert abs(mean - v[s]) < 3 * se + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_visitation(seed):
    m = make_random_mdp(5, 2, 0.9, seed)
    pi = rand_policy(5, 2, seed)
    d = exact.visitation(m, pi)
    assert d.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(d, series_visitation(m.transition, m.gamma, pi, m.start_dist), atol=1e-12)
    assert np.all(d >= (1 - m.gamma) * m.start_dist - 1e-10)


def test_visitation_bandit_and_terminal():
    m = make_bandit([1, 2, 3], gamma=0.8)
    pi = np.full((2, 3), 1 / 3)
    assert np.allclose(exact.visitation(m, pi), [0.2, 0.8], atol=1e-14)
    assert np.allclose(exact.visitation(m, pi, np.array([0.0, 1.0])), [0, 1], atol=1e-14)


def test_optimal_values_chain_and_bandit():
    v, greedy = exact.optimal_values(make_chain(10), 1e-10)
    assert v[1] == pytest.approx(0.99 ** 8 * 100, abs=1e-9)
    assert greedy[1].tolist() == [0.0, 1.0]
    vb, _ = exact.optimal_values(make_bandit([0.3, 2.0, 1.0]), 1e-12)
    assert vb[0] == pytest.approx(2.0, abs=1e-11)


def test_optimal_values_tie_break_lowest_index():
    _, greedy = exact.optimal_values(make_bandit([1.0, 1.0]), 1e-12)
    assert greedy[0].tolist() == [1.0, 0.0]


@pytest.mark.parametrize("seed", range(5))
def test_optimal_values_random(seed):
    m = make_random_mdp(4, 3, 0.9, seed)
    tol = 1e-10
    v, greedy = exact.optimal_values(m, tol)
    ref = value_iteration(m.transition, m.reward, m.gamma)
    assert np.max(np.abs(v - ref)) < tol
    assert np.allclose(exact.policy_eval(m, greedy).v, v, atol=2 * tol)
    for k in range(5):
        assert np.all(exact.policy_eval(m, rand_policy(4, 3, 100 + k)).v <= v + tol)


def test_optimal_values_bad_tol():
    with pytest.raises(ValueError):
        exact.optimal_values(make_bandit([1, 2]), 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_perf_difference(seed):
    m = make_random_mdp(4, 3, 0.9, seed)
    p1, p2 = rand_policy(4, 3, seed), rand_policy(4, 3, seed + 50)
    v1, _ = iterative_values(m.transition, m.reward, m.gamma, p1)
    v2, _ = iterative_values(m.transition, m.reward, m.gamma, p2)
    direct = m.start_dist @ (v2 - v1)
    assert exact.perf_difference(m, p2, p1) == pytest.approx(direct, abs=1e-9)
    assert exact.perf_difference(m, p1, p1) == pytest.approx(0.0, abs=1e-12)


def test_perf_difference_bandit():
    m = make_bandit([1.0, -2.0, 0.5])
    p_old = np.array([[0.2, 0.5, 0.3], [1 / 3] * 3])
    p_new = np.array([[0.6, 0.1, 0.3], [1 / 3] * 3])
    r = np.array([1.0, -2.0, 0.5])
    assert exact.perf_difference(m, p_new, p_old) == pytest.approx(
        p_new[0] @ r - p_old[0] @ r, abs=1e-12)


def test_batched_values_match_single():
    m = make_random_mdp(3, 4, 0.9, 7)
    pols = np.stack([rand_policy(3, 4, k) for k in range(6)])
    v, q = exact.batched_values(m, pols)
    for k in range(6):
        prof = exact.policy_eval(m, pols[k])
        assert np.allclose(v[k], prof.v, atol=1e-12) and np.allclose(q[k], prof.q, atol=1e-12)
