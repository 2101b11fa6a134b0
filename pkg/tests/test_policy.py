import math

import numpy as np
import pytest

from _oracles import softmax_py
from capolab.errors import ConfigError, ContractError, DomainError, InvalidParameterError
from capolab.policy import (RECENTER_EVERY, CapoStep, FixedStep, OnCapoConfig, OnCapoStep,
                            SoftmaxTable, action_probs, capo_alpha, oncapo_alpha)


def test_action_probs_examples():
    t = SoftmaxTable(np.array([[0.0, 0.0], [5.0, 5.0]]))
    assert np.allclose(action_probs(t, 0), [0.5, 0.5], atol=1e-15)
    p = action_probs(SoftmaxTable(np.array([[0.0, 3.0, 3.0, 0.0]])), 0)
    assert np.allclose(p, [0.0237, 0.4762, 0.4762, 0.0237], atol=1e-4)
    assert np.allclose(action_probs(SoftmaxTable(np.full((1, 3), 7.3)), 0), 1 / 3, atol=1e-15)


def test_action_probs_stable_and_positive():
    t = SoftmaxTable(np.array([[1000.0, 0.0, -1000.0]]))
    p = action_probs(t, 0)
    assert p.sum() == pytest.approx(1.0) and np.isfinite(p).all()
    assert np.allclose(action_probs(SoftmaxTable(np.array([[0.1, 0.7, -0.4]])), 0),
                       softmax_py([0.1, 0.7, -0.4]), atol=1e-15)


def test_non_finite_theta():
    t = SoftmaxTable(np.array([[0.0, np.inf]]))
    with pytest.raises(InvalidParameterError):
        action_probs(t, 0)
    with pytest.raises(InvalidParameterError):
        t.probs()


def test_recenter_preserves_probs():
    t = SoftmaxTable(np.array([[1.0, 4.0, -2.0], [10.0, 10.5, 30.0]]))
    before = t.probs()
    t.recenter()
    assert np.allclose(t.theta.mean(axis=1), 0, atol=1e-12)
    assert np.allclose(t.probs(), before, atol=1e-12)


def test_count_update_recenters_on_schedule():
    t = SoftmaxTable(np.array([[3.0, 5.0]]))
    t.count_update(RECENTER_EVERY - 1)
    assert t.theta.tolist() == [[3.0, 5.0]]
    t.count_update(1)
    assert t.theta.tolist() == [[-1.0, 1.0]]


def test_capo_alpha_examples():
    assert capo_alpha(0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert capo_alpha(math.exp(-60), 50) == 50
    assert 0 < capo_alpha(1 - 1e-12) < 1e-11


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.3])
def test_capo_alpha_domain(bad):
    with pytest.raises(DomainError):
        capo_alpha(bad)


def test_capo_alpha_clip_must_be_positive():
    with pytest.raises(DomainError):
        capo_alpha(0.5, clip=0)


def test_oncapo_alpha_branches():
    cfg = OnCapoConfig.create(1, 4, 0.2, 0.25)
    assert oncapo_alpha(0.1, -1, cfg, 0, 0) == pytest.approx(math.log(10), abs=1e-12)
    assert oncapo_alpha(0.1, 0, cfg, 0, 0) == pytest.approx(math.log(10), abs=1e-12)
    assert oncapo_alpha(0.1, 1, cfg, 0, 0) == pytest.approx(math.log(2.5), abs=1e-12)
    cfg.visit_counts[0, 1] = 4
    assert oncapo_alpha(0.5, 1, cfg, 0, 1) == pytest.approx(0.25 * math.log(1.25), abs=1e-12)


def test_oncapo_alpha_needs_count():
    cfg = OnCapoConfig.create(1, 4, 0.2, 0.25)
    with pytest.raises(ContractError):
        oncapo_alpha(0.5, 1, cfg, 0, 0)


@pytest.mark.parametrize("beta,zeta", [(0.21, 0.25), (0.0, 0.25), (0.2, 0.26), (0.2, 0.0)])
def test_oncapo_config_ranges(beta, zeta):
    with pytest.raises(ConfigError):
        OnCapoConfig.create(1, 4, beta, zeta)


def test_beta_branch_restoration():
    beta = 0.2
    for p_old in (0.01, 0.05, 0.15, 0.199):
        rest = [(1 - p_old) * w for w in (0.5, 0.3, 0.2)]
        theta = np.log([p_old] + rest)
        cfg = OnCapoConfig.create(1, 4, beta, 0.25)
        step = OnCapoStep(cfg)
        step.register([(0, 0)])
        logp = theta - np.log(np.exp(theta).sum())
        theta[0] += step.alpha(logp, 0, 0, 1)
        p_new = softmax_py(list(theta))[0]
        k = beta / (1 - beta)
        assert p_new == pytest.approx(k / (k + 1 - p_old), abs=1e-12)
        assert p_new > beta


def test_unclipped_positive_step_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(50):
        theta = rng.normal(0, 2, 4)
        a = int(rng.integers(4))
        logp = theta - np.log(np.exp(theta).sum())
        theta2 = theta.copy()
        theta2[a] += CapoStep(math.inf).alpha(logp, 0, a, 1)
        assert softmax_py(list(theta2))[a] == pytest.approx(1 / (2 - math.exp(logp[a])),
                                                           abs=1e-12)


def test_step_rules():
    logp = np.log([0.25, 0.75])
    assert FixedStep(0.3).alpha(logp, 0, 0, 1) == 0.3
    assert CapoStep().alpha(logp, 0, 0, -1) == pytest.approx(math.log(4))
    assert CapoStep(clip=1.0).alpha(logp, 0, 0, -1) == 1.0
