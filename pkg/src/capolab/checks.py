"""Closed-form versus direct-recomputation checks behind ``capolab oracle-suite``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import exact
from .capo import (Batch, CoordinateBatch, batch_capo_weights, capo_update,
                   fixed_lr_one_step_improvement, next_batch, predicted_weight_delta)
from .mdp import make_random_mdp
from .ncapo import MlpPolicy, kl_loss_and_grad, ncapo_target
from .policy import CapoStep, FixedStep, SoftmaxTable, softmax
from .rng import make_rng

NO_CLIP = CapoStep(clip=math.inf)


@dataclass
class CheckResult:
    name: str
    worst: float
    tol: float
    n: int

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tol)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: worst={self.worst:.3e} tol={self.tol:.0e} n={self.n}"


def _random_row(rng, K):
    return rng.normal(0.0, 1.5, K)


def _random_fixture(rng):
    S, A = int(rng.integers(2, 6)), int(rng.integers(2, 5))
    mdp = make_random_mdp(S, A, 0.9, int(rng.integers(0, 2**31)))
    table = SoftmaxTable(rng.normal(0.0, 1.0, (S, A)))
    return mdp, table


def check_weight_delta(n=1000, seed=0) -> CheckResult:
    rng = make_rng(seed, "policy")
    worst = 0.0
    for _ in range(n):
        K = int(rng.integers(2, 6))
        tab = SoftmaxTable(_random_row(rng, K)[None, :])
        a, sign = int(rng.integers(K)), int(rng.choice([-1, 1]))
        pi = tab.probs()[0]
        new = capo_update(tab, CoordinateBatch([(0, a)]), [sign], NO_CLIP).probs()[0]
        worst = max(worst, np.max(np.abs(new - (pi + predicted_weight_delta(pi, a, sign)))))
    return CheckResult("weight delta", worst, 1e-12, n)


def check_batch_weights(n=1000, seed=1) -> CheckResult:
    rng = make_rng(seed, "policy")
    worst = 0.0
    for _ in range(n):
        K = int(rng.integers(2, 6))
        tab = SoftmaxTable(_random_row(rng, K)[None, :])
        signs = rng.integers(-1, 2, K)
        pi = tab.probs()[0]
        new = capo_update(tab, CoordinateBatch([(0, a) for a in range(K)]), signs, NO_CLIP)
        worst = max(worst, np.max(np.abs(new.probs()[0] - batch_capo_weights(pi, signs))))
    return CheckResult("batch weights", worst, 1e-12, n)


def check_fixed_lr_improvement(n=1000, seed=2) -> CheckResult:
    rng = make_rng(seed, "policy")
    worst = 0.0
    for _ in range(n):
        mdp, tab = _random_fixture(rng)
        sm, am = int(rng.integers(mdp.n_states)), int(rng.integers(mdp.n_actions))
        s = int(rng.integers(mdp.n_states))
        eta = float(rng.uniform(0.05, 3.0))
        old = exact.policy_eval(mdp, tab.probs())
        adv = old.adv[sm, am]
        new_tab = capo_update(tab, CoordinateBatch([(sm, am)]), [int(np.sign(adv))],
                              FixedStep(eta))
        new = exact.policy_eval(mdp, new_tab.probs())
        d = exact.state_visitation(mdp, new_tab.probs(), s)[sm]
        pred = fixed_lr_one_step_improvement(d, tab.probs()[sm, am], adv, eta, mdp.gamma)
        worst = max(worst, abs((new.v[s] - old.v[s]) - pred))
    return CheckResult("fixed-step improvement", worst, 1e-9, n)


def check_improvement_identity(n=1000, seed=3) -> CheckResult:
    """Single-coordinate improvement equals d/(1-gamma) * W/(1-p) * |A|,
    and dominates (d/2)A^2 for A > 0 and d*p*A^2 for A < 0."""
    rng = make_rng(seed, "policy")
    worst = 0.0
    for _ in range(n):
        mdp, tab = _random_fixture(rng)
        sm, am = int(rng.integers(mdp.n_states)), int(rng.integers(mdp.n_actions))
        s = int(rng.integers(mdp.n_states))
        old = exact.policy_eval(mdp, tab.probs())
        adv = old.adv[sm, am]
        sign = int(np.sign(adv))
        if sign == 0:
            continue
        pi_row = tab.probs()[sm]
        p = pi_row[am]
        new_tab = capo_update(tab, CoordinateBatch([(sm, am)]), [sign], NO_CLIP)
        gain = exact.policy_eval(mdp, new_tab.probs()).v[s] - old.v[s]
        d = exact.state_visitation(mdp, new_tab.probs(), s)[sm]
        W = abs(predicted_weight_delta(pi_row, am, sign)[am])
        pred = d / (1 - mdp.gamma) * W / (1 - p) * abs(adv)
        worst = max(worst, abs(gain - pred))
        floor = d / 2 * adv**2 if sign > 0 else d * p * adv**2
        if gain < floor - 1e-10:
            worst = math.inf
    return CheckResult("improvement identity", worst, 1e-9, n)


def check_exact_identities(n=100, seed=4) -> CheckResult:
    rng = make_rng(seed, "policy")
    worst = 0.0
    for _ in range(n):
        mdp, tab = _random_fixture(rng)
        pi = tab.probs()
        pi2 = softmax(rng.normal(0.0, 1.0, pi.shape), axis=1)
        prof = exact.policy_eval(mdp, pi)
        mu = mdp.start_dist
        direct = exact.policy_eval(mdp, pi2).v_at(mu) - prof.v_at(mu)
        worst = max(worst, abs(direct - exact.perf_difference(mdp, pi2, pi)))
        worst = max(worst, np.max(np.abs(np.sum(pi * prof.adv, axis=1))))
        excess = np.abs(prof.adv) - (1 - pi) / (1 - mdp.gamma)
        worst = max(worst, float(np.max(excess)) if np.max(excess) > 1e-10 else 0.0)
        d = exact.visitation(mdp, pi, mu)
        short = (1 - mdp.gamma) * mu - d
        worst = max(worst, float(np.max(short)) if np.max(short) > 1e-10 else 0.0)
    return CheckResult("exact identities", worst, 1e-9, n)


def check_kl_gradient(n=20, seed=5) -> CheckResult:
    rng = make_rng(seed, "init")
    worst = 0.0
    for _ in range(n):
        S, A, H = int(rng.integers(2, 5)), int(rng.integers(2, 4)), int(rng.integers(3, 8))
        net = MlpPolicy.init(S, A, H, rng)
        states = np.arange(S)
        pairs = [(s, int(rng.integers(A))) for s in range(S)]
        signs = rng.choice([-1, 1], size=S)
        target = ncapo_target(net.logits(states), pairs, signs)
        _, grads = kl_loss_and_grad(net, states, target)
        num, ana = [], []
        for name, arr in net.params().items():
            for idx in np.ndindex(arr.shape):
                keep = arr[idx]
                arr[idx] = keep + 1e-5
                up = kl_loss_and_grad(net, states, target)[0]
                arr[idx] = keep - 1e-5
                down = kl_loss_and_grad(net, states, target)[0]
                arr[idx] = keep
                num.append((up - down) / 2e-5)
                ana.append(grads[name][idx])
        num, ana = np.array(num), np.array(ana)
        rel = np.linalg.norm(num - ana) / max(np.linalg.norm(num) + np.linalg.norm(ana), 1e-12)
        worst = max(worst, rel)
    return CheckResult("KL gradient", worst, 1e-5, n)


def check_batch_generator(seed=6) -> CheckResult:
    rng = make_rng(seed, "env")
    mdp = make_random_mdp(3, 2, 0.9, seed)
    b = next_batch(Batch(), 0, SoftmaxTable.uniform(3, 2), mdp, rng)
    return CheckResult("batch generator size", abs(len(b) - 6), 0, 1)


ALL_CHECKS = (check_weight_delta, check_batch_weights, check_fixed_lr_improvement,
              check_improvement_identity, check_exact_identities, check_kl_gradient,
              check_batch_generator)


def run_all() -> list[CheckResult]:
    return [c() for c in ALL_CHECKS]
