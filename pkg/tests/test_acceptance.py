"""Acceptance criteria 1-13, one verdict line per criterion.

Run under pytest (``pytest tests/test_acceptance.py -s``) or directly as a
script (``python3 tests/test_acceptance.py``). Criterion 10 and the training
half of criterion 12 are soft: a miss writes the learning curves under
``$CAPOLAB_ACCEPT_OUT`` (default ``out/acceptance``) and warns instead of
failing.
"""

from __future__ import annotations

import math
import os
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from _oracles import iterative_values, value_iteration  # noqa: E402
from conftest import random_fixtures  # noqa: E402

from capolab import checks, make_chain, make_random_mdp  # noqa: E402
from capolab.baselines import (BanditParams, StudyThresholds, run_bandit_study,  # noqa: E402
                               train_offpac)
from capolab.capo import (Batch, BehaviorEpsGreedy, Cyclic, rate_bound,  # noqa: E402
                          run_randomized_many, train)
from capolab.critic import QEstimate, ReplayBuffer, fit_q  # noqa: E402
from capolab.csvio import write_csv  # noqa: E402
from capolab.mdp import sample_rollout, sample_start  # noqa: E402
from capolab.ncapo import NcapoConfig, train_ncapo  # noqa: E402
from capolab.policy import CapoStep, softmax  # noqa: E402
from capolab.rng import make_rng  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
OUT = Path(os.environ.get("CAPOLAB_ACCEPT_OUT", ROOT / "out" / "acceptance"))


@dataclass
class Verdict:
    number: int
    title: str
    passed: bool
    detail: str
    soft: bool = False
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else ("SOFT-FAIL" if self.soft else "FAIL")
        return f"[{tag}] criterion {self.number:2d} {self.title}: {self.detail} ({self.seconds:.1f}s)"


def rate_fixtures():
    return [make_random_mdp(3, 2, 0.9, seed) for seed in range(10)]


def uniform(mdp):
    return np.full(mdp.n_states, 1.0 / mdp.n_states)


# --- criteria ----------------------------------------------------------------

def crit_01() -> Verdict:
    worst = math.inf
    for mdp in random_fixtures(50):
        h = train(mdp, Cyclic(), CapoStep(math.inf), iters=200).history
        worst = min(worst, float(np.min(np.diff(h.v, axis=0))))
    return Verdict(1, "strict improvement", worst >= -1e-10,
                   f"min per-state V change = {worst:.3e} over 50 MDPs x 200 iters (tol -1e-10)")


def crit_02() -> Verdict:
    res = [checks.check_weight_delta(), checks.check_batch_weights(),
           checks.check_fixed_lr_improvement()]
    detail = "; ".join(f"{r.name} worst={r.worst:.2e} tol={r.tol:.0e} n={r.n}" for r in res)
    return Verdict(2, "closed-form oracles", all(r.passed for r in res), detail)


def _rate_verdict(number, kind, iters):
    worst = 0.0
    for mdp in rate_fixtures():
        mu = uniform(mdp)
        gen = Cyclic() if kind == "cyclic" else Batch()
        h = train(mdp, gen, CapoStep(50.0), iters=iters, start_dist=mu).history
        bound = rate_bound(kind, mdp, mu, h.m + 1)
        worst = max(worst, float(np.max(h.gap / bound)))
    return Verdict(number, f"{kind} rate bound", worst <= 1.0,
                   f"max gap/bound = {worst:.3e} over 10 MDPs, m <= {iters}")


def crit_03() -> Verdict:
    return _rate_verdict(3, "cyclic", 5000)


def crit_04() -> Verdict:
    return _rate_verdict(4, "batch", 5000)


def crit_05() -> Verdict:
    worst = 0.0
    for mdp in rate_fixtures():
        mu = uniform(mdp)
        gaps = run_randomized_many(mdp, range(200), 2000, start_dist=mu)
        bound = rate_bound("randomized", mdp, mu, np.arange(1, 2002))
        worst = max(worst, float(np.max(gaps.mean(axis=0) / (1.2 * bound))))
    return Verdict(5, "randomized rate bound", worst <= 1.0,
                   f"max mean-gap/(1.2 bound) = {worst:.3e} over 10 MDPs x 200 seeds, m <= 2000")


def crit_06() -> Verdict:
    worst, longest = 0.0, 0
    for i, mdp in enumerate(random_fixtures(50)):
        res = train(mdp, BehaviorEpsGreedy(eps_end=0.1), CapoStep(50.0), iters=100_000,
                    rng=make_rng(i, "coords"), stop_gap=1e-6)
        worst = max(worst, float(res.history.gap[-1]))
        longest = max(longest, int(res.history.m[-1]))
    return Verdict(6, "asymptotic convergence", worst < 1e-6,
                   f"worst final gap = {worst:.3e} (tol 1e-6), slowest MDP needed {longest} iters")


def crit_07() -> Verdict:
    study = run_bandit_study("oncapo_fixed", [1.0, 0.99, -1.0], [0.0, 0.0, 0.0], range(1000),
                             10_000, StudyThresholds(0.99, 0.99), BanditParams(eta=1.0))
    frac = study.fraction("stuck")
    return Verdict(7, "fixed-step on-policy CAPO gets stuck", frac > 0,
                   f"stuck fraction = {frac:.3f} (1000 seeds, 1e4 iters; must be > 0)")


def crit_08() -> Verdict:
    r, theta0 = [10.0, 9.9, 9.9, 0.0], [0.0, 3.0, 3.0, 0.0]
    var = run_bandit_study("oncapo", r, theta0, range(100), 10_000,
                           params=BanditParams(beta=0.2, zeta=0.25))
    reach = np.mean([o.max_pi_star > 0.99 for o in var.outcomes])
    fixed = run_bandit_study("oncapo_fixed", r, theta0, range(100), 10_000,
                             params=BanditParams(eta=0.1))
    fail = np.mean([o.max_pi_star <= 0.5 for o in fixed.outcomes])
    return Verdict(8, "variable step escapes", reach == 1.0 and fail >= 0.95,
                   f"variable-step reach 0.99: {reach:.0%} (need 100%); "
                   f"fixed-step never above 0.5: {fail:.0%} (need >= 95%)")


def crit_09() -> Verdict:
    r = [1.0, 0.9, 0.1]
    out = {}
    for alg in ("spg", "is_spg"):
        st = run_bandit_study(alg, r, [0.0, 0.0, 0.0], range(1000), 10_000,
                              params=BanditParams(eta=0.5))
        out[alg] = float(np.mean([o.final_pi_star < 0.01 for o in st.outcomes]))
    return Verdict(9, "stochastic PG stuck", out["spg"] > 0,
                   f"SPG fraction with pi(a*) < 0.01 = {out['spg']:.3f} (must be > 0); "
                   f"IS-SPG fraction = {out['is_spg']:.3f} (reported)")


def crit_10() -> Verdict:
    mdp = make_chain(10)
    v_star = value_iteration(mdp.transition, mdp.reward, mdp.gamma)[1]
    cyc = train(mdp, Cyclic(), CapoStep(50.0), iters=1000, start_dist=mdp.start_dist).history
    bat = train(mdp, Batch(), CapoStep(50.0), iters=1000, start_dist=mdp.start_dist).history
    off = train_offpac(mdp, np.full((mdp.n_states, 2), 0.5), 0.1, 1000, make_rng(0, "rollout"))
    ratios = [h.v[-1, 1] / v_star for h in (cyc, bat, off)]
    ok = ratios[0] >= 0.99 and ratios[1] >= 0.99 and ratios[2] < 0.5
    OUT.mkdir(parents=True, exist_ok=True)
    write_csv(OUT / "chain_compare.csv", ["m", "cyclic_v_s1", "batch_v_s1", "offpac_v_s1"],
              ([m, cyc.v[m, 1], bat.v[m, 1], off.v[m, 1]] for m in range(1001)))
    return Verdict(10, "chain exploration", ok,
                   f"V(S1)/V*: cyclic {ratios[0]:.4f}, batch {ratios[1]:.4f} (need >= 0.99); "
                   f"off-pac {ratios[2]:.4f} (need < 0.5)", soft=True)


def crit_11() -> Verdict:
    seed = 1
    mdp = make_random_mdp(3, 2, 0.9, seed)
    pi = softmax(make_rng(seed, "policy").normal(size=(3, 2)), axis=1)
    rng = make_rng(seed, "rollout")
    buf = ReplayBuffer(500)
    b = np.full((3, 2), 0.5)
    for _ in range(500):
        buf.add(sample_rollout(mdp, b, sample_start(mdp, rng), 20, rng))
    q = fit_q(buf, QEstimate.zeros(3, 2, kappa=0.1, lam=1.0), pi, mdp.gamma, 200)
    _, q_true = iterative_values(mdp.transition, mdp.reward, mdp.gamma, pi)
    err = float(np.max(np.abs(q.q - q_true)))
    return Verdict(11, "retrace critic", err < 0.05, f"sup-norm error = {err:.4f} (tol 0.05)")


def crit_12() -> tuple[Verdict, Verdict]:
    t0 = time.perf_counter()
    g = checks.check_kl_gradient()
    grad = Verdict(12, "KL gradient check", g.passed,
                   f"worst relative error = {g.worst:.2e} over {g.n} instances (tol 1e-5)",
                   seconds=time.perf_counter() - t0)
    t0 = time.perf_counter()
    mdp = make_chain(10)
    v_star = value_iteration(mdp.transition, mdp.reward, mdp.gamma)[1]
    ratios = []
    OUT.mkdir(parents=True, exist_ok=True)
    for seed in (0, 1, 2):
        hist = train_ncapo(mdp, "exact_adv", NcapoConfig(iters=1000), seed).history
        ratios.append(hist.v_mu[-1] / v_star)
        write_csv(OUT / f"ncapo_chain_{seed}.csv", hist.HEADER, hist.rows())
    ok = all(r >= 0.95 for r in ratios)
    train_v = Verdict(12, "network CAPO on chain", ok,
                      "V(S1)/V* per seed = " + ", ".join(f"{r:.4f}" for r in ratios)
                      + " (need >= 0.95 for 3 of 3)", soft=True,
                      seconds=time.perf_counter() - t0)
    return grad, train_v


def crit_13() -> Verdict:
    r = checks.check_exact_identities()
    return Verdict(13, "exact-solver identities", r.passed,
                   f"worst violation = {r.worst:.2e} over {r.n} (MDP, policy) pairs (tol 1e-9)")


CRITERIA = (crit_01, crit_02, crit_03, crit_04, crit_05, crit_06, crit_07, crit_08, crit_09,
            crit_10, crit_11, crit_12, crit_13)


def evaluate(fn) -> list[Verdict]:
    t0 = time.perf_counter()
    got = fn()
    verdicts = list(got) if isinstance(got, tuple) else [got]
    if len(verdicts) == 1:
        verdicts[0].seconds = time.perf_counter() - t0
    return verdicts


@pytest.mark.parametrize("fn", CRITERIA, ids=lambda f: f.__name__)
def test_acceptance(fn, capsys):
    verdicts = evaluate(fn)
    with capsys.disabled():
        for v in verdicts:
            print("\n" + v.line())
    for v in verdicts:
        if v.soft and not v.passed:
            warnings.warn(f"soft criterion {v.number} missed; curves in {OUT}: {v.detail}")
        else:
            assert v.passed, v.line()


def main() -> int:
    hard_fail = 0
    for fn in CRITERIA:
        for v in evaluate(fn):
            print(v.line(), flush=True)
            hard_fail += (not v.passed) and not v.soft
    return 1 if hard_fail else 0


if __name__ == "__main__":
    sys.exit(main())
