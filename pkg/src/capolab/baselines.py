"""Comparison algorithms: on-policy CAPO, stochastic policy gradient, Off-PAC.

The single-step functions take an explicit generator and draw exactly one
uniform per action sample plus one per state sample. On-policy CAPO skips the
state draw when only one non-terminal state exists; Off-PAC always draws its
state from the behaviour's discounted visitation. :func:`run_bandit_study` vectorises the same updates
across seeds while drawing from the same per-seed streams, so any row of a
study can be replayed with the scalar API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .capo import History
from .errors import ConfigError, ContractError
from .mdp import TabularMdp, make_bandit
from .policy import (RECENTER_EVERY, OnCapoConfig, SoftmaxTable, _oncapo_alpha_logp,
                     log_softmax, softmax)
from .rng import make_rng

ALGORITHMS = ("oncapo", "oncapo_fixed", "spg", "is_spg", "offpac")


def _draw(probs: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(np.cumsum(probs), u, side="right")), len(probs) - 1)


def _onpolicy_state(mdp: TabularMdp, pi: np.ndarray, rng, start_dist=None) -> int:
    """Draw s from the discounted visitation restricted to non-terminal states."""
    live = np.flatnonzero(~mdp.terminal_mask)
    if live.size == 1:
        return int(live[0])
    d = exact.visitation(mdp, pi, start_dist)[live]
    return int(live[_draw(d / d.sum(), rng.random())])


def _visitation_state(mdp: TabularMdp, pi: np.ndarray, rng, start_dist=None) -> int:
    """Draw s from the full discounted visitation, absorbing states included."""
    return _draw(exact.visitation(mdp, pi, start_dist), rng.random())


# --- on-policy CAPO --------------------------------------------------------

def oncapo_step(table: SoftmaxTable, mdp: TabularMdp, cfg: OnCapoConfig,
                rng: np.random.Generator) -> SoftmaxTable:
    cfg.check()
    out = table.copy()
    pi = out.probs()
    s = _onpolicy_state(mdp, pi, rng)
    a = _draw(pi[s], rng.random())
    adv = exact.policy_eval(mdp, pi).adv[s, a]
    sgn = int(np.sign(adv))
    cfg.visit_counts[s, a] += 1
    if sgn:
        alpha = _oncapo_alpha_logp(out.log_probs()[s, a], sgn, cfg.beta, cfg.zeta,
                                   int(cfg.visit_counts[s, a]))
        out.theta[s, a] += alpha * sgn
    out.count_update(1)
    return out


def oncapo_fixed_step(table: SoftmaxTable, mdp: TabularMdp, eta: float,
                      rng: np.random.Generator) -> SoftmaxTable:
    if eta < 0:
        raise ConfigError("eta must be non-negative")
    out = table.copy()
    pi = out.probs()
    s = _onpolicy_state(mdp, pi, rng)
    a = _draw(pi[s], rng.random())
    adv = exact.policy_eval(mdp, pi).adv[s, a]
    out.theta[s, a] += eta * np.sign(adv)
    out.count_update(1)
    return out


# --- stochastic policy gradient on bandits ---------------------------------

def bandit_gradient(theta, rewards) -> np.ndarray:
    """Exact gradient of pi^T r with respect to the logits."""
    p = softmax(np.asarray(theta, dtype=float))
    r = np.asarray(rewards, dtype=float)
    return p * (r - p @ r)


def spg_step(theta, rewards, eta: float, rng: np.random.Generator) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(rewards, dtype=float)
    p = softmax(theta)
    a = _draw(p, rng.random())
    onehot = np.zeros_like(p)
    onehot[a] = 1.0
    return theta + eta * (onehot - p) * r[a]


def is_spg_step(theta, rewards, eta: float, rng: np.random.Generator) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(rewards, dtype=float)
    p = softmax(theta)
    a = _draw(p, rng.random())
    r_hat = np.zeros_like(p)
    r_hat[a] = r[a] / p[a]
    return theta + eta * p * (r_hat - p @ r_hat)


# --- Off-PAC ---------------------------------------------------------------

def offpac_step(table: SoftmaxTable, mdp: TabularMdp, behavior, q_exact, eta: float,
                rng: np.random.Generator) -> SoftmaxTable:
    """One tabular Off-PAC actor step with a supplied (exact) critic."""
    behavior = np.asarray(behavior, dtype=float)
    out = table.copy()
    s = _visitation_state(mdp, behavior, rng)
    a = _draw(behavior[s], rng.random())
    if behavior[s, a] <= 0:
        raise ContractError(f"behaviour assigns zero probability to ({s}, {a})")
    pi = out.probs()[s]
    omega = pi[a] / behavior[s, a]
    grad_log = -pi
    grad_log[a] += 1.0
    out.theta[s] += eta * omega * q_exact[s, a] * grad_log
    out.count_update(1)
    return out


def train_offpac(mdp: TabularMdp, behavior, eta: float, iters: int,
                 rng: np.random.Generator, start_dist=None) -> History:
    """Off-PAC with exact Q of the current policy; exact values logged each step."""
    mu = mdp.start_dist if start_dist is None else np.asarray(start_dist, dtype=float)
    v_star_mu = float(mu @ exact.optimal_state_values(mdp))
    table = SoftmaxTable.uniform(mdp.n_states, mdp.n_actions)
    vs = []
    prof = exact.policy_eval(mdp, table.probs())
    vs.append(prof.v)
    for _ in range(iters):
        table = offpac_step(table, mdp, behavior, prof.q, eta, rng)
        prof = exact.policy_eval(mdp, table.probs())
        vs.append(prof.v)
    v = np.array(vs)
    v_mu = v @ mu
    return History(np.arange(len(v)), v_mu, v_star_mu - v_mu, v)


# --- bandit studies --------------------------------------------------------

@dataclass
class StudyThresholds:
    stuck: float = 0.99
    converged: float = 0.99


@dataclass
class BanditParams:
    eta: float = 1.0
    beta: float = 0.2
    zeta: float = 0.25


@dataclass
class BanditRunOutcome:
    seed: int
    final_pi_star: float
    max_pi_star: float
    stuck: bool
    converged: bool
    first_hit: int
    iterations: int

    FIELDS = ("seed", "final_pi_star", "max_pi_star", "stuck", "converged",
              "first_hit", "iterations")

    def row(self):
        return [self.seed, self.final_pi_star, self.max_pi_star, int(self.stuck),
                int(self.converged), self.first_hit, self.iterations]


@dataclass
class BanditStudy:
    algorithm: str
    outcomes: list[BanditRunOutcome]
    mean_pi_star: np.ndarray
    std_pi_star: np.ndarray
    final_probs: np.ndarray = field(repr=False)

    def fraction(self, attr: str) -> float:
        return float(np.mean([getattr(o, attr) for o in self.outcomes]))

    def curve_rows(self):
        for i, (m, s) in enumerate(zip(self.mean_pi_star, self.std_pi_star)):
            yield [i, float(m), float(s)]


def bandit_scalar_step(algorithm: str, theta: np.ndarray, rewards, params: BanditParams,
                       rng, state) -> np.ndarray:
    """Reference single-seed step matching one row of :func:`run_bandit_study`.

    ``state`` carries the persistent pieces (bandit MDP, on-policy CAPO
    counters, the SoftmaxTable); it is created by :func:`bandit_scalar_state`.
    """
    if algorithm == "spg":
        return spg_step(theta, rewards, params.eta, rng)
    if algorithm == "is_spg":
        return is_spg_step(theta, rewards, params.eta, rng)
    mdp = state["mdp"]
    tab = state["table"]
    if algorithm == "oncapo":
        tab = oncapo_step(tab, mdp, state["cfg"], rng)
    elif algorithm == "oncapo_fixed":
        tab = oncapo_fixed_step(tab, mdp, params.eta, rng)
    elif algorithm == "offpac":
        q = exact.policy_eval(mdp, tab.probs()).q
        tab = offpac_step(tab, mdp, state["behavior"], q, params.eta, rng)
    else:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    state["table"] = tab
    return tab.theta[0].copy()


def bandit_scalar_state(rewards, theta0, params: BanditParams, gamma: float = 0.9):
    K = len(rewards)
    mdp = make_bandit(rewards, gamma)
    theta = np.zeros((2, K))
    theta[0] = theta0
    return {"mdp": mdp, "table": SoftmaxTable(theta),
            "cfg": OnCapoConfig.create(2, K, params.beta, params.zeta),
            "behavior": np.full((2, K), 1.0 / K)}


def _check_algorithm(algorithm: str, K: int, params: BanditParams):
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    if algorithm == "oncapo":
        OnCapoConfig.create(1, K, params.beta, params.zeta)
    elif params.eta < 0:
        raise ConfigError("eta must be non-negative")


def run_bandit_study(algorithm: str, rewards, theta0, seeds, n_iters: int,
                     thresholds: StudyThresholds | None = None,
                     params: BanditParams | None = None, chunk: int = 2048,
                     gamma: float = 0.9) -> BanditStudy:
    """Run ``algorithm`` on a bandit for every seed, vectorised across seeds."""
    thresholds = thresholds or StudyThresholds()
    params = params or BanditParams()
    r = np.asarray(rewards, dtype=float)
    K = r.size
    if K < 2:
        raise ConfigError("a bandit needs at least two arms")
    _check_algorithm(algorithm, K, params)
    seeds = [int(s) for s in seeds]
    n = len(seeds)
    if n < 1:
        raise ConfigError("need at least one seed")
    a_star = int(np.argmax(r))
    theta = np.tile(np.asarray(theta0, dtype=float), (n, 1))
    if theta.shape != (n, K):
        raise ConfigError("theta0 must have one entry per arm")
    gens = [make_rng(s, "policy") for s in seeds]
    counts = np.zeros((n, K), dtype=np.int64)
    rows = np.arange(n)
    onehot = np.eye(K)
    # tables recentre like SoftmaxTable; plain logit vectors (SPG) do not
    recenters = algorithm in ("oncapo", "oncapo_fixed", "offpac")
    log_b = math.log(params.beta / (1.0 - params.beta)) if algorithm == "oncapo" else 0.0
    behavior = np.full((2, K), 1.0 / K)
    behavior_cdf = np.cumsum(behavior[0])
    # Off-PAC first draws the state (start or sink) from the behaviour's visitation
    state_cdf = np.cumsum(exact.visitation(make_bandit(r, gamma), behavior))
    draws = 2 if algorithm == "offpac" else 1

    p = softmax(theta, axis=1)
    means = np.empty(n_iters + 1)
    stds = np.empty(n_iters + 1)
    means[0], stds[0] = p[:, a_star].mean(), p[:, a_star].std()
    max_star = p[:, a_star].copy()
    first_hit = np.where(p[:, a_star] > thresholds.converged, 0, -1)

    t = 0
    while t < n_iters:
        k = min(chunk, n_iters - t)
        U = np.stack([g.random(draws * k) for g in gens])
        for j in range(k):
            u = U[:, draws * j + draws - 1]
            if algorithm == "offpac":
                at_start = (state_cdf[None, :] <= U[:, draws * j, None]).sum(1) == 0
                a = np.minimum((behavior_cdf[None, :] <= u[:, None]).sum(1), K - 1)
            else:
                a = np.minimum((np.cumsum(p, axis=1) <= u[:, None]).sum(1), K - 1)
            ra = r[a]
            if algorithm == "spg":
                theta += params.eta * (onehot[a] - p) * ra[:, None]
            elif algorithm == "is_spg":
                r_hat = onehot[a] * (ra / p[rows, a])[:, None]
                theta += params.eta * p * (r_hat - (p * r_hat).sum(1, keepdims=True))
            elif algorithm == "offpac":
                omega = p[rows, a] / behavior[0, a]
                q_sa = np.where(at_start, ra, 0.0)
                theta += params.eta * (omega * q_sa)[:, None] * (onehot[a] - p)
            else:
                sgn = np.sign(ra - p @ r)
                if algorithm == "oncapo_fixed":
                    theta[rows, a] += params.eta * sgn
                else:
                    counts[rows, a] += 1
                    logp = log_softmax(theta, axis=1)[rows, a]
                    n_sa = counts[rows, a]
                    alpha = np.where(
                        sgn <= 0, -logp,
                        np.where(np.exp(logp) < params.beta, log_b - logp,
                                 params.zeta * np.log((n_sa + 1) / n_sa)))
                    theta[rows, a] += alpha * sgn
            t += 1
            if recenters and t % RECENTER_EVERY == 0:
                theta -= theta.mean(axis=1, keepdims=True)
            p = softmax(theta, axis=1)
            ps = p[:, a_star]
            means[t], stds[t] = ps.mean(), ps.std()
            np.maximum(max_star, ps, out=max_star)
            first_hit = np.where((first_hit < 0) & (ps > thresholds.converged), t, first_hit)

    sub = np.delete(p, a_star, axis=1)
    outcomes = []
    for i, sd in enumerate(seeds):
        final = float(p[i, a_star])
        stuck = bool(np.any(sub[i] > thresholds.stuck))
        outcomes.append(BanditRunOutcome(sd, final, float(max_star[i]), stuck,
                                         final > thresholds.converged and not stuck,
                                         int(first_hit[i]), n_iters))
    return BanditStudy(algorithm, outcomes, means, stds, p.copy())
