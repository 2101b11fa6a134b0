"""Coordinate Ascent Policy Optimization on tabular softmax policies.

The update touches only the coordinates in the current batch::

    theta[s, a] += alpha(s, a) * sign(A(s, a))    for (s, a) in batch

The module also holds the training loop and the closed-form one-step
predictions that the test suite checks against direct recomputation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import exact
from .errors import ContractError
from .mdp import TabularMdp, sample_rollout, sample_start
from .policy import CapoStep, SoftmaxTable

Pair = tuple[int, int]


@dataclass
class CoordinateBatch:
    pairs: list[Pair]
    m: int = 0
    sequential: bool = False

    def __len__(self):
        return len(self.pairs)


# --- coordinate generators -------------------------------------------------

@dataclass
class Cyclic:
    """Visit every (s, a) once per cycle; row-major order unless given."""

    order: Sequence[Pair] | None = None
    batch_size: int = 1

    def pairs_for(self, n_states: int, n_actions: int) -> list[Pair]:
        if self.order is not None:
            order = [tuple(map(int, p)) for p in self.order]
            if sorted(order) != [(s, a) for s in range(n_states) for a in range(n_actions)]:
                raise ContractError("cyclic order must be a permutation of S x A")
            return order
        return [(s, a) for s in range(n_states) for a in range(n_actions)]


@dataclass
class Randomized:
    """One pair per iteration drawn from ``d_gen`` (uniform when None)."""

    d_gen: np.ndarray | None = None

    def dist(self, n_states: int, n_actions: int) -> np.ndarray:
        if self.d_gen is None:
            return np.full(n_states * n_actions, 1.0 / (n_states * n_actions))
        d = np.asarray(self.d_gen, dtype=float).reshape(-1)
        if d.size != n_states * n_actions or np.any(d <= 0) or abs(d.sum() - 1) > 1e-12:
            raise ContractError("d_gen must be a strictly positive distribution over S x A")
        return d


@dataclass
class Batch:
    """Every (s, a) pair in every iteration."""


@dataclass
class BehaviorEpsGreedy:
    """Pairs visited by an epsilon-greedy rollout of the current policy.

    Epsilon decays linearly from ``eps_start`` to ``eps_end`` over
    ``decay_iters`` iterations and stays at ``eps_end`` afterwards.
    """

    eps_start: float = 1.0
    eps_end: float = 0.1
    decay_iters: int = 1000
    rollout_len: int = 10

    def epsilon(self, m: int) -> float:
        if self.decay_iters <= 0:
            return self.eps_end
        frac = min(1.0, m / self.decay_iters)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


Generator = Cyclic | Randomized | Batch | BehaviorEpsGreedy


def eps_greedy(probs: np.ndarray, eps: float) -> np.ndarray:
    """Mix the greedy action of each row (lowest index on ties) with uniform."""
    S, A = probs.shape
    b = np.full((S, A), eps / A)
    b[np.arange(S), np.argmax(probs, axis=1)] += 1.0 - eps
    return b


def next_batch(gen: Generator, m: int, table: SoftmaxTable, mdp: TabularMdp,
               rng: np.random.Generator | None = None) -> CoordinateBatch:
    S, A = mdp.n_states, mdp.n_actions
    if isinstance(gen, Cyclic):
        order = gen.pairs_for(S, A)
        k = gen.batch_size
        return CoordinateBatch([order[(m * k + i) % len(order)] for i in range(k)], m)
    if isinstance(gen, Randomized):
        cdf = np.cumsum(gen.dist(S, A))
        idx = min(int(np.searchsorted(cdf, rng.random(), side="right")), S * A - 1)
        return CoordinateBatch([divmod(idx, A)], m)
    if isinstance(gen, Batch):
        return CoordinateBatch([(s, a) for s in range(S) for a in range(A)], m)
    if isinstance(gen, BehaviorEpsGreedy):
        behavior = eps_greedy(table.probs(), gen.epsilon(m))
        ro = sample_rollout(mdp, behavior, sample_start(mdp, rng), gen.rollout_len, rng)
        pairs = [(int(s), int(a)) for s, a in zip(ro.states, ro.actions)]
        return CoordinateBatch(pairs, m, sequential=True)
    raise TypeError(f"unknown generator {gen!r}")


# --- the update ------------------------------------------------------------

SignSource = Sequence[int] | np.ndarray | Callable[[SoftmaxTable, int, int], int]


def _checked_sign(x) -> int:
    if x not in (-1, 0, 1):
        raise ContractError(f"advantage sign must be -1, 0 or +1, got {x!r}")
    return int(x)


def capo_update(table: SoftmaxTable, batch: CoordinateBatch, adv_signs: SignSource,
                step_rule=None, in_place: bool = False) -> SoftmaxTable:
    """Apply one CAPO step to the coordinates in ``batch``.

    ``adv_signs`` may be a sequence aligned with ``batch.pairs`` or a full
    ``[S, A]`` sign table. A callable ``(table, s, a) -> sign`` is also
    accepted and is evaluated just before each coordinate moves. Non-sequential batches compute every
    step from the pre-update table and apply them together; sequential
    batches update one pair at a time in batch order.
    """
    step_rule = CapoStep() if step_rule is None else step_rule
    out = table if in_place else table.copy()
    pairs = batch.pairs
    signs_arr = None
    if not callable(adv_signs):
        signs_arr = np.asarray(adv_signs)
        if signs_arr.shape == out.shape and signs_arr.shape != (len(pairs),):
            signs_arr = np.array([signs_arr[s, a] for s, a in pairs])
        if signs_arr.shape != (len(pairs),):
            raise ContractError("need one advantage sign per batch pair")

    def sign_of(i, s, a):
        if signs_arr is None:
            return _checked_sign(adv_signs(out, s, a))
        return _checked_sign(signs_arr[i].item())

    if batch.sequential:
        for i, (s, a) in enumerate(pairs):
            step_rule.register([(s, a)])
            sgn = sign_of(i, s, a)
            if sgn:
                log_pi = out.log_probs()[s]
                out.theta[s, a] += step_rule.alpha(log_pi, s, a, sgn) * sgn
    else:
        step_rule.register(pairs)
        log_pi = out.log_probs()
        delta = np.zeros_like(out.theta)
        for i, (s, a) in enumerate(pairs):
            sgn = sign_of(i, s, a)
            if sgn:
                delta[s, a] += step_rule.alpha(log_pi[s], s, a, sgn) * sgn
        out.theta += delta
    out.count_update(len(pairs))
    return out


def exact_signs(adv: np.ndarray) -> np.ndarray:
    return np.sign(adv).astype(int)


# --- closed-form one-step predictions --------------------------------------

def predicted_weight_delta(pi_row, a_m: int, sign: int) -> np.ndarray:
    """Change of pi(.|s_m) after one update with alpha = log(1/pi(a_m|s_m))."""
    pi_row = np.asarray(pi_row, dtype=float)
    p = pi_row[a_m]
    if sign == 1:
        delta = -((1 - p) / (2 - p)) * pi_row
        delta[a_m] = (1 - p) ** 2 / (2 - p)
    elif sign == -1:
        den = p * p - p + 1
        delta = (p * (1 - p) / den) * pi_row
        delta[a_m] = -p * (1 - p) ** 2 / den
    else:
        raise ContractError("sign must be -1 or +1")
    return delta


def batch_capo_weights(pi_row, adv_signs_row) -> np.ndarray:
    """pi_{m+1}(.|s) after a full-batch update with alpha = log(1/pi)."""
    pi_row = np.asarray(pi_row, dtype=float)
    signs = np.asarray(adv_signs_row)
    w = np.where(signs > 0, 1.0, np.where(signs < 0, pi_row ** 2, pi_row))
    return w / w.sum()


def fixed_lr_one_step_improvement(d_next: float, pi_am: float, adv_am: float,
                                  eta: float, gamma: float) -> float:
    """V^{m+1}(s) - V^m(s) after a single fixed-step update of (s_m, a_m).

    ``d_next`` is the visitation of s_m under the updated policy, started from s.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    p = pi_am
    scale = d_next / (1.0 - gamma)
    if adv_am > 0:
        g = math.expm1(eta)
        return scale * (g * p / (g * p + 1.0)) * adv_am
    if adv_am < 0:
        g = -math.expm1(-eta)
        return scale * (g * p / (1.0 - g * p)) * (-adv_am)
    return 0.0


# --- rate constants --------------------------------------------------------

def _mu_terms(mu):
    mu = np.asarray(mu, dtype=float)
    return 1.0 / np.max(1.0 / mu), float(np.min(mu))


def cyclic_rate_constant(mdp: TabularMdp, mu) -> float:
    inv_norm, mu_min = _mu_terms(mu)
    g = mdp.gamma
    SA = mdp.n_states * mdp.n_actions
    return (1 - g) ** 4 / 2 * inv_norm * min(mu_min / 2, (1 - g) / SA)


def batch_rate_constant(mdp: TabularMdp, mu) -> float:
    inv_norm, mu_min = _mu_terms(mu)
    return (1 - mdp.gamma) ** 4 / mdp.n_actions * inv_norm * mu_min


def randomized_rate_constant(mdp: TabularMdp, mu, d_gen=None) -> float:
    inv_norm, _ = _mu_terms(mu)
    d = Randomized(d_gen).dist(mdp.n_states, mdp.n_actions).reshape(mdp.n_states, -1)
    return (1 - mdp.gamma) ** 4 / 2 * inv_norm * float(np.min(d * np.asarray(mu)[:, None]))


def rate_bound(kind: str, mdp: TabularMdp, mu, m: np.ndarray | int, d_gen=None):
    """Upper bound on the gap of the m-th policy (m >= 1, pi_1 = initial policy)."""
    if kind == "cyclic":
        return mdp.n_states * mdp.n_actions / (cyclic_rate_constant(mdp, mu) * m)
    if kind == "batch":
        return 1.0 / (batch_rate_constant(mdp, mu) * m)
    if kind == "randomized":
        return 1.0 / (randomized_rate_constant(mdp, mu, d_gen) * m)
    raise ValueError(f"unknown rate kind {kind!r}")


# --- training --------------------------------------------------------------

@dataclass
class History:
    m: np.ndarray
    v_mu: np.ndarray
    gap: np.ndarray
    v: np.ndarray

    def __len__(self):
        return len(self.m)

    def header(self) -> list[str]:
        return ["m", "v_mu", "gap"] + [f"v_s{s}" for s in range(self.v.shape[1])]

    def rows(self):
        for i in range(len(self.m)):
            yield [int(self.m[i]), float(self.v_mu[i]), float(self.gap[i]),
                   *map(float, self.v[i])]


@dataclass
class TrainResult:
    history: History
    table: SoftmaxTable


@dataclass
class RetraceSettings:
    """Knobs of the sample-based critic used by ``train(critic='retrace')``."""

    n_rollouts: int = 8
    rollout_len: int = 20
    capacity: int = 6400
    n_sweeps: int = 5
    kappa: float = 0.1
    lam: float = 1.0
    epsilon: float = 0.3


def train(mdp: TabularMdp, generator: Generator, step_rule=None, critic: str = "exact",
          iters: int = 100, start_dist=None, rng: np.random.Generator | None = None,
          table: SoftmaxTable | None = None, v_star: np.ndarray | None = None,
          stop_gap: float | None = None,
          retrace: RetraceSettings | None = None) -> TrainResult:
    """Run CAPO for ``iters`` iterations, logging exact values every step.

    The history has ``iters + 1`` rows (the initial policy included) unless
    ``stop_gap`` is given, in which case training stops at the first policy
    whose gap V*(mu) - V(mu) falls below it.
    """
    if iters < 0:
        raise ValueError("iters must be non-negative")
    step_rule = CapoStep() if step_rule is None else step_rule
    rng = np.random.default_rng(0) if rng is None else rng
    table = SoftmaxTable.uniform(mdp.n_states, mdp.n_actions) if table is None else table.copy()
    mu = (np.full(mdp.n_states, 1.0 / mdp.n_states) if start_dist is None
          else np.asarray(start_dist, dtype=float))
    if v_star is None:
        v_star = exact.optimal_state_values(mdp)
    v_star_mu = float(mu @ v_star)

    critic_state = None
    if critic == "retrace":
        from .critic import RetraceCritic
        critic_state = RetraceCritic(mdp, retrace or RetraceSettings())
    elif critic != "exact":
        raise ValueError(f"unknown critic {critic!r}")

    ms, vmus, gaps, vs = [], [], [], []

    def log(m, prof):
        vmu = float(mu @ prof.v)
        ms.append(m)
        vmus.append(vmu)
        gaps.append(v_star_mu - vmu)
        vs.append(prof.v)
        return v_star_mu - vmu

    prof = exact.policy_eval(mdp, table.probs())
    gap = log(0, prof)
    for m in range(iters):
        if stop_gap is not None and gap < stop_gap:
            break
        batch = next_batch(generator, m, table, mdp, rng)
        if critic_state is not None:
            critic_state.refresh(table, rng)
            if batch.sequential:
                signs = critic_state.sign_fn()
            else:
                signs = critic_state.signs(table)
        elif batch.sequential:
            def signs(tab, s, a):
                return int(np.sign(exact.policy_eval(mdp, tab.probs()).adv[s, a]))
        else:
            signs = exact_signs(prof.adv)
        capo_update(table, batch, signs, step_rule, in_place=True)
        prof = exact.policy_eval(mdp, table.probs())
        gap = log(m + 1, prof)
    hist = History(np.array(ms), np.array(vmus), np.array(gaps), np.array(vs))
    return TrainResult(hist, table)


def run_randomized_many(mdp: TabularMdp, seeds: Sequence[int], iters: int,
                        d_gen=None, clip: float = 50.0, start_dist=None,
                        v_star: np.ndarray | None = None) -> np.ndarray:
    """Randomized CAPO for many seeds at once; returns gaps ``[n_seeds, iters + 1]``.

    Seed ``i`` consumes the same stream (``make_rng(seed, "coords")``) as a
    single :func:`train` run with a :class:`Randomized` generator, so each row
    reproduces that run exactly.
    """
    from .rng import make_rng

    S, A = mdp.n_states, mdp.n_actions
    n = len(seeds)
    cdf = np.cumsum(Randomized(d_gen).dist(S, A))
    u = np.stack([make_rng(sd, "coords").random(iters) for sd in seeds]) if iters else \
        np.zeros((n, 0))
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), S * A - 1)
    ss, aa = np.divmod(idx, A)
    mu = np.full(S, 1.0 / S) if start_dist is None else np.asarray(start_dist, dtype=float)
    if v_star is None:
        v_star = exact.optimal_state_values(mdp)
    theta = np.zeros((n, S, A))
    rows = np.arange(n)
    gaps = np.empty((n, iters + 1))
    from .policy import log_softmax
    for m in range(iters + 1):
        logp = log_softmax(theta, axis=2)
        v, q = exact.batched_values(mdp, np.exp(logp))
        gaps[:, m] = mu @ v_star - v @ mu
        if m == iters:
            break
        s, a = ss[:, m], aa[:, m]
        sgn = np.sign(q[rows, s, a] - v[rows, s])
        alpha = np.minimum(-logp[rows, s, a], clip)
        theta[rows, s, a] += alpha * sgn
        if (m + 1) % 10_000 == 0:
            theta -= theta.mean(axis=2, keepdims=True)
    return gaps
