"""Neural CAPO at toy scale.

A one-hidden-layer ReLU network maps one-hot states to logits. Each
iteration shifts the network's logits on the batch coordinates by the CAPO
step to form a target distribution per state, then takes plain gradient
steps on the KL divergence between the network policy and that target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import exact
from .capo import BehaviorEpsGreedy, Cyclic, eps_greedy
from .critic import QEstimate, ReplayBuffer, advantage_signs_from_q, fit_q, polyak
from .errors import ConfigError, ContractError, NumericalError
from .mdp import TabularMdp, sample_rollout, sample_start
from .policy import DEFAULT_CLIP, log_softmax, softmax
from .rng import make_rng

PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass
class MlpPolicy:
    W1: np.ndarray  # [H, D]
    b1: np.ndarray  # [H]
    W2: np.ndarray  # [A, H]
    b2: np.ndarray  # [A]

    @classmethod
    def init(cls, n_inputs: int, n_actions: int, hidden: int,
             rng: np.random.Generator) -> "MlpPolicy":
        k1 = 1.0 / np.sqrt(n_inputs)
        k2 = 1.0 / np.sqrt(hidden)
        return cls(rng.uniform(-k1, k1, (hidden, n_inputs)), rng.uniform(-k1, k1, hidden),
                   rng.uniform(-k2, k2, (n_actions, hidden)), rng.uniform(-k2, k2, n_actions))

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def copy(self) -> "MlpPolicy":
        return MlpPolicy(*(getattr(self, k).copy() for k in PARAM_NAMES))

    def _forward(self, states):
        X = np.eye(self.n_inputs)[np.asarray(states)]
        z = X @ self.W1.T + self.b1
        h = np.maximum(z, 0.0)
        return X, z, h, h @ self.W2.T + self.b2

    def logits(self, states) -> np.ndarray:
        f = self._forward(states)[3]
        if not np.all(np.isfinite(f)):
            raise NumericalError("non-finite network output")
        return f

    def probs(self, states=None) -> np.ndarray:
        states = np.arange(self.n_inputs) if states is None else states
        return softmax(self.logits(states), axis=1)

    def backward(self, states, g_logits):
        """Parameter gradient given d(loss)/d(logits)."""
        X, z, h, _ = self._forward(states)
        dh = (g_logits @ self.W2) * (z > 0)
        return {"W1": dh.T @ X, "b1": dh.sum(0), "W2": g_logits.T @ h, "b2": g_logits.sum(0)}

    def apply(self, grads, lr: float) -> None:
        for k in PARAM_NAMES:
            getattr(self, k)[...] -= lr * grads[k]

    def mix_from(self, other: "MlpPolicy", tau: float) -> None:
        for k in PARAM_NAMES:
            setattr(self, k, polyak(getattr(self, k), getattr(other, k), tau))


@dataclass
class LinearPolicy:
    """Logits = one-hot(s) @ W; the tabular special case of the network."""

    W: np.ndarray  # [D, A]

    @property
    def n_inputs(self) -> int:
        return self.W.shape[0]

    def params(self):
        return {"W": self.W}

    def logits(self, states):
        return self.W[np.asarray(states)]

    def probs(self, states=None):
        states = np.arange(self.W.shape[0]) if states is None else states
        return softmax(self.logits(states), axis=1)

    def backward(self, states, g_logits):
        g = np.zeros_like(self.W)
        np.add.at(g, np.asarray(states), g_logits)
        return {"W": g}

    def apply(self, grads, lr):
        self.W -= lr * grads["W"]


@dataclass
class NcapoTarget:
    states: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def ncapo_target(f_values: np.ndarray, batch, adv_signs, clip: float = DEFAULT_CLIP,
                 step_rule=None) -> NcapoTarget:
    """Targets for every distinct state of ``batch`` (order of first appearance).

    ``f_values[s]`` is the network logit row of state ``s``; batch coordinates
    of the same state shift simultaneously from the unshifted row.
    """
    pairs = list(batch.pairs if hasattr(batch, "pairs") else batch)
    if not pairs:
        raise ContractError("batch must be non-empty")
    signs = np.asarray(adv_signs)
    if signs.shape != (len(pairs),):
        raise ContractError("need one sign per batch pair")
    f_values = np.asarray(f_values, dtype=float)
    states = list(dict.fromkeys(s for s, _ in pairs))
    row_of = {s: i for i, s in enumerate(states)}
    logits = f_values[states].copy()
    logp = log_softmax(f_values[states], axis=1)
    for (s, a), sg in zip(pairs, signs):
        if sg not in (-1, 0, 1):
            raise ContractError(f"advantage sign must be -1, 0 or +1, got {sg!r}")
        if sg:
            i = row_of[s]
            alpha = (min(-logp[i, a], clip) if step_rule is None
                     else step_rule.alpha(logp[i], s, a, int(sg)))
            logits[i, a] += alpha * sg
    return NcapoTarget(np.array(states), logits, softmax(logits, axis=1))


def kl_loss_and_grad(policy, states, targets: NcapoTarget, reverse: bool = False):
    """Summed KL(pi_theta || target) over ``states`` and its parameter gradient.

    With ``reverse`` the arguments swap to KL(target || pi_theta).
    """
    states = np.asarray(states)
    if not np.array_equal(states, targets.states):
        raise ContractError("targets must cover exactly the given states")
    f = policy.logits(states)
    logp = log_softmax(f, axis=1)
    p = np.exp(logp)
    q = targets.probs
    with np.errstate(divide="ignore"):
        logq = log_softmax(targets.logits, axis=1)
    if np.any(~np.isfinite(logq) & (p > 0)):
        raise NumericalError("target has a zero entry where the policy is positive")
    if reverse:
        mask = q > 0
        loss = float(np.sum(np.where(mask, q * (logq - logp), 0.0)))
        g = p - q
    else:
        kl = np.sum(p * (logp - logq), axis=1)
        loss = float(kl.sum())
        g = p * (logp - logq - kl[:, None])
    return max(loss, 0.0), policy.backward(states, g)


# --- training --------------------------------------------------------------

@dataclass
class NcapoConfig:
    hidden: int = 256
    lr: float = 0.001
    iters: int = 1000
    batch_size: int = 16
    grad_steps: int = 10
    clip: float = DEFAULT_CLIP
    reverse_kl: bool = False
    # replay_retrace mode
    n_rollouts: int = 4
    rollout_len: int = 20
    capacity: int = 6400
    n_sweeps: int = 5
    kappa: float = 0.1
    lam: float = 1.0
    tau_q: float = 0.05
    tau_theta: float = 1.0
    eps_start: float = 0.3
    eps_end: float = 0.05
    eps_decay_iters: int = 500
    exploring_starts: bool = False  # start rollouts uniformly over non-terminal states

    def check(self) -> None:
        if self.hidden < 1 or self.batch_size < 1 or self.iters < 0 or self.grad_steps < 0:
            raise ConfigError("hidden, batch_size >= 1 and iters, grad_steps >= 0 required")
        if self.lr <= 0 or self.clip <= 0:
            raise ConfigError("lr and clip must be positive")
        if not (0 < self.tau_q <= 1 and 0 < self.tau_theta <= 1):
            raise ConfigError("polyak coefficients must lie in (0, 1]")
        if not (0 <= self.eps_end <= 1 and 0 <= self.eps_start <= 1):
            raise ConfigError("epsilon schedule must lie in [0, 1]")
        if self.capacity < 1 or self.n_rollouts < 1 or self.rollout_len < 1:
            raise ConfigError("buffer capacity and rollout sizes must be >= 1")
        if not 0 <= self.lam <= 1:
            raise ConfigError("lambda must lie in [0, 1]")


@dataclass
class NcapoHistory:
    iteration: list[int] = field(default_factory=list)
    v_mu: list[float] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)

    HEADER = ("iteration", "v_mu", "loss")

    def log(self, m, v_mu, loss):
        self.iteration.append(m)
        self.v_mu.append(float(v_mu))
        self.loss.append(float(loss))

    def rows(self):
        return zip(self.iteration, self.v_mu, self.loss)


@dataclass
class NcapoResult:
    history: NcapoHistory
    policy: MlpPolicy


def _actor_update(policy, pairs, signs, cfg: NcapoConfig) -> float:
    f = policy.logits(np.arange(policy.n_inputs))
    target = ncapo_target(f, pairs, signs, cfg.clip)
    loss = 0.0
    for _ in range(cfg.grad_steps):
        loss, grads = kl_loss_and_grad(policy, target.states, target, cfg.reverse_kl)
        policy.apply(grads, cfg.lr)
    return loss


def train_ncapo(mdp: TabularMdp, mode: str = "exact_adv", cfg: NcapoConfig | None = None,
                seed: int = 0) -> NcapoResult:
    """Train a network policy with CAPO targets; V(mu) is logged exactly each iteration."""
    cfg = cfg or NcapoConfig()
    cfg.check()
    S, A = mdp.n_states, mdp.n_actions
    policy = MlpPolicy.init(S, A, cfg.hidden, make_rng(seed, "init"))
    hist = NcapoHistory()
    mu = mdp.start_dist

    def value():
        return exact.policy_eval(mdp, policy.probs()).v @ mu

    hist.log(0, value(), 0.0)
    if mode == "exact_adv":
        gen = Cyclic(batch_size=cfg.batch_size)
        order = gen.pairs_for(S, A)
        for m in range(cfg.iters):
            pairs = [order[(m * cfg.batch_size + i) % len(order)] for i in range(cfg.batch_size)]
            pairs = list(dict.fromkeys(pairs))
            adv = exact.policy_eval(mdp, policy.probs()).adv
            signs = np.array([int(np.sign(adv[s, a])) for s, a in pairs])
            loss = _actor_update(policy, pairs, signs, cfg)
            hist.log(m + 1, value(), loss)
    elif mode == "replay_retrace":
        rng = make_rng(seed, "rollout")
        sched = BehaviorEpsGreedy(cfg.eps_start, cfg.eps_end, cfg.eps_decay_iters)
        behavior_net = policy.copy()
        buffer = ReplayBuffer(cfg.capacity)
        q = QEstimate.zeros(S, A, cfg.kappa, cfg.lam)
        q_target = q.q.copy()
        live = np.flatnonzero(~mdp.terminal_mask)

        def start():
            if cfg.exploring_starts:
                return int(live[min(int(rng.random() * live.size), live.size - 1)])
            return sample_start(mdp, rng)

        for m in range(cfg.iters):
            behavior = eps_greedy(behavior_net.probs(), sched.epsilon(m))
            fresh = [sample_rollout(mdp, behavior, start(), cfg.rollout_len, rng)
                     for _ in range(cfg.n_rollouts)]
            buffer.extend(fresh)
            pi = policy.probs()
            q = fit_q(buffer, q, pi, mdp.gamma, cfg.n_sweeps, bootstrap=q_target)
            pairs = list(dict.fromkeys((int(s), int(a)) for ro in fresh
                                       for s, a in zip(ro.states, ro.actions)))
            sign_tab = advantage_signs_from_q(q.q, pi)
            signs = np.array([sign_tab[s, a] for s, a in pairs])
            loss = _actor_update(policy, pairs, signs, cfg)
            q_target = polyak(q_target, q.q, cfg.tau_q)
            behavior_net.mix_from(policy, cfg.tau_theta)
            hist.log(m + 1, value(), loss)
    else:
        raise ConfigError(f"unknown ncapo mode {mode!r}")
    return NcapoResult(hist, policy)
