"""Finite tabular MDPs plus the bandit, chain and random environments.

Episodic environments (bandit, chain) are encoded as infinite-horizon MDPs
with explicit absorbing zero-reward states, so every exact formula applies
unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidEnvironmentError, InvalidPolicyError
from .rng import make_rng

ROW_TOL = 1e-12

# action indices of the chain environment
TERMINATE = 0
RIGHT = 1


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """A finite MDP.

    ``transition[s, a, s']`` is P(s'|s,a), ``reward[s, a]`` the deterministic
    reward of taking ``a`` in ``s``. Arrays are read-only after construction.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    start_dist: np.ndarray
    terminal_mask: np.ndarray
    name: str = "mdp"

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "start_dist", _frozen(self.start_dist))
        object.__setattr__(self, "terminal_mask", _frozen(self.terminal_mask, bool))
        object.__setattr__(self, "gamma", float(self.gamma))
        validate(self)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def __repr__(self):
        return (f"TabularMdp(name={self.name!r}, n_states={self.n_states}, "
                f"n_actions={self.n_actions}, gamma={self.gamma})")


def validate(mdp: TabularMdp) -> None:
    """Raise :class:`InvalidEnvironmentError` unless every invariant holds."""
    P, r = mdp.transition, mdp.reward
    if P.ndim != 3 or P.shape[0] != P.shape[2]:
        raise InvalidEnvironmentError(f"transition must be [S, A, S], got {P.shape}")
    S, A, _ = P.shape
    if S < 1 or A < 1:
        raise InvalidEnvironmentError("need at least one state and one action")
    if r.shape != (S, A):
        raise InvalidEnvironmentError(f"reward must be [{S}, {A}], got {r.shape}")
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(r))):
        raise InvalidEnvironmentError("non-finite transition or reward entry")
    if np.any(P < 0):
        raise InvalidEnvironmentError("negative transition probability")
    if np.max(np.abs(P.sum(axis=2) - 1.0)) > ROW_TOL:
        raise InvalidEnvironmentError("transition rows must sum to 1")
    mu = mdp.start_dist
    if mu.shape != (S,) or np.any(mu < 0) or abs(mu.sum() - 1.0) > ROW_TOL:
        raise InvalidEnvironmentError("start_dist must be a probability vector over states")
    if not 0.0 < mdp.gamma < 1.0:
        raise InvalidEnvironmentError(f"gamma must lie in (0, 1), got {mdp.gamma}")
    term = mdp.terminal_mask
    if term.shape != (S,):
        raise InvalidEnvironmentError("terminal_mask must have one entry per state")
    for s in np.flatnonzero(term):
        if np.any(P[s, :, s] != 1.0) or np.any(r[s] != 0.0):
            raise InvalidEnvironmentError(f"terminal state {s} must self-loop with reward 0")


def make_bandit(rewards, gamma: float = 0.9) -> TabularMdp:
    """Deterministic K-armed bandit: state 0 is the start, state 1 an absorbing sink."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.ndim != 1 or rewards.size < 2:
        raise InvalidEnvironmentError("a bandit needs at least two arms")
    K = rewards.size
    P = np.zeros((2, K, 2))
    P[0, :, 1] = 1.0
    P[1, :, 1] = 1.0
    r = np.zeros((2, K))
    r[0] = rewards
    return TabularMdp(P, r, gamma, np.array([1.0, 0.0]), np.array([False, True]),
                      name=f"bandit{K}")


def make_chain(n: int, step_reward: float = 0.1, goal_reward: float = 100.0,
               gamma: float = 0.99) -> TabularMdp:
    """Chain of states S0..Sn; the agent starts in S1.

    TERMINATE (action 0) pays ``step_reward`` and moves to the absorbing S0.
    RIGHT (action 1) moves one state to the right, paying ``goal_reward`` on
    the S_{n-1} -> S_n transition and 0 otherwise. S0 and Sn are absorbing.
    """
    if n < 3:
        raise InvalidEnvironmentError(f"chain length must be >= 3, got {n}")
    S = n + 1
    P = np.zeros((S, 2, S))
    r = np.zeros((S, 2))
    for s in (0, n):
        P[s, :, s] = 1.0
    for s in range(1, n):
        P[s, TERMINATE, 0] = 1.0
        r[s, TERMINATE] = step_reward
        P[s, RIGHT, s + 1] = 1.0
    r[n - 1, RIGHT] = goal_reward
    mu = np.zeros(S)
    mu[1] = 1.0
    term = np.zeros(S, dtype=bool)
    term[[0, n]] = True
    return TabularMdp(P, r, gamma, mu, term, name=f"chain{n}")


def make_random_mdp(n_states: int, n_actions: int, gamma: float, seed: int) -> TabularMdp:
    """Dense random MDP with Dirichlet(1) transition rows and U[0,1] rewards."""
    if n_states < 2 or n_actions < 2:
        raise InvalidEnvironmentError("random MDPs need >= 2 states and >= 2 actions")
    rng = make_rng(seed, "env")
    w = rng.exponential(size=(n_states, n_actions, n_states)) + 1e-12
    P = w / w.sum(axis=2, keepdims=True)
    r = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    mu = np.full(n_states, 1.0 / n_states)
    return TabularMdp(P, r, gamma, mu, np.zeros(n_states, dtype=bool),
                      name=f"random{n_states}x{n_actions}s{seed}")


def check_policy(mdp: TabularMdp, policy: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (mdp.n_states, mdp.n_actions):
        raise InvalidPolicyError(
            f"policy must be [{mdp.n_states}, {mdp.n_actions}], got {policy.shape}")
    if np.any(policy < 0) or np.max(np.abs(policy.sum(axis=1) - 1.0)) > tol:
        raise InvalidPolicyError("policy rows must be probability distributions")
    return policy


@dataclass
class Rollout:
    """A finite trajectory recorded under a behaviour policy.

    ``dones[t]`` is True when ``next_states[t]`` is terminal.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    behavior_probs: np.ndarray
    dones: np.ndarray

    def __len__(self):
        return len(self.states)

    def __post_init__(self):
        if len(self.states) < 1:
            raise ValueError("a rollout holds at least one transition")
        if np.any(self.behavior_probs <= 0):
            raise ValueError("behaviour probability of a recorded action must be positive")


def _draw(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


def sample_rollout(mdp: TabularMdp, policy, start_state: int, max_len: int,
                   rng: np.random.Generator) -> Rollout:
    """Follow ``policy`` from ``start_state`` for at most ``max_len`` steps.

    Stops early upon entering a terminal state. One uniform is consumed per
    action draw and one per transition draw.
    """
    policy = check_policy(mdp, policy)
    if not 0 <= start_state < mdp.n_states:
        raise ValueError(f"invalid start state {start_state}")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    pol_cdf = np.cumsum(policy, axis=1)
    P_cdf = np.cumsum(mdp.transition, axis=2)
    states, actions, rewards, nexts, probs, dones = [], [], [], [], [], []
    s = start_state
    for _ in range(max_len):
        a = _draw(pol_cdf[s], rng.random())
        s2 = _draw(P_cdf[s, a], rng.random())
        states.append(s)
        actions.append(a)
        rewards.append(mdp.reward[s, a])
        nexts.append(s2)
        probs.append(policy[s, a])
        done = bool(mdp.terminal_mask[s2])
        dones.append(done)
        s = s2
        if done:
            break
    return Rollout(np.array(states), np.array(actions), np.array(rewards, dtype=float),
                   np.array(nexts), np.array(probs, dtype=float), np.array(dones))


def sample_start(mdp: TabularMdp, rng: np.random.Generator) -> int:
    return _draw(np.cumsum(mdp.start_dist), rng.random())
