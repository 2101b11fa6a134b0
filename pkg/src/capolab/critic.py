"""Off-policy Q evaluation from replayed rollouts (tabular Retrace(lambda))."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InvalidParameterError
from .mdp import Rollout, TabularMdp, sample_rollout, sample_start

SIGN_DEAD_ZONE = 1e-8


class ReplayBuffer:
    """FIFO store of rollouts; the oldest rollout is evicted once full."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidParameterError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[Rollout] = deque(maxlen=capacity)

    def add(self, rollout: Rollout) -> None:
        self._items.append(rollout)

    def extend(self, rollouts) -> None:
        for ro in rollouts:
            self.add(ro)

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i):
        return self._items[i]


@dataclass
class QEstimate:
    q: np.ndarray
    kappa: float = 0.1
    lam: float = 1.0

    def __post_init__(self):
        self.q = np.array(self.q, dtype=float)
        if not np.all(np.isfinite(self.q)):
            raise InvalidParameterError("q must be finite")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidParameterError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.kappa < 0:
            raise InvalidParameterError("kappa must be non-negative")

    @classmethod
    def zeros(cls, n_states: int, n_actions: int, kappa: float = 0.1, lam: float = 1.0):
        return cls(np.zeros((n_states, n_actions)), kappa, lam)

    def copy(self) -> "QEstimate":
        return QEstimate(self.q.copy(), self.kappa, self.lam)


def _pad(rollouts):
    n, L = len(rollouts), max(len(r) for r in rollouts)
    s = np.zeros((n, L), dtype=int)
    a = np.zeros((n, L), dtype=int)
    s2 = np.zeros((n, L), dtype=int)
    r = np.zeros((n, L))
    b = np.ones((n, L))
    done = np.zeros((n, L), dtype=bool)
    valid = np.zeros((n, L), dtype=bool)
    for i, ro in enumerate(rollouts):
        k = len(ro)
        if np.any(ro.behavior_probs <= 0):
            raise ContractError("behaviour probability must be positive")
        s[i, :k], a[i, :k], s2[i, :k] = ro.states, ro.actions, ro.next_states
        r[i, :k], b[i, :k], done[i, :k] = ro.rewards, ro.behavior_probs, ro.dones
        valid[i, :k] = True
    return s, a, r, s2, b, done, valid


def _targets_padded(padded, q, policy, gamma, lam):
    s, a, r, s2, b, done, valid = padded
    v = np.einsum("sa,sa->s", policy, q)
    q_sa = q[s, a]
    delta = r + gamma * np.where(done, 0.0, v[s2]) - q_sa
    c = lam * np.minimum(1.0, policy[s, a] / b)
    # c[:, t] multiplies the tail starting at t; zero past the end of a rollout
    c = np.where(valid, c, 0.0)
    G = np.zeros_like(delta)
    acc = np.zeros(delta.shape[0])
    for t in range(delta.shape[1] - 1, -1, -1):
        tail = gamma * c[:, t + 1] * acc if t + 1 < delta.shape[1] else 0.0
        acc = np.where(valid[:, t], delta[:, t] + tail, 0.0)
        G[:, t] = acc
    return q_sa + G


def retrace_targets(rollout: Rollout, q: QEstimate, target_policy, gamma: float) -> np.ndarray:
    """Retrace(lambda) target for every step of ``rollout``.

    Truncated traces c_i = lambda * min(1, pi/b); the value after entering a
    terminal state is 0.
    """
    padded = _pad([rollout])
    return _targets_padded(padded, q.q, np.asarray(target_policy, float), gamma, q.lam)[0]


def fit_q(buffer, q: QEstimate, target_policy, gamma: float, n_sweeps: int,
          kappa: float | None = None, bootstrap: np.ndarray | None = None,
          batch_size: int | None = None,
          rng: np.random.Generator | None = None) -> QEstimate:
    """Regress ``q`` onto Retrace targets.

    Each sweep builds targets for every stored step from a frozen copy of q,
    then moves each visited q(s, a) by ``kappa * mean(target - q(s, a))``
    over its visits. ``batch_size`` subsamples rollouts per sweep. With ``bootstrap``
    the targets are built from that fixed table instead of the current q.
    """
    items = list(buffer)
    if not items:
        raise ContractError("cannot fit q on an empty buffer")
    kappa = q.kappa if kappa is None else kappa
    policy = np.asarray(target_policy, dtype=float)
    out = q.copy()
    S, A = out.q.shape
    padded_all = _pad(items)
    for _ in range(n_sweeps):
        if kappa == 0:
            break
        padded = padded_all
        if batch_size is not None and batch_size < len(items):
            idx = np.sort(rng.choice(len(items), size=batch_size, replace=False))
            padded = tuple(x[idx] for x in padded_all)
        src = out.q if bootstrap is None else bootstrap
        tgt = _targets_padded(padded, src, policy, gamma, out.lam)
        s, a, valid = padded[0], padded[1], padded[6]
        flat = (s * A + a)[valid]
        err = (tgt - out.q[s, a])[valid]
        tot = np.bincount(flat, weights=err, minlength=S * A)
        cnt = np.bincount(flat, minlength=S * A)
        step = np.divide(tot, cnt, out=np.zeros(S * A), where=cnt > 0)
        out.q += kappa * step.reshape(S, A)
    if not np.all(np.isfinite(out.q)):
        raise InvalidParameterError("q diverged")
    return out


def advantage_signs_from_q(q, policy, dead_zone: float = SIGN_DEAD_ZONE) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    adv = q - np.einsum("sa,sa->s", policy, q)[:, None]
    return np.where(np.abs(adv) < dead_zone, 0, np.sign(adv)).astype(int)


def polyak(target: np.ndarray, source: np.ndarray, tau: float) -> np.ndarray:
    return (1.0 - tau) * target + tau * source


class RetraceCritic:
    """Sample-based sign oracle used by ``capo.train(critic='retrace')``.

    Every refresh appends epsilon-greedy rollouts of the current policy to the
    buffer and refits q against the current policy.
    """

    def __init__(self, mdp: TabularMdp, settings):
        self.mdp = mdp
        self.settings = settings
        self.buffer = ReplayBuffer(settings.capacity)
        self.q = QEstimate.zeros(mdp.n_states, mdp.n_actions, settings.kappa, settings.lam)

    def refresh(self, table, rng: np.random.Generator) -> None:
        from .capo import eps_greedy

        st = self.settings
        pi = table.probs()
        behavior = eps_greedy(pi, st.epsilon)
        for _ in range(st.n_rollouts):
            self.buffer.add(sample_rollout(self.mdp, behavior, sample_start(self.mdp, rng),
                                          st.rollout_len, rng))
        self.q = fit_q(self.buffer, self.q, pi, self.mdp.gamma, st.n_sweeps)

    def signs(self, table) -> np.ndarray:
        return advantage_signs_from_q(self.q.q, table.probs())

    def sign_fn(self):
        def fn(tab, s, a):
            row = tab.probs()[s]
            adv = self.q.q[s, a] - row @ self.q.q[s]
            return 0 if abs(adv) < SIGN_DEAD_ZONE else int(np.sign(adv))
        return fn
