"""Tabular softmax policies and the CAPO step-size rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, DomainError, InvalidParameterError

DEFAULT_CLIP = 50.0
RECENTER_EVERY = 10_000


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


@dataclass
class SoftmaxTable:
    """Per-(state, action) logits defining pi(a|s) = softmax(theta[s])."""

    theta: np.ndarray
    n_updates: int = 0

    def __post_init__(self):
        self.theta = np.array(self.theta, dtype=float)
        if self.theta.ndim != 2:
            raise InvalidParameterError("theta must be a [S, A] table")

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "SoftmaxTable":
        return cls(np.zeros((n_states, n_actions)))

    @property
    def shape(self):
        return self.theta.shape

    def _check_finite(self):
        if not np.all(np.isfinite(self.theta)):
            raise InvalidParameterError("non-finite entry in theta")

    def probs(self) -> np.ndarray:
        self._check_finite()
        return softmax(self.theta, axis=1)

    def log_probs(self) -> np.ndarray:
        self._check_finite()
        return log_softmax(self.theta, axis=1)

    def copy(self) -> "SoftmaxTable":
        return SoftmaxTable(self.theta.copy(), self.n_updates)

    def recenter(self) -> None:
        """Subtract each row's mean; probabilities are unchanged."""
        self.theta -= self.theta.mean(axis=1, keepdims=True)

    def count_update(self, k: int = 1) -> None:
        before = self.n_updates // RECENTER_EVERY
        self.n_updates += k
        if self.n_updates // RECENTER_EVERY != before:
            self.recenter()


def action_probs(table: SoftmaxTable, s: int) -> np.ndarray:
    row = table.theta[s]
    if not np.all(np.isfinite(row)):
        raise InvalidParameterError(f"non-finite theta in state {s}")
    return softmax(row)


def capo_alpha(pi_sa: float, clip: float = DEFAULT_CLIP) -> float:
    """Variable step min(log(1/pi), clip)."""
    if not 0.0 < pi_sa < 1.0:
        raise DomainError(f"pi(a|s) must lie in (0, 1), got {pi_sa}")
    if clip <= 0:
        raise DomainError("clip must be positive")
    return min(-math.log(pi_sa), clip)


def capo_alpha_logp(log_pi: float, clip: float = DEFAULT_CLIP) -> float:
    """:func:`capo_alpha` from a log-probability; stays finite when pi underflows."""
    return min(-log_pi, clip)


@dataclass
class OnCapoConfig:
    beta: float
    zeta: float
    visit_counts: np.ndarray = field(repr=False, default=None)

    @classmethod
    def create(cls, n_states: int, n_actions: int, beta: float, zeta: float) -> "OnCapoConfig":
        cfg = cls(beta, zeta, np.zeros((n_states, n_actions), dtype=np.int64))
        cfg.check()
        return cfg

    def check(self) -> None:
        n_actions = self.visit_counts.shape[1]
        if not 0.0 < self.beta <= 1.0 / (n_actions + 1):
            raise ConfigError(f"beta must lie in (0, 1/(|A|+1)], got {self.beta}")
        if not 0.0 < self.zeta <= 1.0 / n_actions:
            raise ConfigError(f"zeta must lie in (0, 1/|A|], got {self.zeta}")
        if np.any(self.visit_counts < 0):
            raise ConfigError("visit counts must be non-negative")


def _oncapo_alpha_logp(log_pi: float, adv_sign: int, beta: float, zeta: float,
                       n_visits: int) -> float:
    if adv_sign <= 0:
        return -log_pi
    if math.exp(log_pi) < beta:
        return math.log(beta / (1.0 - beta)) - log_pi
    if n_visits < 1:
        raise ContractError("visit count must be >= 1 before the count-based step")
    return zeta * math.log((n_visits + 1) / n_visits)


def oncapo_alpha(pi_sa: float, adv_sign: int, cfg: OnCapoConfig, s: int, a: int) -> float:
    """Three-branch step size of on-policy CAPO.

    ``cfg.visit_counts[s, a]`` must already include the current selection.
    """
    if not 0.0 < pi_sa < 1.0:
        raise DomainError(f"pi(a|s) must lie in (0, 1), got {pi_sa}")
    return _oncapo_alpha_logp(math.log(pi_sa), adv_sign, cfg.beta, cfg.zeta,
                              int(cfg.visit_counts[s, a]))


# Step rules used by capo_update. Each exposes ``alpha(log_pi_row, s, a, sign)``
# and ``register(pairs)``, called once per batch before any alpha is computed.

@dataclass
class CapoStep:
    clip: float = DEFAULT_CLIP

    def register(self, pairs) -> None:
        pass

    def alpha(self, log_pi: np.ndarray, s: int, a: int, sign: int) -> float:
        return capo_alpha_logp(log_pi[a], self.clip)


@dataclass
class OnCapoStep:
    cfg: OnCapoConfig

    def register(self, pairs) -> None:
        for s, a in pairs:
            self.cfg.visit_counts[s, a] += 1

    def alpha(self, log_pi: np.ndarray, s: int, a: int, sign: int) -> float:
        return _oncapo_alpha_logp(log_pi[a], sign, self.cfg.beta, self.cfg.zeta,
                                  int(self.cfg.visit_counts[s, a]))


@dataclass
class FixedStep:
    eta: float

    def register(self, pairs) -> None:
        pass

    def alpha(self, log_pi: np.ndarray, s: int, a: int, sign: int) -> float:
        return self.eta
