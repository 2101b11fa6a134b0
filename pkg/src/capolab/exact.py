"""Exact policy evaluation: V, Q, advantages, discounted visitation, V*.

Everything here is a dense direct solve; these functions are the ground
truth that the sample-based critic and all closed-form checks are compared
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .mdp import TabularMdp, check_policy

SOLVE_TOL = 1e-9


@dataclass(frozen=True)
class ValueProfile:
    v: np.ndarray
    q: np.ndarray
    adv: np.ndarray
    policy: np.ndarray

    def v_at(self, dist) -> float:
        return float(np.dot(dist, self.v))


def _policy_matrices(mdp: TabularMdp, policy: np.ndarray):
    P_pi = np.einsum("sa,sat->st", policy, mdp.transition)
    r_pi = np.einsum("sa,sa->s", policy, mdp.reward)
    return P_pi, r_pi


def _solve(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        x = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular evaluation system: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite solution of evaluation system")
    return x


def policy_eval(mdp: TabularMdp, policy) -> ValueProfile:
    """Solve (I - gamma P_pi) v = r_pi and derive Q and advantages."""
    policy = check_policy(mdp, policy)
    P_pi, r_pi = _policy_matrices(mdp, policy)
    M = np.eye(mdp.n_states) - mdp.gamma * P_pi
    v = _solve(M, r_pi)
    resid = np.max(np.abs(M @ v - r_pi))
    if resid > SOLVE_TOL:
        raise NumericalError(f"evaluation residual {resid:.3e} exceeds {SOLVE_TOL}")
    q = mdp.reward + mdp.gamma * mdp.transition @ v
    return ValueProfile(v=v, q=q, adv=q - v[:, None], policy=policy)


def visitation(mdp: TabularMdp, policy, start_dist=None) -> np.ndarray:
    """Normalised discounted state visitation d^pi_mu.

    Solves d = (1 - gamma) mu + gamma P_pi^T d.
    """
    policy = check_policy(mdp, policy)
    mu = mdp.start_dist if start_dist is None else np.asarray(start_dist, dtype=float)
    P_pi, _ = _policy_matrices(mdp, policy)
    M = np.eye(mdp.n_states) - mdp.gamma * P_pi.T
    return _solve(M, (1.0 - mdp.gamma) * mu)


def state_visitation(mdp: TabularMdp, policy, s: int) -> np.ndarray:
    """Visitation started from the point mass at ``s``."""
    mu = np.zeros(mdp.n_states)
    mu[s] = 1.0
    return visitation(mdp, policy, mu)


def optimal_values(mdp: TabularMdp, tol: float = 1e-10, max_iter: int = 10_000_000):
    """Value iteration to ``||v - V*||_inf < tol``.

    Returns ``(v_star, greedy_policy)``; the greedy policy is deterministic with
    ties broken towards the lowest action index.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = mdp.gamma
    stop = tol * (1.0 - g) / g
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        q = mdp.reward + g * mdp.transition @ v
        v_new = q.max(axis=1)
        if np.max(np.abs(v_new - v)) < stop:
            v = v_new
            break
        v = v_new
    else:
        raise NumericalError("value iteration did not converge")
    q = mdp.reward + g * mdp.transition @ v
    greedy = np.zeros_like(q)
    greedy[np.arange(mdp.n_states), np.argmax(q, axis=1)] = 1.0
    return v, greedy


def optimal_state_values(mdp: TabularMdp, tol: float = 1e-10) -> np.ndarray:
    """V* refined by exactly evaluating the greedy policy of value iteration."""
    _, greedy = optimal_values(mdp, tol)
    return policy_eval(mdp, greedy).v


def perf_difference(mdp: TabularMdp, pi_new, pi_old, start_dist=None) -> float:
    """Right-hand side of the performance difference identity.

    (1/(1-gamma)) * sum_s d^{pi_new}_mu(s) sum_a pi_new(a|s) A^{pi_old}(s,a)
    """
    pi_new = check_policy(mdp, pi_new)
    d_new = visitation(mdp, pi_new, start_dist)
    adv_old = policy_eval(mdp, pi_old).adv
    return float(d_new @ np.einsum("sa,sa->s", pi_new, adv_old)) / (1.0 - mdp.gamma)


def batched_values(mdp: TabularMdp, policies: np.ndarray):
    """Evaluate a stack of policies ``[n, S, A]`` at once.

    Returns ``(v [n, S], q [n, S, A])``. Used by the vectorised multi-seed
    runners; no policy validation is performed.
    """
    P_pi = np.einsum("nsa,sat->nst", policies, mdp.transition)
    r_pi = np.einsum("nsa,sa->ns", policies, mdp.reward)
    M = np.eye(mdp.n_states)[None] - mdp.gamma * P_pi
    v = np.linalg.solve(M, r_pi[..., None])[..., 0]
    q = mdp.reward[None] + mdp.gamma * np.einsum("sat,nt->nsa", mdp.transition, v)
    return v, q
