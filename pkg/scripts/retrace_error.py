"""Sup-norm error of the Retrace critic against exact Q over many fixture seeds.

Each seed draws a random 3x2 MDP and target policy, fills a buffer with
uniform-behaviour rollouts and fits q. The printed pass rate shows how the
0.05 tolerance sits relative to the sampling noise.
"""

import argparse

import numpy as np

from capolab import exact, make_random_mdp
from capolab.critic import QEstimate, ReplayBuffer, fit_q
from capolab.mdp import sample_rollout, sample_start
from capolab.policy import softmax
from capolab.rng import make_rng


def error(seed, n_rollouts, length, sweeps, kappa, lam):
    mdp = make_random_mdp(3, 2, 0.9, seed)
    pi = softmax(make_rng(seed, "policy").normal(size=(3, 2)), axis=1)
    rng = make_rng(seed, "rollout")
    buf = ReplayBuffer(n_rollouts)
    for _ in range(n_rollouts):
        buf.add(sample_rollout(mdp, np.full((3, 2), 0.5), sample_start(mdp, rng), length, rng))
    q = fit_q(buf, QEstimate.zeros(3, 2, kappa, lam), pi, mdp.gamma, sweeps)
    return float(np.max(np.abs(q.q - exact.policy_eval(mdp, pi).q)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--rollouts", type=int, default=500)
    ap.add_argument("--length", type=int, default=20)
    ap.add_argument("--sweeps", type=int, default=200)
    ap.add_argument("--kappa", type=float, default=0.1)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--tol", type=float, default=0.05)
    args = ap.parse_args()
    errs = [error(s, args.rollouts, args.length, args.sweeps, args.kappa, args.lam)
            for s in range(args.seeds)]
    for s, e in enumerate(errs):
        print(f"seed {s:3d}: sup error {e:.4f}")
    print(f"pass rate at tol {args.tol}: {np.mean(np.array(errs) < args.tol):.2f}, "
          f"median error {np.median(errs):.4f}")


if __name__ == "__main__":
    main()
