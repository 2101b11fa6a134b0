"""Gap of Cyclic, Batch and Randomized CAPO against their rate bounds.

Writes one CSV per MDP seed with the gap of each generator (the randomized
column is a mean over ``--runs`` coordinate seeds) next to its bound.
"""

import argparse
from pathlib import Path

import numpy as np

from capolab import make_random_mdp
from capolab.capo import Batch, Cyclic, rate_bound, run_randomized_many, train
from capolab.csvio import write_csv
from capolab.policy import CapoStep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/rates")
    ap.add_argument("--mdps", type=int, default=10)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--states", type=int, default=3)
    ap.add_argument("--actions", type=int, default=2)
    args = ap.parse_args()
    m = np.arange(1, args.iters + 2)
    for seed in range(args.mdps):
        mdp = make_random_mdp(args.states, args.actions, 0.9, seed)
        mu = np.full(mdp.n_states, 1 / mdp.n_states)
        cols = {"cyclic": train(mdp, Cyclic(), CapoStep(50), iters=args.iters,
                                start_dist=mu).history.gap,
                "batch": train(mdp, Batch(), CapoStep(50), iters=args.iters,
                               start_dist=mu).history.gap,
                "randomized": run_randomized_many(mdp, range(args.runs), args.iters,
                                                  start_dist=mu).mean(0)}
        bounds = {k: rate_bound(k, mdp, mu, m) for k in cols}
        header = ["m"] + [f"{k}_{x}" for k in cols for x in ("gap", "bound")]
        write_csv(Path(args.out) / f"rates_{seed}.csv", header,
                  ([i] + [v for k in cols for v in (cols[k][i], bounds[k][i])]
                   for i in range(args.iters + 1)))
        worst = {k: float(np.max(cols[k] / bounds[k])) for k in cols}
        print(f"mdp {seed}: " + " ".join(f"{k} max gap/bound={w:.2e}" for k, w in worst.items()))


if __name__ == "__main__":
    main()
