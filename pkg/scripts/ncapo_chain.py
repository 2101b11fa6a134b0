"""Network CAPO on the chain in both modes; prints V(S1)/V* per seed.

    python3 scripts/ncapo_chain.py --mode replay_retrace --exploring-starts
"""

import argparse
from pathlib import Path

from capolab import exact, make_chain
from capolab.csvio import write_csv
from capolab.ncapo import NcapoConfig, train_ncapo


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mode", default="exact_adv", choices=["exact_adv", "replay_retrace"])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--iters", type=int, default=1000)
    ap.add_argument("--hidden", type=int, default=256)
    ap.add_argument("--lr", type=float, default=0.001)
    ap.add_argument("--reverse-kl", action="store_true")
    ap.add_argument("--exploring-starts", action="store_true")
    ap.add_argument("--out", default="out/ncapo")
    args = ap.parse_args()
    mdp = make_chain(10)
    v_star = exact.optimal_state_values(mdp)[1]
    cfg = NcapoConfig(hidden=args.hidden, lr=args.lr, iters=args.iters,
                      reverse_kl=args.reverse_kl, exploring_starts=args.exploring_starts)
    for seed in args.seeds:
        hist = train_ncapo(mdp, args.mode, cfg, seed).history
        write_csv(Path(args.out) / f"{args.mode}_{seed}.csv", hist.HEADER, hist.rows())
        print(f"{args.mode} seed {seed}: V(S1)={hist.v_mu[-1]:.4f} ({hist.v_mu[-1] / v_star:.4f} V*)")


if __name__ == "__main__":
    main()
