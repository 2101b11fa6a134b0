"""Run the three bandit studies and write per-study outcome and curve CSVs.

    python3 scripts/bandit_studies.py --out out/bandits --seeds 1000
"""

import argparse
from pathlib import Path

import numpy as np

from capolab.baselines import BanditParams, StudyThresholds, run_bandit_study
from capolab.csvio import write_csv

STUDIES = {
    "fixed_step_stuck": ("oncapo_fixed", [1.0, 0.99, -1.0], [0.0, 0.0, 0.0], BanditParams(eta=1.0)),
    "variable_step_escape": ("oncapo", [10.0, 9.9, 9.9, 0.0], [0.0, 3.0, 3.0, 0.0],
                             BanditParams(beta=0.2, zeta=0.25)),
    "fixed_step_escape": ("oncapo_fixed", [10.0, 9.9, 9.9, 0.0], [0.0, 3.0, 3.0, 0.0],
                          BanditParams(eta=0.1)),
    "spg": ("spg", [1.0, 0.9, 0.1], [0.0, 0.0, 0.0], BanditParams(eta=0.5)),
    "is_spg": ("is_spg", [1.0, 0.9, 0.1], [0.0, 0.0, 0.0], BanditParams(eta=0.5)),
    "offpac": ("offpac", [1.0, 0.9, 0.1], [0.0, 0.0, 0.0], BanditParams(eta=0.5)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/bandits")
    ap.add_argument("--seeds", type=int, default=1000, help="number of seeds (0..n-1)")
    ap.add_argument("--iters", type=int, default=10_000)
    ap.add_argument("--only", nargs="*", choices=sorted(STUDIES))
    args = ap.parse_args()
    out = Path(args.out)
    for name in args.only or STUDIES:
        alg, r, theta0, params = STUDIES[name]
        st = run_bandit_study(alg, r, theta0, range(args.seeds), args.iters,
                              StudyThresholds(), params)
        write_csv(out / f"{name}_outcomes.csv", st.outcomes[0].FIELDS,
                  (o.row() for o in st.outcomes))
        write_csv(out / f"{name}_curve.csv", ["iteration", "mean_pi_star", "std_pi_star"],
                  st.curve_rows())
        below = np.mean([o.final_pi_star < 0.01 for o in st.outcomes])
        print(f"{name:22s} stuck={st.fraction('stuck'):.3f} converged={st.fraction('converged'):.3f} "
              f"final pi* < 0.01: {below:.3f} mean final pi*={st.mean_pi_star[-1]:.4f}")


if __name__ == "__main__":
    main()
