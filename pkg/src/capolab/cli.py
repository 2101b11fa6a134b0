"""Command-line entry point: ``capolab <subcommand> [--config F] [--out D] [--seeds L]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import checks, exact
from .baselines import BanditParams, StudyThresholds, run_bandit_study, train_offpac
from .capo import (Batch, BehaviorEpsGreedy, Cyclic, Randomized, RetraceSettings, rate_bound,
                   train)
from .config import ExperimentConfig, load_config, parse_seeds
from .csvio import write_csv, write_params
from .errors import CapoError, ConfigError
from .mdp import make_bandit, make_chain, make_random_mdp
from .ncapo import NcapoConfig, train_ncapo
from .policy import CapoStep
from .rng import make_rng

NATURAL_ENV = {"bandit-study": "bandit", "rate-check": "random", "chain-compare": "chain",
               "ncapo-chain": "chain", "validate": "random", "oracle-suite": "random"}


def _env_kind(cfg: ExperimentConfig, sub: str) -> str:
    kind = cfg.env.kind if cfg.env.kind != "auto" else NATURAL_ENV[sub]
    wanted = NATURAL_ENV[sub]
    if sub not in ("validate", "oracle-suite") and kind != wanted:
        raise ConfigError(f"{sub} needs env.kind = {wanted}, got {kind}")
    return kind


def build_env(cfg: ExperimentConfig, kind: str, seed: int = 0):
    e = cfg.env
    if kind == "bandit":
        return make_bandit(e.rewards, e.gamma)
    if kind == "chain":
        return make_chain(e.chain_n, e.step_reward, e.goal_reward, e.chain_gamma)
    return make_random_mdp(e.n_states, e.n_actions, e.gamma, seed)


def _generator(name: str, cfg: ExperimentConfig):
    a = cfg.algo
    return {"cyclic": Cyclic, "batch": Batch, "randomized": Randomized,
            "behavior": lambda: BehaviorEpsGreedy(a.eps_start, a.eps_end, a.eps_decay_iters,
                                                  a.rollout_len)}[name]()


def _retrace(cfg: ExperimentConfig) -> RetraceSettings:
    a = cfg.algo
    return RetraceSettings(a.n_rollouts, a.rollout_len, a.capacity, a.n_sweeps, a.kappa,
                           a.lam, a.eps_end)


def cmd_validate(cfg, out: Path) -> int:
    kind = _env_kind(cfg, "validate")
    mdp = build_env(cfg, kind, cfg.run.seeds[0])
    v_star = exact.optimal_state_values(mdp)
    print(f"ok: {cfg.name} env={mdp.name} states={mdp.n_states} actions={mdp.n_actions} "
          f"V*(mu)={float(mdp.start_dist @ v_star):.6g} seeds={len(cfg.run.seeds)}")
    return 0


def cmd_bandit_study(cfg, out: Path) -> int:
    _env_kind(cfg, "bandit-study")
    a, e = cfg.algo, cfg.env
    theta0 = e.theta0 or (0.0,) * len(e.rewards)
    study = run_bandit_study(a.algorithm, e.rewards, theta0, cfg.run.seeds, cfg.run.iters,
                             StudyThresholds(a.stuck_threshold, a.converged_threshold),
                             BanditParams(a.eta, a.beta, a.zeta))
    write_csv(out / f"{cfg.name}_outcomes.csv", study.outcomes[0].FIELDS,
              (o.row() for o in study.outcomes))
    write_csv(out / f"{cfg.name}_curve.csv", ["iteration", "mean_pi_star", "std_pi_star"],
              study.curve_rows())
    print(f"bandit-study {a.algorithm}: seeds={len(study.outcomes)} iters={cfg.run.iters} "
          f"stuck_fraction={study.fraction('stuck'):.4f} "
          f"converged_fraction={study.fraction('converged'):.4f} "
          f"mean_final_pi_star={np.mean([o.final_pi_star for o in study.outcomes]):.4f}")
    return 0


def cmd_rate_check(cfg, out: Path) -> int:
    _env_kind(cfg, "rate-check")
    status = 0
    for seed in cfg.run.seeds:
        mdp = build_env(cfg, "random", seed)
        mu = mdp.start_dist
        for gname in cfg.algo.generators:
            if gname == "behavior":
                raise ConfigError("rate-check covers cyclic, batch and randomized generators")
            res = train(mdp, _generator(gname, cfg), CapoStep(cfg.algo.clip), cfg.algo.critic,
                        cfg.run.iters, mu, make_rng(seed, "coords"), retrace=_retrace(cfg))
            h = res.history
            bound = rate_bound(gname, mdp, mu, h.m + 1)
            ok = bool(np.all(h.gap <= bound))
            status |= 0 if ok else 1
            write_csv(out / f"{cfg.name}_{gname}_{seed}.csv", h.header() + ["bound"],
                      (row + [b] for row, b in zip(h.rows(), bound)))
            print(f"rate-check {gname} seed={seed}: final_gap={h.gap[-1]:.3e} "
                  f"max_gap_over_bound={np.max(h.gap / bound):.3e} {'OK' if ok else 'VIOLATED'}")
    return status


def cmd_chain_compare(cfg, out: Path) -> int:
    _env_kind(cfg, "chain-compare")
    mdp = build_env(cfg, "chain")
    s1 = 1
    v_star = exact.optimal_state_values(mdp)[s1]
    behavior = np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)
    for seed in cfg.run.seeds:
        it = cfg.run.iters
        cyc = train(mdp, Cyclic(), CapoStep(cfg.algo.clip), iters=it, start_dist=mdp.start_dist)
        bat = train(mdp, Batch(), CapoStep(cfg.algo.clip), iters=it, start_dist=mdp.start_dist)
        off = train_offpac(mdp, behavior, cfg.algo.offpac_eta, it, make_rng(seed, "rollout"))
        cols = [cyc.history.v[:, s1], bat.history.v[:, s1], off.v[:, s1]]
        write_csv(out / f"{cfg.name}_{seed}.csv", ["m", "cyclic_v_s1", "batch_v_s1",
                                                  "offpac_v_s1"],
                  ([m, *(c[m] for c in cols)] for m in range(it + 1)))
        print(f"chain-compare seed={seed}: V*(S1)={v_star:.4f} "
              + " ".join(f"{n}={c[-1] / v_star:.4f}V*" for n, c in
                         zip(("cyclic", "batch", "offpac"), cols)))
    return 0


def ncapo_config(cfg: ExperimentConfig) -> NcapoConfig:
    a = cfg.algo
    return NcapoConfig(a.hidden, a.lr, cfg.run.iters, a.batch_size, a.grad_steps, a.clip,
                       a.reverse_kl, a.n_rollouts, a.rollout_len, a.capacity, a.n_sweeps,
                       a.kappa, a.lam, a.tau_q, a.tau_theta, a.eps_start, a.eps_end,
                       a.eps_decay_iters, a.exploring_starts)


def cmd_ncapo_chain(cfg, out: Path) -> int:
    _env_kind(cfg, "ncapo-chain")
    mdp = build_env(cfg, "chain")
    v_star = float(mdp.start_dist @ exact.optimal_state_values(mdp))
    for seed in cfg.run.seeds:
        res = train_ncapo(mdp, cfg.algo.ncapo_mode, ncapo_config(cfg), seed)
        write_csv(out / f"{cfg.name}_{seed}.csv", res.history.HEADER, res.history.rows())
        write_params(out / f"{cfg.name}_{seed}_params.csv", res.policy.params())
        print(f"ncapo-chain {cfg.algo.ncapo_mode} seed={seed}: "
              f"V(S1)={res.history.v_mu[-1]:.4f} ({res.history.v_mu[-1] / v_star:.4f} V*)")
    return 0


def cmd_oracle_suite(cfg, out: Path) -> int:
    results = checks.run_all()
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {"validate": cmd_validate, "bandit-study": cmd_bandit_study,
            "rate-check": cmd_rate_check, "chain-compare": cmd_chain_compare,
            "ncapo-chain": cmd_ncapo_chain, "oracle-suite": cmd_oracle_suite}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="capolab", description="CAPO experiments on tabular MDPs.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI experiment file (built-in defaults when omitted)")
    p.add_argument("--out", help="output directory (overrides run.out_dir)")
    p.add_argument("--seeds", help="seed list such as 0,1,2 or 0-99 (overrides run.seeds)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seeds is not None:
            try:
                cfg.run.seeds = parse_seeds(args.seeds)
            except ValueError:
                raise ConfigError(f"--seeds: cannot parse {args.seeds!r}") from None
        cfg.check()
        out = Path(args.out or cfg.run.out_dir)
        return COMMANDS[args.command](cfg, out)
    except CapoError as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
