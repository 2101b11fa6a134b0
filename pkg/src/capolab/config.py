"""INI experiment configuration with strict key checking."""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field

from .errors import ConfigError

ENV_KINDS = ("auto", "bandit", "chain", "random")
GENERATORS = ("cyclic", "batch", "randomized", "behavior")


@dataclass
class EnvConfig:
    kind: str = "auto"
    rewards: tuple[float, ...] = (1.0, 0.99, -1.0)
    theta0: tuple[float, ...] = ()
    chain_n: int = 10
    step_reward: float = 0.1
    goal_reward: float = 100.0
    chain_gamma: float = 0.99
    n_states: int = 3
    n_actions: int = 2
    gamma: float = 0.9


@dataclass
class AlgoConfig:
    algorithm: str = "oncapo_fixed"
    generators: tuple[str, ...] = ("cyclic", "batch", "randomized")
    critic: str = "exact"
    eta: float = 1.0
    beta: float = 0.2
    zeta: float = 0.25
    clip: float = 50.0
    offpac_eta: float = 0.1
    stuck_threshold: float = 0.99
    converged_threshold: float = 0.99
    lam: float = 1.0
    kappa: float = 0.1
    n_sweeps: int = 5
    n_rollouts: int = 4
    rollout_len: int = 20
    capacity: int = 6400
    eps_start: float = 0.3
    eps_end: float = 0.05
    eps_decay_iters: int = 500
    ncapo_mode: str = "exact_adv"
    hidden: int = 256
    lr: float = 0.001
    batch_size: int = 16
    grad_steps: int = 10
    tau_q: float = 0.05
    tau_theta: float = 1.0
    reverse_kl: bool = False
    exploring_starts: bool = False


@dataclass
class RunConfig:
    seeds: tuple[int, ...] = (0, 1, 2)
    iters: int = 1000
    out_dir: str = "out"


@dataclass
class ExperimentConfig:
    name: str = "default"
    env: EnvConfig = field(default_factory=EnvConfig)
    algo: AlgoConfig = field(default_factory=AlgoConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def check(self) -> None:
        e, a, r = self.env, self.algo, self.run
        if e.kind not in ENV_KINDS:
            raise ConfigError(f"env.kind must be one of {', '.join(ENV_KINDS)}")
        if not (0.0 < e.gamma < 1.0 and 0.0 < e.chain_gamma < 1.0):
            raise ConfigError("env.gamma and env.chain_gamma must lie in (0, 1)")
        if len(e.rewards) < 2:
            raise ConfigError("env.rewards needs at least two arms")
        if e.theta0 and len(e.theta0) != len(e.rewards):
            raise ConfigError("env.theta0 must have one entry per arm")
        if e.chain_n < 3 or e.n_states < 2 or e.n_actions < 2:
            raise ConfigError("env sizes out of range")
        bad = [g for g in a.generators if g not in GENERATORS]
        if bad or not a.generators:
            raise ConfigError(f"algo.generators must be drawn from {', '.join(GENERATORS)}")
        if a.critic not in ("exact", "retrace"):
            raise ConfigError("algo.critic must be exact or retrace")
        if a.ncapo_mode not in ("exact_adv", "replay_retrace"):
            raise ConfigError("algo.ncapo_mode must be exact_adv or replay_retrace")
        if a.eta < 0 or a.offpac_eta < 0 or a.clip <= 0 or a.lr <= 0 or a.kappa < 0:
            raise ConfigError("step sizes out of range")
        K = len(e.rewards)
        if a.algorithm == "oncapo" and not 0 < a.beta <= 1 / (K + 1) + 1e-15:
            raise ConfigError(f"algo.beta must lie in (0, 1/(|A|+1)] = (0, {1 / (K + 1):.6g}]")
        if a.algorithm == "oncapo" and not 0 < a.zeta <= 1 / K + 1e-15:
            raise ConfigError(f"algo.zeta must lie in (0, 1/|A|] = (0, {1 / K:.6g}]")
        for name in ("stuck_threshold", "converged_threshold", "lam", "eps_start",
                     "eps_end", "tau_q", "tau_theta"):
            if not 0.0 <= getattr(a, name) <= 1.0:
                raise ConfigError(f"algo.{name} must lie in [0, 1]")
        if a.tau_q == 0 or a.tau_theta == 0:
            raise ConfigError("polyak coefficients must be positive")
        for name in ("n_sweeps", "n_rollouts", "rollout_len", "capacity", "hidden",
                     "batch_size"):
            if getattr(a, name) < 1:
                raise ConfigError(f"algo.{name} must be >= 1")
        if a.grad_steps < 0 or a.eps_decay_iters < 0:
            raise ConfigError("algo.grad_steps and algo.eps_decay_iters must be >= 0")
        if not r.seeds:
            raise ConfigError("run.seeds must be non-empty")
        if any(s < 0 for s in r.seeds):
            raise ConfigError("seeds must be non-negative")
        if r.iters < 0:
            raise ConfigError("run.iters must be >= 0")


def parse_seeds(raw: str) -> tuple[int, ...]:
    """Comma-separated integers; ``a-b`` expands to the inclusive range."""
    out: list[int] = []
    for tok in (t.strip() for t in raw.split(",")):
        if not tok:
            continue
        lo, sep, hi = tok.partition("-")
        if sep and lo:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    return tuple(out)


SECTIONS = {"env": EnvConfig, "algo": AlgoConfig, "run": RunConfig}


def _coerce(raw: str, tp, where: str):
    try:
        if tp is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if tp in (int, float, str):
            return tp(raw.strip())
        if typing.get_origin(tp) is tuple:
            elem = typing.get_args(tp)[0]
            if elem is int:
                return parse_seeds(raw)
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            return tuple(elem(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None
    raise ConfigError(f"{where}: unsupported type")


def _apply(obj, items, section: str) -> None:
    hints = typing.get_type_hints(type(obj))
    names = {f.name for f in dataclasses.fields(obj)}
    for key, raw in items:
        if key not in names:
            raise ConfigError(f"unknown key {section}.{key}")
        setattr(obj, key, _coerce(raw, hints[key], f"{section}.{key}"))


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {' '.join(str(exc).split())}") from None
    cfg = ExperimentConfig()
    for section in cp.sections():
        items = cp.items(section)
        if section == "experiment":
            for key, raw in items:
                if key != "name":
                    raise ConfigError(f"unknown key experiment.{key}")
                cfg.name = raw.strip()
        elif section in SECTIONS:
            _apply(getattr(cfg, section), items, section)
        else:
            raise ConfigError(f"unknown section [{section}]")
    cfg.check()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that parses back to ``cfg``."""
    def fmt(v):
        if isinstance(v, tuple):
            return ", ".join(map(str, v))
        return str(v).lower() if isinstance(v, bool) else str(v)

    lines = ["[experiment]", f"name = {cfg.name}"]
    for section in SECTIONS:
        lines += ["", f"[{section}]"]
        obj = getattr(cfg, section)
        lines += [f"{f.name} = {fmt(getattr(obj, f.name))}" for f in dataclasses.fields(obj)]
    return "\n".join(lines) + "\n"
