"""YAML experiment configuration.

Schema (all sections except ``environment`` optional)::

    name: swarm
    environment:
      kind: swarm | arena | demand_matching | maritime
      population_m: 50
      actions: {circle: 30} | {embeddings: [...]} | {from_demand: true, grid_cols: 10}
      contexts: {embeddings: [...], probs: [...]} | {rademacher: true}
      noise_std: 10.0
      congestion_sigma: 10.0
      demand: [...]            # or demand_file: path/to/dist.csv
      capacity_file: ports.csv # maritime, or port_capacity: [...]
      port_region: [...]
      deterministic_mode: false
    algorithms: [mf_gp_ucb, random, simulated_annealing, genetic_algorithm]
    budget_t: 250
    seeds: [0, 1, 2]           # or {start: 0, count: 10}
    kernel: {fraction: 0.2, lengthscale_dist: 0.3, rbf_form: squared_exponential,
             noise_std: 1.0, standardize: true}
    beta: {mode: constant, constant_value: 2.0}
    acq: {steps: 200, learning_rate: 0.01, restarts: 8, grad_mode: analytic}
    sa: {init_temp: 1.0, cooling: 0.995, moves_per_iter: 1}
    ga: {pop_size: 20, tournament_k: 3, crossover_rate: 0.9, elitism: 1}
    output_dir: results/swarm

Relative paths are resolved against the config file's directory.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .acquisition import AcqOptConfig, BetaScheduleParams
from .baselines import GaConfig, SaConfig
from .data import load_distribution
from .envs import EnvironmentSpec
from .gp import KernelParams
from .meanfield import ActionSet, ContextMeasure

MF_GP_UCB = "mf_gp_ucb"
RANDOM = "random"
SIMULATED_ANNEALING = "simulated_annealing"
GENETIC_ALGORITHM = "genetic_algorithm"
ALGORITHMS = (MF_GP_UCB, RANDOM, SIMULATED_ANNEALING, GENETIC_ALGORITHM)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str
    env: EnvironmentSpec
    algorithms: tuple = (MF_GP_UCB,)
    budget_t: int = 250
    seeds: tuple = tuple(range(10))
    kernel: KernelParams = None
    gp_noise_std: float = None
    standardize: bool = True
    beta: BetaScheduleParams = field(default_factory=BetaScheduleParams)
    acq: AcqOptConfig = field(default_factory=AcqOptConfig)
    sa: SaConfig = field(default_factory=SaConfig)
    ga: GaConfig = field(default_factory=GaConfig)
    output_dir: Path = Path("results")

    def __post_init__(self):
        if self.budget_t < 1:
            raise ConfigError("budget_t must be at least 1")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithm(s) {bad}; choose from {ALGORITHMS}")
        if self.kernel is None:
            self.kernel = KernelParams.from_domain(self.env.actions, self.env.contexts)
        if self.gp_noise_std is None:
            self.gp_noise_std = self.env.noise_std if self.env.noise_std > 0 else 1e-4

    def replace(self, **changes):
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return ExperimentConfig(**kw)


def _path(base, value):
    p = Path(value)
    return p if p.is_absolute() else base / p


def _only(section, allowed, where):
    extra = set(section) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")


def _build_actions(sec, env_sec, demand_labels):
    if "circle" in sec:
        return ActionSet.circle(int(sec["circle"]))
    if "embeddings" in sec:
        return ActionSet(np.asarray(sec["embeddings"], dtype=float), tuple(sec.get("labels", ())))
    if sec.get("from_demand"):
        if demand_labels is None:
            raise ConfigError("actions.from_demand needs a demand_file")
        cols = sec.get("grid_cols")
        if cols:
            cells = np.array([int(lab) for lab in demand_labels])
            emb = np.stack([cells // int(cols), cells % int(cols)], axis=1).astype(float)
        else:
            emb = np.arange(len(demand_labels), dtype=float)
        return ActionSet(emb, tuple(demand_labels))
    raise ConfigError("environment.actions needs circle, embeddings or from_demand")


def _build_contexts(sec):
    if sec is None:
        return ContextMeasure.single()
    if sec.get("rademacher"):
        return ContextMeasure([-1.0, 1.0], [0.5, 0.5])
    if "embeddings" in sec:
        return ContextMeasure(np.asarray(sec["embeddings"], dtype=float), sec.get("probs"))
    if "count" in sec:
        n = int(sec["count"])
        return ContextMeasure(np.arange(n, dtype=float), sec.get("probs"))
    raise ConfigError("environment.contexts needs embeddings, count or rademacher")


def build_environment(sec, base):
    if not isinstance(sec, dict) or "kind" not in sec:
        raise ConfigError("environment section with a kind is required")
    _only(
        sec,
        ("kind", "population_m", "actions", "contexts", "noise_std", "congestion_sigma", "demand",
         "demand_file", "port_capacity", "capacity_file", "port_region", "deterministic_mode"),
        "environment",
    )
    demand = sec.get("demand")
    labels = None
    if "demand_file" in sec:
        demand, labels = load_distribution(_path(base, sec["demand_file"]))
    capacity = sec.get("port_capacity")
    if "capacity_file" in sec:
        capacity, cap_labels = load_distribution(_path(base, sec["capacity_file"]))
        labels = labels or cap_labels
    actions = _build_actions(sec.get("actions", {}), sec, labels)
    try:
        return EnvironmentSpec(
            kind=sec["kind"],
            actions=actions,
            contexts=_build_contexts(sec.get("contexts")),
            population_m=int(sec.get("population_m", 50)),
            noise_std=float(sec.get("noise_std", 0.0)),
            congestion_sigma=float(sec.get("congestion_sigma", 0.0)),
            demand=None if demand is None else np.asarray(demand, dtype=float),
            port_capacity=None if capacity is None else np.asarray(capacity, dtype=float),
            port_region=sec.get("port_region"),
            deterministic_mode=bool(sec.get("deterministic_mode", False)),
        )
    except ValueError as exc:
        raise ConfigError(f"environment: {exc}") from None


def _seeds(value):
    if value is None:
        return tuple(range(10))
    if isinstance(value, dict):
        start = int(value.get("start", 0))
        return tuple(range(start, start + int(value["count"])))
    return tuple(int(s) for s in value)


def from_dict(raw, base=Path(".")):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    _only(
        raw,
        ("name", "environment", "algorithms", "algorithm", "budget_t", "seeds", "kernel", "beta", "acq",
         "sa", "ga", "output_dir"),
        "config",
    )
    env = build_environment(raw.get("environment"), base)
    algos = raw.get("algorithms") or [raw.get("algorithm", MF_GP_UCB)]
    try:
        kern = dict(raw.get("kernel") or {})
        gp_noise = kern.pop("noise_std", None)
        standardize = bool(kern.pop("standardize", True))
        fraction = float(kern.pop("fraction", 0.2))
        kernel = KernelParams.from_domain(env.actions, env.contexts, fraction, **kern)
        return ExperimentConfig(
            name=str(raw.get("name", "experiment")),
            env=env,
            algorithms=tuple(algos),
            budget_t=int(raw.get("budget_t", 250)),
            seeds=_seeds(raw.get("seeds")),
            kernel=kernel,
            gp_noise_std=None if gp_noise is None else float(gp_noise),
            standardize=standardize,
            beta=BetaScheduleParams(**(raw.get("beta") or {})),
            acq=AcqOptConfig(**(raw.get("acq") or {})),
            sa=SaConfig(**(raw.get("sa") or {})),
            ga=GaConfig(**(raw.get("ga") or {})),
            output_dir=_path(base, raw.get("output_dir", "results")),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return from_dict(raw, path.parent)

