"""Black-box baselines over the joint action vector of all M agents.

Contexts are drawn once at the start of a run and then held fixed; the
optimisers only move actions.  Every environment evaluation counts against
the budget, and each run returns exactly ``budget`` RunRecords.
"""
import math
import time
from dataclasses import dataclass

import numpy as np

from .envs import evaluate_assignment
from .meanfield import PopulationAssignment, sample_actions, sample_contexts, softmax_rows
from .records import BestTracker


@dataclass(frozen=True)
class SaConfig:
    init_temp: float = 1.0
    cooling: float = 0.995
    moves_per_iter: int = 1

    def __post_init__(self):
        if not self.init_temp > 0:
            raise ValueError("init_temp must be positive")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if self.moves_per_iter < 1:
            raise ValueError("moves_per_iter must be at least 1")


@dataclass(frozen=True)
class GaConfig:
    pop_size: int = 20
    tournament_k: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = None  # None means 1/M
    elitism: int = 1

    def __post_init__(self):
        if self.pop_size < 2:
            raise ValueError("pop_size must be at least 2")
        if not 1 <= self.tournament_k <= self.pop_size:
            raise ValueError("tournament_k must lie in [1, pop_size]")
        if not 0 <= self.elitism <= self.pop_size:
            raise ValueError("elitism must lie in [0, pop_size]")


def _observe(spec, pop, rng):
    reward = evaluate_assignment(spec, pop)
    y = reward + spec.noise_std * rng.standard_normal() if spec.noise_std > 0 else reward
    return reward, y


def random_search_step(spec, rng, context_idx=None):
    """Uniform [0,1] logits per context -> softmax -> sample every agent -> evaluate."""
    if context_idx is None:
        context_idx = sample_contexts(spec.contexts, spec.population_m, rng)
    xi = softmax_rows(rng.random((spec.num_contexts, spec.num_actions)))
    pop = PopulationAssignment(context_idx, sample_actions(xi, context_idx, rng))
    reward, _ = _observe(spec, pop, rng)
    return pop, reward


def random_search_run(spec, budget, rng):
    context_idx = sample_contexts(spec.contexts, spec.population_m, rng)
    tracker = BestTracker()
    for _ in range(budget):
        t0 = time.perf_counter()
        pop, reward = random_search_step(spec, rng, context_idx)
        tracker.add(reward, reward, 1e3 * (time.perf_counter() - t0), pop)
    return tracker


def simulated_annealing_run(spec, cfg, budget, rng):
    """Metropolis acceptance exp(delta / temp) with geometric cooling per evaluation."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    m, A = spec.population_m, spec.num_actions
    context_idx = sample_contexts(spec.contexts, m, rng)
    tracker = BestTracker()

    t0 = time.perf_counter()
    state = rng.integers(A, size=m)
    pop = PopulationAssignment(context_idx, state)
    reward, cur_y = _observe(spec, pop, rng)
    tracker.add(reward, cur_y, 1e3 * (time.perf_counter() - t0), pop)
    temp = cfg.init_temp

    for _ in range(budget - 1):
        t0 = time.perf_counter()
        cand = state.copy()
        who = rng.integers(m, size=cfg.moves_per_iter)
        cand[who] = rng.integers(A, size=cfg.moves_per_iter)
        pop = PopulationAssignment(context_idx, cand)
        reward, y = _observe(spec, pop, rng)
        delta = y - cur_y
        u = rng.random()
        if delta >= 0 or u < math.exp(delta / temp):
            state, cur_y = cand, y
        temp *= cfg.cooling
        tracker.add(reward, y, 1e3 * (time.perf_counter() - t0), pop)
    return tracker


def _tournament(fitness, k, rng):
    contenders = rng.choice(len(fitness), size=k, replace=False)
    return contenders[np.argmax(fitness[contenders])]


def genetic_algorithm_run(spec, cfg, budget, rng):
    """Generational GA: tournament selection, uniform crossover, per-gene resampling.

    Each generation evaluates all ``pop_size`` individuals; the top
    ``elitism`` of the previous generation are copied in unchanged.  The
    last generation is truncated to fit the budget.
    """
    if budget < cfg.pop_size:
        raise ValueError("budget must cover at least one generation")
    m, A = spec.population_m, spec.num_actions
    mut = 1.0 / m if cfg.mutation_rate is None else cfg.mutation_rate
    context_idx = sample_contexts(spec.contexts, m, rng)
    tracker = BestTracker()

    genomes = rng.integers(A, size=(cfg.pop_size, m))
    while len(tracker.records) < budget:
        fitness = np.full(cfg.pop_size, -np.inf)
        for i in range(cfg.pop_size):
            if len(tracker.records) >= budget:
                break
            t0 = time.perf_counter()
            pop = PopulationAssignment(context_idx, genomes[i])
            reward, y = _observe(spec, pop, rng)
            fitness[i] = y
            tracker.add(reward, y, 1e3 * (time.perf_counter() - t0), pop)

        order = np.argsort(-fitness, kind="stable")
        children = [genomes[j].copy() for j in order[: cfg.elitism]]
        while len(children) < cfg.pop_size:
            a = genomes[_tournament(fitness, cfg.tournament_k, rng)]
            if rng.random() < cfg.crossover_rate:
                b = genomes[_tournament(fitness, cfg.tournament_k, rng)]
                child = np.where(rng.random(m) < 0.5, a, b)
            else:
                child = a.copy()
            flip = rng.random(m) < mut
            child[flip] = rng.integers(A, size=int(flip.sum()))
            children.append(child)
        genomes = np.stack(children)
    return tracker
