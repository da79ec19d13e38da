"""Mean-field benchmark environments.

Every reward rule works from per-(context, action) head counts rather than
from the agent list itself, so agent order never changes a result bit.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .meanfield import (
    ActionSet,
    ContextMeasure,
    PopulationAssignment,
    action_marginal,
    check_distribution,
    sample_population,
)

SWARM = "swarm"
ARENA = "arena"
DEMAND_MATCHING = "demand_matching"
MARITIME = "maritime"
KINDS = (SWARM, ARENA, DEMAND_MATCHING, MARITIME)


class InfiniteDivergenceError(ValueError):
    """KL divergence is infinite: p puts mass where q has none."""


@dataclass(frozen=True)
class EnvironmentSpec:
    kind: str
    actions: ActionSet
    contexts: ContextMeasure
    population_m: int
    noise_std: float = 0.0
    congestion_sigma: float = 0.0
    demand: np.ndarray = None
    port_capacity: np.ndarray = None
    port_region: np.ndarray = None
    deterministic_mode: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown environment kind {self.kind!r}")
        if self.population_m < 1:
            raise ValueError("population_m must be at least 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        A = len(self.actions)
        if self.kind == DEMAND_MATCHING:
            demand = np.asarray(self.demand, dtype=float)
            if demand.shape != (A,):
                raise ValueError(f"demand must have {A} entries")
            if np.any(demand < 0) or abs(demand.sum() - 1.0) > 1e-9:
                raise ValueError("demand must be a probability vector")
            object.__setattr__(self, "demand", demand)
        if self.kind == MARITIME:
            cap = np.asarray(self.port_capacity, dtype=float)
            region = np.asarray(self.port_region, dtype=np.int64)
            if cap.shape != (A,) or region.shape != (A,):
                raise ValueError(f"port_capacity and port_region must have {A} entries")
            if np.any(cap <= 0) or abs(cap.sum() - 1.0) > 1e-9:
                raise ValueError("port capacities must be positive and sum to 1")
            if np.any(region < 0) or np.any(region >= len(self.contexts)):
                raise ValueError("port_region entries must index contexts")
            object.__setattr__(self, "port_capacity", cap)
            object.__setattr__(self, "port_region", region)
        if self.kind == ARENA:
            vals = self.contexts.embeddings
            if vals.shape[1] != 1 or not np.all(np.isin(vals[:, 0], (-1.0, 1.0))):
                raise ValueError("arena contexts must be scalars in {-1, +1}")

    @property
    def num_actions(self):
        return len(self.actions)

    @property
    def num_contexts(self):
        return len(self.contexts)


@dataclass(frozen=True)
class StepOutcome:
    observed_y: float
    system_reward: float
    assignment: PopulationAssignment
    representative_idx: int
    xi: np.ndarray = field(default=None, repr=False)

    @property
    def representative_action(self):
        return int(self.assignment.action_idx[self.representative_idx])

    @property
    def representative_context(self):
        return int(self.assignment.context_idx[self.representative_idx])


def _counts(pop, num_contexts, num_actions):
    flat = pop.context_idx * num_actions + pop.action_idx
    return np.bincount(flat, minlength=num_contexts * num_actions).reshape(num_contexts, num_actions).astype(float)


def _angles(actions):
    if actions.dim != 1:
        raise ValueError("this environment needs scalar (angle) action embeddings")
    return actions.embeddings[:, 0]


def swarm_term(x):
    """Per-agent reward of standing at angle x."""
    return 2 * math.pi**2 * (np.sin(x) - np.cos(x) ** 2) + 2 * np.sin(x)


def congestion_penalty(freq, sigma):
    return sigma * float(np.sum(np.log(np.asarray(freq) + 1.0)))


def swarm_reward(pop, actions, sigma):
    counts = np.bincount(pop.action_idx, minlength=len(actions)).astype(float)
    reward = float(counts @ swarm_term(_angles(actions)))
    return reward - congestion_penalty(counts / counts.sum(), sigma)


def _arena_pair_term(counts, ctx_vals, angles, m):
    if m < 2:
        raise ValueError("arena reward needs at least two agents")
    w = (counts * ctx_vals[:, None]).sum(axis=0)
    cosines = np.cos(angles[:, None] - angles[None, :])
    total = w @ cosines @ w - float((counts * (ctx_vals**2)[:, None]).sum())
    return 0.5 * total / (m * (m - 1) / 2)


def arena_reward(pop, contexts, actions, sigma):
    """Mean over unordered agent pairs of c_i c_j cos(x_i - x_j), minus congestion."""
    ctx_vals = contexts.embeddings[:, 0]
    counts = _counts(pop, len(contexts), len(actions))
    pair = _arena_pair_term(counts, ctx_vals, _angles(actions), len(pop))
    freq = counts.sum(axis=0) / len(pop)
    return pair - congestion_penalty(freq, sigma)


def arena_reward_naive(pop, contexts, actions, sigma):
    """O(M^2) double loop; reference for the histogram evaluator."""
    m = len(pop)
    if m < 2:
        raise ValueError("arena reward needs at least two agents")
    c = contexts.embeddings[pop.context_idx, 0]
    x = _angles(actions)[pop.action_idx]
    total = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            total += c[i] * c[j] * math.cos(x[i] - x[j])
    freq = np.bincount(pop.action_idx, minlength=len(actions)) / m
    return total / (m * (m - 1) / 2) - congestion_penalty(freq, sigma)


def kl_divergence(p, q):
    """sum p log(p / q) in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        raise InfiniteDivergenceError("p has mass where q is zero")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def js_divergence(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    h = 0.5 * (p + q)
    js = 0.5 * kl_divergence(p, h) + 0.5 * kl_divergence(q, h)
    return min(max(js, 0.0), math.log(2.0))


def demand_matching_reward(pop, demand):
    counts = np.bincount(pop.action_idx, minlength=len(demand)).astype(float)
    return -js_divergence(counts / counts.sum(), demand)


def _maritime_from_counts(counts, m, capacity, region):
    occupancy = counts.sum(axis=0) / m
    if np.any((capacity <= 0) & (occupancy > 0)):
        raise ValueError("occupied port has zero capacity")
    ratio = np.divide(occupancy, capacity, out=np.zeros_like(occupancy), where=capacity > 0)
    bonus = (np.arange(counts.shape[0])[:, None] == region[None, :]).astype(float)
    per_cell = -0.5 - ratio[None, :] + bonus
    return float(np.sum(counts * per_cell)) / m


def maritime_reward(pop, spec):
    counts = _counts(pop, spec.num_contexts, spec.num_actions)
    return _maritime_from_counts(counts, len(pop), spec.port_capacity, spec.port_region)


def evaluate_assignment(spec, pop):
    """Noiseless system reward of a realised population."""
    if spec.kind == SWARM:
        return swarm_reward(pop, spec.actions, spec.congestion_sigma)
    if spec.kind == ARENA:
        return arena_reward(pop, spec.contexts, spec.actions, spec.congestion_sigma)
    if spec.kind == DEMAND_MATCHING:
        return demand_matching_reward(pop, spec.demand)
    return maritime_reward(pop, spec)


def expected_reward(spec, xi):
    """System reward at the mean-field limit: head counts are exactly M p(c) xi(x|c)."""
    xi = check_distribution(xi, spec.num_contexts, spec.num_actions)
    m = spec.population_m
    counts = m * spec.contexts.probs[:, None] * xi
    freq = action_marginal(xi, spec.contexts)
    if spec.kind == SWARM:
        return float(m * freq @ swarm_term(_angles(spec.actions))) - congestion_penalty(freq, spec.congestion_sigma)
    if spec.kind == ARENA:
        pair = _arena_pair_term(counts, spec.contexts.embeddings[:, 0], _angles(spec.actions), m)
        return pair - congestion_penalty(freq, spec.congestion_sigma)
    if spec.kind == DEMAND_MATCHING:
        return -js_divergence(freq, spec.demand)
    return _maritime_from_counts(counts, m, spec.port_capacity, spec.port_region)


def env_step(spec, xi, rng, context_idx=None):
    """One round of the bandit protocol.

    The population is sampled from ``xi`` (contexts fresh unless
    ``context_idx`` pins them), the system reward is computed, and a
    uniformly drawn representative agent observes it plus Gaussian noise.
    In deterministic mode the reward is the mean-field expectation instead.
    """
    xi = check_distribution(xi, spec.num_contexts, spec.num_actions)
    pop = sample_population(xi, spec.contexts, spec.population_m, rng, context_idx)
    if spec.deterministic_mode:
        reward = expected_reward(spec, xi)
    else:
        reward = evaluate_assignment(spec, pop)
    rep = int(rng.integers(spec.population_m))
    y = reward + spec.noise_std * rng.standard_normal() if spec.noise_std > 0 else reward
    return StepOutcome(float(y), float(reward), pop, rep, xi)
