"""Action/context spaces and conditional action distributions.

A conditional distribution is stored as a ``(n_contexts, n_actions)`` array
whose rows are probability vectors.  When it has to be fed to the GP it is
flattened context-major, i.e. row 0 first.
"""
from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-9


def _as_embeddings(values):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"embeddings must be 1-D or 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ActionSet:
    embeddings: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        emb = _as_embeddings(self.embeddings)
        if emb.shape[0] < 1:
            raise ValueError("action set is empty")
        if len(np.unique(emb, axis=0)) != emb.shape[0]:
            raise ValueError("action embeddings must be pairwise distinct")
        labels = tuple(self.labels) or tuple(str(i) for i in range(emb.shape[0]))
        if len(labels) != emb.shape[0]:
            raise ValueError("labels and embeddings differ in length")
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.embeddings.shape[0]

    @property
    def dim(self):
        return self.embeddings.shape[1]

    @classmethod
    def circle(cls, n):
        """``n`` equally spaced angles on [0, 2*pi)."""
        return cls(np.linspace(0.0, 2 * np.pi, n, endpoint=False))


@dataclass(frozen=True)
class ContextMeasure:
    embeddings: np.ndarray
    probs: np.ndarray = None

    def __post_init__(self):
        emb = _as_embeddings(self.embeddings)
        if self.probs is None:
            probs = np.full(emb.shape[0], 1.0 / emb.shape[0])
        else:
            probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (emb.shape[0],):
            raise ValueError("probs must have one entry per context")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("context probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "probs", probs)

    def __len__(self):
        return self.embeddings.shape[0]

    @property
    def dim(self):
        return self.embeddings.shape[1]

    @classmethod
    def single(cls):
        return cls([0.0], [1.0])


@dataclass(frozen=True)
class PopulationAssignment:
    context_idx: np.ndarray
    action_idx: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.context_idx, dtype=np.int64)
        a = np.asarray(self.action_idx, dtype=np.int64)
        if c.shape != a.shape or c.ndim != 1:
            raise ValueError("context_idx and action_idx must be 1-D of equal length")
        object.__setattr__(self, "context_idx", c)
        object.__setattr__(self, "action_idx", a)

    def __len__(self):
        return self.action_idx.shape[0]

    def permuted(self, order):
        order = np.asarray(order)
        return PopulationAssignment(self.context_idx[order], self.action_idx[order])


def check_distribution(xi, n_contexts=None, n_actions=None):
    """Validate a conditional distribution and return it as a float array."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 2:
        raise ValueError(f"conditional distribution must be 2-D, got shape {xi.shape}")
    if n_contexts is not None and xi.shape[0] != n_contexts:
        raise ValueError(f"expected {n_contexts} context rows, got {xi.shape[0]}")
    if n_actions is not None and xi.shape[1] != n_actions:
        raise ValueError(f"expected {n_actions} action columns, got {xi.shape[1]}")
    if np.any(xi < -SIMPLEX_TOL) or np.any(xi > 1 + SIMPLEX_TOL):
        raise ValueError("distribution entries must lie in [0, 1]")
    if np.any(np.abs(xi.sum(axis=1) - 1.0) > SIMPLEX_TOL):
        raise ValueError("each distribution row must sum to 1")
    return xi


def uniform_distribution(n_contexts, n_actions):
    return np.full((n_contexts, n_actions), 1.0 / n_actions)


def softmax_rows(logits):
    """Row-wise softmax with max subtraction; works on any leading batch shape."""
    theta = np.asarray(logits, dtype=float)
    shifted = theta - theta.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def flatten_distribution(xi):
    return np.ascontiguousarray(xi, dtype=float).reshape(-1)


def unflatten_distribution(flat, n_contexts):
    flat = np.asarray(flat, dtype=float)
    if flat.size % n_contexts:
        raise ValueError(f"cannot split {flat.size} entries into {n_contexts} rows")
    return flat.reshape(n_contexts, -1)


def sample_contexts(p, m, rng):
    return rng.choice(len(p), size=m, p=p.probs)


def sample_actions(xi, context_idx, rng):
    """Draw one action per agent from its context's row of ``xi``."""
    xi = np.asarray(xi, dtype=float)
    cdf = np.cumsum(xi, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(len(context_idx))
    rows = cdf[context_idx]
    return (u[:, None] >= rows).sum(axis=1)


def sample_population(xi, p, m, rng, context_idx=None):
    """Assign contexts i.i.d. from ``p`` (unless given) and actions from ``xi``."""
    if m < 1:
        raise ValueError("population size must be at least 1")
    if context_idx is None:
        context_idx = sample_contexts(p, m, rng)
    actions = sample_actions(xi, context_idx, rng)
    return PopulationAssignment(context_idx, actions)


def empirical_distribution(pop, num_actions, scope="global", num_contexts=None):
    """Normalised action frequencies.

    ``scope="global"`` gives a ``(1, num_actions)`` row.  ``scope="per_context"``
    gives one row per context; contexts nobody holds get an all-zero row.
    """
    if len(pop) == 0:
        raise ValueError("population is empty")
    if scope == "global":
        counts = np.bincount(pop.action_idx, minlength=num_actions).astype(float)
        return (counts / counts.sum())[None, :]
    if scope == "per_context":
        n_ctx = num_contexts if num_contexts is not None else int(pop.context_idx.max()) + 1
        flat = pop.context_idx * num_actions + pop.action_idx
        counts = np.bincount(flat, minlength=n_ctx * num_actions).reshape(n_ctx, num_actions)
        counts = counts.astype(float)
        totals = counts.sum(axis=1, keepdims=True)
        return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    raise ValueError(f"unknown scope {scope!r}")


def action_marginal(xi, p):
    """Population-level action distribution sum_c p(c) xi(.|c)."""
    return np.asarray(p.probs) @ np.asarray(xi, dtype=float)
