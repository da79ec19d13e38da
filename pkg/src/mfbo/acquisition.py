"""MF-UCB acquisition, its optimisation over the simplex, and exploration schedules."""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import _backend
from .gp import (
    UNSQUARED,
    InputBatch,
    UnsupportedConfigurationError,
    predict,
    prior_variance,
    rbf,
)
from .meanfield import check_distribution, flatten_distribution, softmax_rows, uniform_distribution

log = logging.getLogger(__name__)

THEORETICAL = "theoretical"
CONSTANT = "constant"
LOG_GROWTH = "log_growth"

ANALYTIC = "analytic"
FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class BetaScheduleParams:
    mode: str = CONSTANT
    a_const: float = 1.0
    b_const: float = 1.0
    constant_value: float = 2.0
    log_scale: float = 2.0

    def __post_init__(self):
        if self.mode not in (THEORETICAL, CONSTANT, LOG_GROWTH):
            raise ValueError(f"unknown beta schedule {self.mode!r}")
        for name in ("a_const", "b_const", "constant_value", "log_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class AcqOptConfig:
    steps: int = 200
    learning_rate: float = 0.01
    restarts: int = 8
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_mode: str = ANALYTIC
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.steps < 1 or self.restarts < 1:
            raise ValueError("steps and restarts must be at least 1")
        if self.grad_mode not in (ANALYTIC, FINITE_DIFFERENCE):
            raise ValueError(f"unknown grad_mode {self.grad_mode!r}")


def xi_cardinality(t, num_actions, num_contexts, a, b):
    """log of the discretisation size (b|A||C|t^2 (log(a|A||C|) + sqrt(pi)/2))^(|A||C|).

    Returned in log space; 0 when the base does not exceed 1.
    """
    ac = num_actions * num_contexts
    base = b * ac * t**2 * (math.log(a * ac) + math.sqrt(math.pi) / 2)
    if base <= 1.0:
        return 0.0
    return ac * math.log(base)


def beta_value(t, num_actions, num_contexts, sched):
    if t < 1:
        raise ValueError("t starts at 1")
    if sched.mode == CONSTANT:
        return sched.constant_value
    if sched.mode == LOG_GROWTH:
        return sched.log_scale * math.sqrt(math.log(t + 1))
    log_xi = xi_cardinality(t, num_actions, num_contexts, sched.a_const, sched.b_const)
    return 2.0 * (
        math.log(num_actions) + math.log(num_contexts) + log_xi + 2.0 * math.log(t) - 0.5 * math.log(2 * math.pi)
    )


def query_batch(xi, actions, contexts):
    """All |A||C| GP inputs sharing the distribution ``xi``, context-major."""
    C, A = xi.shape
    flat = flatten_distribution(xi)
    return InputBatch(
        np.tile(actions.embeddings, (C, 1)),
        np.repeat(contexts.embeddings, A, axis=0),
        np.broadcast_to(flat.reshape(C, A), (C * A, C, A)).copy(),
    )


def mf_ucb(post, xi, p, actions, beta):
    """Exact expectation of mean + beta * sd under xi(x|c) p(c)."""
    xi = check_distribution(xi, len(p), len(actions))
    mean, var = predict(post, query_batch(xi, actions, p))
    weights = (p.probs[:, None] * xi).reshape(-1)
    return float(weights @ (mean + beta * np.sqrt(var)))


@dataclass
class AcqProblem:
    """Posterior pieces that do not depend on the candidate distribution.

    For a query (a, c) and training point j the cross kernel splits into
    ``P[q, j] + d_j(xi)`` where only ``d`` moves with xi.  ``vt`` holds
    ``L^-1 P^T`` row per query so the variance costs O(n^2) per candidate.
    """

    train_dists: np.ndarray
    chol: np.ndarray
    vt: np.ndarray
    vnorm2: np.ndarray
    palpha: np.ndarray
    alpha: np.ndarray
    probs: np.ndarray
    kss: float
    beta: float
    y_mean: float
    y_scale: float
    output_scale: float
    lengthscale: float
    literal: bool

    @classmethod
    def build(cls, post, p, actions, beta):
        kp = post.params
        f = kp.rbf_form
        tr = post.train
        ka = rbf(((actions.embeddings[:, None, :] - tr.actions[None]) ** 2).sum(-1), kp.lengthscale_action, f)
        kc = rbf(((p.embeddings[:, None, :] - tr.contexts[None]) ** 2).sum(-1), kp.lengthscale_context, f)
        P = kp.output_scale * (kc[:, None, :] + ka[None, :, :]).reshape(len(p) * len(actions), -1)
        vt = solve_triangular(post.chol_factor, P.T, lower=True).T
        return cls(
            train_dists=np.ascontiguousarray(tr.dists),
            chol=np.ascontiguousarray(post.chol_factor),
            vt=np.ascontiguousarray(vt),
            vnorm2=np.einsum("qn,qn->q", vt, vt),
            palpha=P @ post.alpha_weights,
            alpha=np.ascontiguousarray(post.alpha_weights),
            probs=np.ascontiguousarray(p.probs),
            kss=prior_variance(kp, len(p)),
            beta=float(beta),
            y_mean=post.y_mean,
            y_scale=post.y_scale,
            output_scale=kp.output_scale,
            lengthscale=kp.lengthscale_dist,
            literal=kp.rbf_form == UNSQUARED,
        )


def objective_and_grad(prob, theta, backend=None):
    """Acquisition of softmax(theta) and its gradient w.r.t. the logits, batched over restarts."""
    k = _backend.get(backend)
    xi = softmax_rows(theta)
    vals, g = k.acq_values_grads(prob, xi)
    return vals, xi * (g - np.sum(xi * g, axis=-1, keepdims=True))


def _fd_logit_grad(prob, theta, h, kern):
    R, C, A = theta.shape
    D = C * A
    eye = np.eye(D).reshape(D, C, A) * h
    plus = theta[:, None] + eye[None]
    minus = theta[:, None] - eye[None]
    both = np.concatenate([plus, minus], axis=1).reshape(-1, C, A)
    vals = kern.acq_values(prob, softmax_rows(both)).reshape(R, 2 * D)
    return ((vals[:, :D] - vals[:, D:]) / (2 * h)).reshape(R, C, A)


def _adam_fd(prob, theta0, cfg, kern):
    theta = theta0.copy()
    m = np.zeros_like(theta)
    s = np.zeros_like(theta)
    best_theta = theta.copy()
    best_val = np.full(theta.shape[0], -np.inf)
    alive = np.ones(theta.shape[0], dtype=bool)
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    for t in range(cfg.steps + 1):
        vals = kern.acq_values(prob, softmax_rows(theta))
        alive &= np.isfinite(vals)
        better = alive & (vals > best_val)
        best_val[better] = vals[better]
        best_theta[better] = theta[better]
        if t == cfg.steps or not alive.any():
            break
        g = _fd_logit_grad(prob, theta, cfg.fd_step, kern)
        g[~alive] = 0.0
        m = b1 * m + (1 - b1) * g
        s = b2 * s + (1 - b2) * g * g
        mhat = m / (1 - b1 ** (t + 1))
        shat = s / (1 - b2 ** (t + 1))
        theta = theta + cfg.learning_rate * mhat / (np.sqrt(shat) + cfg.adam_eps)
    best_val[~alive] = -np.inf
    return best_theta, best_val


def optimize_acquisition(post, beta, p, actions, cfg, rng, backend=None):
    """Maximise MF-UCB over the product of simplices via Adam on softmax logits.

    Restart 0 starts at zero logits (the uniform distribution), the others
    at standard-normal logits.  Each restart keeps its best iterate; the
    best restart wins.  Without a posterior the uniform distribution is
    returned, since the zero-mean prior makes the acquisition flat in xi.
    """
    C, A = len(p), len(actions)
    if post is None:
        return uniform_distribution(C, A)
    prob = AcqProblem.build(post, p, actions, beta)
    theta0 = np.concatenate([np.zeros((1, C, A)), rng.standard_normal((cfg.restarts - 1, C, A))])
    kern = _backend.get(backend)
    if cfg.grad_mode == ANALYTIC:
        if prob.literal:
            raise UnsupportedConfigurationError("analytic acquisition gradients need the squared-exponential kernel")
        best_theta, best_val = kern.adam_ascent(
            prob, theta0, cfg.steps, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
        )
    else:
        best_theta, best_val = _adam_fd(prob, theta0, cfg, kern)
    dead = ~np.isfinite(best_val)
    for r in np.flatnonzero(dead):
        log.warning("acquisition restart %d abandoned: non-finite objective", r)
    if dead.all():
        raise FloatingPointError("every acquisition restart produced a non-finite objective")
    return softmax_rows(best_theta[int(np.argmax(best_val))])
