"""Exact GP regression over (action, context, action-distribution) inputs.

The kernel is additive::

    k(z, z') = s * [ rbf(x, x') + rbf(c, c') + sum_c rbf(xi_c, xi'_c) ]

where ``xi_c`` is the block of the flattened distribution that belongs to
context ``c``.  Two RBF forms are available: the usual squared exponential
``exp(-d^2 / (2 l^2))`` and the literal ``exp(-d / (2 l))``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

SQUARED_EXPONENTIAL = "squared_exponential"
UNSQUARED = "unsquared"
RBF_FORMS = (SQUARED_EXPONENTIAL, UNSQUARED)

JITTER_LADDER = (1e-8, 1e-6, 1e-4)


class FactorizationError(np.linalg.LinAlgError):
    def __init__(self, jitters):
        self.jitters = tuple(jitters)
        super().__init__(f"Gram matrix not positive definite after jitters {self.jitters}")


class UnsupportedConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class KernelParams:
    lengthscale_action: float = 1.0
    lengthscale_context: float = 1.0
    lengthscale_dist: float = 0.3
    output_scale: float = 1.0
    rbf_form: str = SQUARED_EXPONENTIAL

    def __post_init__(self):
        for name in ("lengthscale_action", "lengthscale_context", "lengthscale_dist", "output_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.rbf_form not in RBF_FORMS:
            raise ValueError(f"rbf_form must be one of {RBF_FORMS}, got {self.rbf_form!r}")

    @classmethod
    def from_domain(cls, actions, contexts, fraction=0.2, **overrides):
        """Lengthscales at ``fraction`` of each component's domain diameter.

        The distribution block of one context lives on a simplex of diameter
        sqrt(2).  Degenerate (single point) domains fall back to 1.
        """
        def diameter(emb):
            emb = np.asarray(emb, dtype=float)
            if emb.ndim == 1:
                emb = emb[:, None]
            d = np.sqrt(((emb[:, None, :] - emb[None, :, :]) ** 2).sum(-1)).max()
            return d if d > 0 else 1.0 / fraction

        kw = dict(
            lengthscale_action=float(fraction * diameter(actions.embeddings)),
            lengthscale_context=float(fraction * diameter(contexts.embeddings)),
            lengthscale_dist=float(fraction * np.sqrt(2.0)),
        )
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class NoiseModel:
    noise_std: float = 0.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")


@dataclass(frozen=True)
class GpInput:
    action_vec: np.ndarray
    context_vec: np.ndarray
    dist_flat: np.ndarray
    num_contexts: int = 1

    def __post_init__(self):
        for name in ("action_vec", "context_vec", "dist_flat"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if self.dist_flat.size % self.num_contexts:
            raise ValueError("dist_flat length is not a multiple of num_contexts")

    @property
    def dist_blocks(self):
        return self.dist_flat.reshape(self.num_contexts, -1)

    @property
    def dim(self):
        return self.action_vec.size + self.context_vec.size + self.dist_flat.size


def rbf(dist_sq, lengthscale, form=SQUARED_EXPONENTIAL):
    """RBF profile as a function of squared Euclidean distance."""
    if form == SQUARED_EXPONENTIAL:
        return np.exp(-dist_sq / (2.0 * lengthscale**2))
    return np.exp(-np.sqrt(np.maximum(dist_sq, 0.0)) / (2.0 * lengthscale))


def _check_pair(a, b):
    for name in ("action_vec", "context_vec", "dist_flat"):
        if getattr(a, name).shape != getattr(b, name).shape:
            raise ValueError(
                f"dimension mismatch in {name}: {getattr(a, name).shape} vs {getattr(b, name).shape}"
            )
    if a.num_contexts != b.num_contexts:
        raise ValueError(f"dimension mismatch in num_contexts: {a.num_contexts} vs {b.num_contexts}")


def kernel_eval(a, b, params):
    _check_pair(a, b)
    f = params.rbf_form
    kx = rbf(np.sum((a.action_vec - b.action_vec) ** 2), params.lengthscale_action, f)
    kc = rbf(np.sum((a.context_vec - b.context_vec) ** 2), params.lengthscale_context, f)
    kd = rbf(np.sum((a.dist_blocks - b.dist_blocks) ** 2, axis=1), params.lengthscale_dist, f)
    return float(params.output_scale * (kx + kc + kd.sum()))


def prior_variance(params, num_contexts):
    """k(z, z), identical for every input."""
    return params.output_scale * (2.0 + num_contexts)


@dataclass
class InputBatch:
    """Stacked GP inputs: actions (n, dA), contexts (n, dC), dists (n, C, A)."""

    actions: np.ndarray
    contexts: np.ndarray
    dists: np.ndarray

    def __len__(self):
        return self.actions.shape[0]

    @classmethod
    def from_inputs(cls, inputs):
        inputs = list(inputs)
        if not inputs:
            raise ValueError("no inputs")
        first = inputs[0]
        for z in inputs[1:]:
            _check_pair(first, z)
        return cls(
            np.stack([z.action_vec for z in inputs]),
            np.stack([z.context_vec for z in inputs]),
            np.stack([z.dist_blocks for z in inputs]),
        )

    def __getitem__(self, i):
        return GpInput(self.actions[i], self.contexts[i], self.dists[i].reshape(-1), self.dists.shape[1])


def _sqdist(a, b):
    """Pairwise squared distances between rows of a (n, d) and b (m, d)."""
    d = a[:, None, :] - b[None, :, :]
    return np.einsum("nmd,nmd->nm", d, d)


def cross_kernel_parts(a, b, params):
    """Per-component cross kernels (unscaled): action (n, m), context (n, m), dist (n, m, C)."""
    f = params.rbf_form
    kx = rbf(_sqdist(a.actions, b.actions), params.lengthscale_action, f)
    kc = rbf(_sqdist(a.contexts, b.contexts), params.lengthscale_context, f)
    diff = a.dists[:, None, :, :] - b.dists[None, :, :, :]
    kd = rbf(np.einsum("nmca,nmca->nmc", diff, diff), params.lengthscale_dist, f)
    return kx, kc, kd


def cross_kernel(a, b, params):
    kx, kc, kd = cross_kernel_parts(a, b, params)
    return params.output_scale * (kx + kc + kd.sum(axis=2))


class ObservationBuffer:
    """Append-only store of (GpInput, y) pairs."""

    def __init__(self):
        self.inputs = []
        self.targets = []

    def __len__(self):
        return len(self.inputs)

    def append(self, z, y):
        if self.inputs:
            _check_pair(self.inputs[0], z)
        self.inputs.append(z)
        self.targets.append(float(y))

    def batch(self):
        return InputBatch.from_inputs(self.inputs)


@dataclass(frozen=True)
class GpPosterior:
    params: KernelParams
    noise: NoiseModel
    train: InputBatch
    chol_factor: np.ndarray
    alpha_weights: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0
    jitter: float = 0.0
    gram: np.ndarray = field(default=None, repr=False)

    @property
    def num_contexts(self):
        return self.train.dists.shape[1]

    @property
    def num_actions(self):
        return self.train.dists.shape[2]

    @property
    def input_dim(self):
        return self.train.actions.shape[1] + self.train.contexts.shape[1] + self.num_contexts * self.num_actions

    @property
    def regulariser(self):
        """Diagonal term added to the Gram matrix, in standardised units."""
        return (self.noise.noise_std / self.y_scale) ** 2 + self.jitter


def _cholesky_with_jitter(K, reg):
    n = K.shape[0]
    tried = []
    for jitter in (0.0,) + JITTER_LADDER:
        if jitter:
            tried.append(jitter)
        try:
            L = np.linalg.cholesky(K + (reg + jitter) * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
    raise FactorizationError(tried)


def fit(buffer, params, noise, standardize=True):
    """Condition the zero-mean GP prior on the buffer.

    With ``standardize`` the targets are shifted/scaled to zero mean and unit
    standard deviation before fitting; predictions are mapped back.  The
    observation noise is rescaled accordingly so the model is unchanged up to
    the affine map.
    """
    if len(buffer) == 0:
        raise ValueError("cannot fit a GP to an empty buffer")
    train = buffer.batch()
    y = np.asarray(buffer.targets, dtype=float)
    y_mean, y_scale = 0.0, 1.0
    if standardize:
        y_mean = float(y.mean())
        sd = float(y.std())
        y_scale = sd if sd > 1e-12 else 1.0
    ys = (y - y_mean) / y_scale
    K = cross_kernel(train, train, params)
    reg = (noise.noise_std / y_scale) ** 2
    L, jitter = _cholesky_with_jitter(K, reg)
    alpha = cho_solve((L, True), ys)
    return GpPosterior(params, noise, train, L, alpha, y_mean, y_scale, jitter, K)


def predict(post, batch):
    """Posterior mean and variance at every row of an InputBatch."""
    Ks = cross_kernel(batch, post.train, post.params)
    mean = Ks @ post.alpha_weights
    v = solve_triangular(post.chol_factor, Ks.T, lower=True)
    var = prior_variance(post.params, post.num_contexts) - np.einsum("ij,ij->j", v, v)
    var = np.maximum(var, 0.0)
    return post.y_mean + post.y_scale * mean, post.y_scale**2 * var


def posterior_mean_var(post, z):
    _check_pair(post.train[0], z)
    mean, var = predict(post, InputBatch.from_inputs([z]))
    return float(mean[0]), float(var[0])


def posterior_grad_dist(post, z):
    """Gradients of the posterior mean and standard deviation w.r.t. ``z.dist_flat``.

    Only defined for the squared-exponential form.  Where the posterior
    standard deviation is zero its gradient is reported as zero.
    """
    if post.params.rbf_form != SQUARED_EXPONENTIAL:
        raise UnsupportedConfigurationError("distribution gradients need the squared-exponential kernel")
    _check_pair(post.train[0], z)
    p = post.params
    zb = InputBatch.from_inputs([z])
    kx, kc, kd = cross_kernel_parts(zb, post.train, p)
    k = p.output_scale * (kx + kc + kd.sum(axis=2))[0]            # (n,)
    # d k_j / d xi[c, a] = s * kd[j, c] * -(xi[c, a] - xi_j[c, a]) / l^2
    diff = z.dist_blocks[None, :, :] - post.train.dists                # (n, C, A)
    dk = -p.output_scale * kd[0][:, :, None] * diff / p.lengthscale_dist**2
    dk = dk.reshape(len(k), -1)                                       # (n, C*A)

    dmean = post.y_scale * (post.alpha_weights @ dk)
    v = solve_triangular(post.chol_factor, k, lower=True)
    var = prior_variance(p, post.num_contexts) - v @ v
    if var <= 1e-12:
        return dmean, np.zeros_like(dmean)
    w = solve_triangular(post.chol_factor, v, lower=True, trans="T")  # K^-1 k
    dsigma = -post.y_scale * (w @ dk) / np.sqrt(var)
    return dmean, dsigma
