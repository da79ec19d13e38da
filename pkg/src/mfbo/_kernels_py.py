"""Pure numpy implementation of the acquisition hot loop.

Mirrors ``mfbo._kernels`` (Cython) function for function.  Both take an
``AcqProblem`` (see ``mfbo.acquisition``) holding everything about the
posterior that does not depend on the candidate distribution.

Restarts are vectorised: distributions come in as ``(R, C, A)`` arrays.
"""
import numpy as np
from scipy.linalg import solve_triangular

VAR_FLOOR = 1e-12


def _dist_kernel(prob, xi):
    """Per-context distribution kernel values, shape (R, n, C), unscaled."""
    diff = xi[:, None, :, :] - prob.train_dists[None, :, :, :]
    sq = np.einsum("rnca,rnca->rnc", diff, diff)
    if prob.literal:
        return np.exp(-np.sqrt(sq) / (2.0 * prob.lengthscale))
    return np.exp(-sq / (2.0 * prob.lengthscale**2))


def _forward(prob, xi):
    R = xi.shape[0]
    kd = _dist_kernel(prob, xi)
    d = prob.output_scale * kd.sum(axis=2)                             # (R, n)
    v = solve_triangular(prob.chol, d.T, lower=True, check_finite=False)  # (n, R)
    cross = prob.vt @ v                                                # (Q, R)
    quad = prob.vnorm2[:, None] + 2.0 * cross + np.einsum("nr,nr->r", v, v)[None, :]
    var = np.maximum(prob.kss - quad, 0.0).T                           # (R, Q)
    mean = prob.palpha[None, :] + (d @ prob.alpha)[:, None]            # (R, Q)
    sd = np.sqrt(var)
    h = prob.y_mean + prob.y_scale * (mean + prob.beta * sd)
    pw = (prob.probs[None, :, None] * xi).reshape(R, -1)               # (R, Q)
    values = np.einsum("rq,rq->r", pw, h)
    return values, kd, v, var, h, pw


def acq_values(prob, xi):
    """Acquisition value for each distribution in a (R, C, A) batch."""
    xi = np.ascontiguousarray(xi, dtype=float)
    return _forward(prob, xi)[0]


def acq_values_grads(prob, xi):
    """Values (R,) and gradients (R, C, A) with respect to the raw distribution entries."""
    if prob.literal:
        raise ValueError("analytic gradients need the squared-exponential kernel")
    xi = np.ascontiguousarray(xi, dtype=float)
    R, C, A = xi.shape
    values, kd, v, var, h, pw = _forward(prob, xi)

    inv_sd = np.zeros_like(var)
    np.divide(1.0, np.sqrt(var), out=inv_sd, where=var > VAR_FLOOR)
    coef = pw * inv_sd                                                 # (R, Q)
    u = prob.vt.T @ coef.T + v * coef.sum(axis=1)[None, :]             # (n, R)
    kinv_u = solve_triangular(prob.chol, u, lower=True, trans="T", check_finite=False)
    g_d = prob.y_scale * (pw.sum(axis=1)[:, None] * prob.alpha[None, :] - prob.beta * kinv_u.T)  # (R, n)

    gk = g_d[:, :, None] * kd                                          # (R, n, C)
    G = gk.sum(axis=1)                                                 # (R, C)
    weighted = np.einsum("rnc,nca->rca", gk, prob.train_dists)
    scale = prob.output_scale / prob.lengthscale**2
    grads = prob.probs[None, :, None] * h.reshape(R, C, A) - scale * (xi * G[:, :, None] - weighted)
    return values, grads


def softmax(theta):
    e = np.exp(theta - theta.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def adam_ascent(prob, theta0, steps, lr, beta1, beta2, eps):
    """Adam ascent on logits for every restart, keeping each restart's best iterate.

    Returns ``(best_theta, best_value)``; restarts whose objective turned
    non-finite report ``-inf``.
    """
    theta = np.array(theta0, dtype=float, copy=True)
    R = theta.shape[0]
    m = np.zeros_like(theta)
    s = np.zeros_like(theta)
    best_theta = theta.copy()
    best_val = np.full(R, -np.inf)
    alive = np.ones(R, dtype=bool)
    for t in range(steps + 1):
        xi = softmax(theta)
        if t == steps:
            vals = acq_values(prob, xi)
        else:
            vals, g_xi = acq_values_grads(prob, xi)
        bad = ~np.isfinite(vals)
        alive &= ~bad
        improved = alive & (vals > best_val)
        best_val[improved] = vals[improved]
        best_theta[improved] = theta[improved]
        if t == steps or not alive.any():
            break
        g = xi * (g_xi - np.sum(xi * g_xi, axis=-1, keepdims=True))
        g[~alive] = 0.0
        m = beta1 * m + (1.0 - beta1) * g
        s = beta2 * s + (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1 ** (t + 1))
        shat = s / (1.0 - beta2 ** (t + 1))
        theta = theta + lr * mhat / (np.sqrt(shat) + eps)
    best_val[~alive] = -np.inf
    return best_theta, best_val
