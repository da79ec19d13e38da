# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled acquisition hot loop.  Same API as ``mfbo._kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, isfinite, INFINITY
from scipy.linalg.cython_blas cimport dgemv, dtrsv

cnp.import_array()

cdef double VAR_FLOOR = 1e-12


cdef class _Problem:
    cdef double[:, :, ::1] td
    cdef double[:, ::1] chol
    cdef double[:, ::1] vt
    cdef double[::1] vnorm2
    cdef double[::1] palpha
    cdef double[::1] alpha
    cdef double[::1] probs
    cdef double kss, beta, y_mean, y_scale, s, ls
    cdef bint literal
    cdef Py_ssize_t n, C, A, Q
    # scratch
    cdef double[:, ::1] kd
    cdef double[::1] d, v, x, gd, coef, h
    cdef double[:, ::1] wsum
    cdef double[::1] G, vtv

    def __init__(self, prob):
        self.td = np.ascontiguousarray(prob.train_dists, dtype=np.float64)
        self.chol = np.ascontiguousarray(prob.chol, dtype=np.float64)
        self.vt = np.ascontiguousarray(prob.vt, dtype=np.float64)
        self.vnorm2 = np.ascontiguousarray(prob.vnorm2, dtype=np.float64)
        self.palpha = np.ascontiguousarray(prob.palpha, dtype=np.float64)
        self.alpha = np.ascontiguousarray(prob.alpha, dtype=np.float64)
        self.probs = np.ascontiguousarray(prob.probs, dtype=np.float64)
        self.kss = prob.kss
        self.beta = prob.beta
        self.y_mean = prob.y_mean
        self.y_scale = prob.y_scale
        self.s = prob.output_scale
        self.ls = prob.lengthscale
        self.literal = prob.literal
        self.n = self.td.shape[0]
        self.C = self.td.shape[1]
        self.A = self.td.shape[2]
        self.Q = self.C * self.A
        self.kd = np.empty((self.n, self.C))
        self.d = np.empty(self.n)
        self.v = np.empty(self.n)
        self.x = np.empty(self.n)
        self.gd = np.empty(self.n)
        self.coef = np.empty(self.Q)
        self.h = np.empty(self.Q)
        self.wsum = np.empty((self.C, self.A))
        self.G = np.empty(self.C)
        self.vtv = np.empty(self.Q)

    cdef double evaluate(self, double[:, ::1] xi, double[:, ::1] grad, bint want_grad) nogil:
        cdef Py_ssize_t n = self.n, C = self.C, A = self.A
        cdef Py_ssize_t i, j, k, c, a, q
        cdef double acc, sq, diff, vv, dalpha, var, sd, w, value, W, csum, gk, scale
        cdef double inv2l2 = 1.0 / (2.0 * self.ls * self.ls)
        cdef double inv2l = 1.0 / (2.0 * self.ls)
        cdef char up = b'U', trans_t = b'T', trans_n = b'N', nonunit = b'N'
        cdef int ni = <int>n, qi = <int>self.Q, one = 1
        cdef double d_one = 1.0, d_zero = 0.0

        for j in range(n):
            acc = 0.0
            for c in range(C):
                sq = 0.0
                for a in range(A):
                    diff = xi[c, a] - self.td[j, c, a]
                    sq = sq + diff * diff
                if self.literal:
                    self.kd[j, c] = exp(-sqrt(sq) * inv2l)
                else:
                    self.kd[j, c] = exp(-sq * inv2l2)
                acc = acc + self.kd[j, c]
            self.d[j] = self.s * acc

        # L v = d.  BLAS is column-major, so row-major L is seen as its transpose.
        vv = 0.0
        dalpha = 0.0
        for i in range(n):
            self.v[i] = self.d[i]
            dalpha = dalpha + self.d[i] * self.alpha[i]
        dtrsv(&up, &trans_t, &nonunit, &ni, &self.chol[0, 0], &ni, &self.v[0], &one)
        for i in range(n):
            vv = vv + self.v[i] * self.v[i]
        # vtv[q] = vt[q, :] . v
        dgemv(&trans_t, &ni, &qi, &d_one, &self.vt[0, 0], &ni, &self.v[0], &one, &d_zero, &self.vtv[0], &one)

        value = 0.0
        W = 0.0
        csum = 0.0
        for c in range(C):
            for a in range(A):
                q = c * A + a
                var = self.kss - (self.vnorm2[q] + 2.0 * self.vtv[q] + vv)
                if var < 0.0:
                    var = 0.0
                sd = sqrt(var)
                self.h[q] = self.y_mean + self.y_scale * (self.palpha[q] + dalpha + self.beta * sd)
                w = self.probs[c] * xi[c, a]
                value = value + w * self.h[q]
                W = W + w
                if var > VAR_FLOOR:
                    self.coef[q] = w / sd
                else:
                    self.coef[q] = 0.0
                csum = csum + self.coef[q]

        if not want_grad:
            return value

        # x = L^-T (csum * v + vt^T coef)
        for j in range(n):
            self.x[j] = self.v[j] * csum
        dgemv(&trans_n, &ni, &qi, &d_one, &self.vt[0, 0], &ni, &self.coef[0], &one, &d_one, &self.x[0], &one)
        dtrsv(&up, &trans_n, &nonunit, &ni, &self.chol[0, 0], &ni, &self.x[0], &one)
        for j in range(n):
            self.gd[j] = self.y_scale * (W * self.alpha[j] - self.beta * self.x[j])

        for c in range(C):
            self.G[c] = 0.0
            for a in range(A):
                self.wsum[c, a] = 0.0
        for j in range(n):
            for c in range(C):
                gk = self.gd[j] * self.kd[j, c]
                self.G[c] = self.G[c] + gk
                for a in range(A):
                    self.wsum[c, a] = self.wsum[c, a] + gk * self.td[j, c, a]
        scale = self.s / (self.ls * self.ls)
        for c in range(C):
            for a in range(A):
                grad[c, a] = self.probs[c] * self.h[c * A + a] - scale * (xi[c, a] * self.G[c] - self.wsum[c, a])
        return value


cdef inline void _softmax(double[:, ::1] theta, double[:, ::1] out) nogil:
    cdef Py_ssize_t c, a
    cdef double mx, tot
    for c in range(theta.shape[0]):
        mx = theta[c, 0]
        for a in range(1, theta.shape[1]):
            if theta[c, a] > mx:
                mx = theta[c, a]
        tot = 0.0
        for a in range(theta.shape[1]):
            out[c, a] = exp(theta[c, a] - mx)
            tot = tot + out[c, a]
        for a in range(theta.shape[1]):
            out[c, a] = out[c, a] / tot


def acq_values(prob, xi):
    cdef double[:, :, ::1] X = np.ascontiguousarray(xi, dtype=np.float64)
    cdef _Problem P = _Problem(prob)
    cdef Py_ssize_t r
    out = np.empty(X.shape[0])
    cdef double[::1] o = out
    cdef double[:, ::1] dummy = np.empty((1, 1))
    for r in range(X.shape[0]):
        o[r] = P.evaluate(X[r], dummy, False)
    return out


def acq_values_grads(prob, xi):
    if prob.literal:
        raise ValueError("analytic gradients need the squared-exponential kernel")
    cdef double[:, :, ::1] X = np.ascontiguousarray(xi, dtype=np.float64)
    cdef _Problem P = _Problem(prob)
    cdef Py_ssize_t r
    out = np.empty(X.shape[0])
    grads = np.empty_like(np.asarray(X))
    cdef double[::1] o = out
    cdef double[:, :, ::1] g = grads
    for r in range(X.shape[0]):
        o[r] = P.evaluate(X[r], g[r], True)
    return out, grads


def adam_ascent(prob, theta0, Py_ssize_t steps, double lr, double beta1, double beta2, double eps):
    if prob.literal:
        raise ValueError("analytic gradients need the squared-exponential kernel")
    cdef _Problem P = _Problem(prob)
    best_theta_arr = np.array(theta0, dtype=np.float64, order="C", copy=True)
    cdef double[:, :, ::1] best_theta = best_theta_arr
    cdef Py_ssize_t R = best_theta.shape[0], C = best_theta.shape[1], A = best_theta.shape[2]
    best_val_arr = np.full(R, -np.inf)
    cdef double[::1] best_val = best_val_arr
    cdef double[:, ::1] theta = np.empty((C, A))
    cdef double[:, ::1] xi = np.empty((C, A))
    cdef double[:, ::1] g = np.empty((C, A))
    cdef double[:, ::1] m = np.empty((C, A))
    cdef double[:, ::1] s = np.empty((C, A))
    cdef Py_ssize_t r, t, c, a
    cdef double val, dot, gt, mhat, shat, b1t, b2t
    cdef bint last

    with nogil:
        for r in range(R):
            for c in range(C):
                for a in range(A):
                    theta[c, a] = best_theta[r, c, a]
                    m[c, a] = 0.0
                    s[c, a] = 0.0
            b1t = 1.0
            b2t = 1.0
            for t in range(steps + 1):
                last = t == steps
                _softmax(theta, xi)
                val = P.evaluate(xi, g, not last)
                if not isfinite(val):
                    best_val[r] = -INFINITY
                    break
                if val > best_val[r]:
                    best_val[r] = val
                    for c in range(C):
                        for a in range(A):
                            best_theta[r, c, a] = theta[c, a]
                if last:
                    break
                b1t = b1t * beta1
                b2t = b2t * beta2
                for c in range(C):
                    dot = 0.0
                    for a in range(A):
                        dot = dot + xi[c, a] * g[c, a]
                    for a in range(A):
                        gt = xi[c, a] * (g[c, a] - dot)
                        m[c, a] = beta1 * m[c, a] + (1.0 - beta1) * gt
                        s[c, a] = beta2 * s[c, a] + (1.0 - beta2) * gt * gt
                        mhat = m[c, a] / (1.0 - b1t)
                        shat = s[c, a] / (1.0 - b2t)
                        theta[c, a] = theta[c, a] + lr * mhat / (sqrt(shat) + eps)
    return best_theta_arr, best_val_arr
