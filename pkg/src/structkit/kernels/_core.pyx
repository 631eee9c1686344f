# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled mirrors of the py_ref kernels (same signatures, same semantics)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, fabs, log, log1p, sqrt, tanh

from structkit.errors import AllMaskedRow

cnp.import_array()

cdef double GELU_K = sqrt(2.0 / 3.14159265358979323846)
cdef double GELU_C = 0.044715
cdef double NEG_INF = -INFINITY


def masked_softmax(scores):
    cdef double[:, ::1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], m = s.shape[1], i, j
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double rowmax, total, v
    for i in range(n):
        rowmax = NEG_INF
        for j in range(m):
            if s[i, j] > rowmax:
                rowmax = s[i, j]
        if rowmax == NEG_INF:
            raise AllMaskedRow("softmax row entirely -inf")
        total = 0.0
        for j in range(m):
            v = exp(s[i, j] - rowmax)
            out[i, j] = v
            total += v
        for j in range(m):
            out[i, j] /= total
    return out_arr


def masked_softmax_bwd(probs, dprobs):
    cdef double[:, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef double[:, ::1] dp = np.ascontiguousarray(dprobs, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], m = p.shape[1], i, j
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double inner
    for i in range(n):
        inner = 0.0
        for j in range(m):
            inner += p[i, j] * dp[i, j]
        for j in range(m):
            out[i, j] = p[i, j] * (dp[i, j] - inner)
    return out_arr


def cross_entropy_rows(logits, targets):
    cdef double[:, ::1] l = np.ascontiguousarray(logits, dtype=np.float64)
    cdef long[::1] t = np.ascontiguousarray(targets, dtype=np.int64)
    cdef Py_ssize_t n = l.shape[0], k = l.shape[1], i, j
    losses_arr = np.empty(n, dtype=np.float64)
    dlogits_arr = np.empty((n, k), dtype=np.float64)
    cdef double[::1] losses = losses_arr
    cdef double[:, ::1] dl = dlogits_arr
    cdef double rowmax, z, v
    for i in range(n):
        rowmax = l[i, 0]
        for j in range(1, k):
            if l[i, j] > rowmax:
                rowmax = l[i, j]
        z = 0.0
        for j in range(k):
            v = exp(l[i, j] - rowmax)
            dl[i, j] = v
            z += v
        losses[i] = rowmax + log(z) - l[i, t[i]]
        for j in range(k):
            dl[i, j] /= z
        dl[i, t[i]] -= 1.0
    return losses_arr, dlogits_arr


def gelu(x):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = xv.shape[1], i, j
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double u, xx
    for i in range(n):
        for j in range(m):
            xx = xv[i, j]
            u = GELU_K * (xx + GELU_C * xx * xx * xx)
            out[i, j] = 0.5 * xx * (1.0 + tanh(u))
    return out_arr


def gelu_bwd(x, dy):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = xv.shape[1], i, j
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double u, t, du, xx
    for i in range(n):
        for j in range(m):
            xx = xv[i, j]
            u = GELU_K * (xx + GELU_C * xx * xx * xx)
            t = tanh(u)
            du = GELU_K * (1.0 + 3.0 * GELU_C * xx * xx)
            out[i, j] = dyv[i, j] * (0.5 * (1.0 + t)
                                     + 0.5 * xx * (1.0 - t * t) * du)
    return out_arr


def layernorm(x, gamma, beta, double eps):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(beta, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1], i, j
    y_arr = np.empty((n, d), dtype=np.float64)
    mean_arr = np.empty((n, 1), dtype=np.float64)
    rstd_arr = np.empty((n, 1), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef double[:, ::1] mean = mean_arr
    cdef double[:, ::1] rstd = rstd_arr
    cdef double mu, var, diff, r
    for i in range(n):
        mu = 0.0
        for j in range(d):
            mu += xv[i, j]
        mu /= d
        var = 0.0
        for j in range(d):
            diff = xv[i, j] - mu
            var += diff * diff
        var /= d
        r = 1.0 / sqrt(var + eps)
        mean[i, 0] = mu
        rstd[i, 0] = r
        for j in range(d):
            y[i, j] = (xv[i, j] - mu) * r * g[j] + b[j]
    return y_arr, mean_arr, rstd_arr


def layernorm_bwd(x, gamma, mean, rstd, dy):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[:, ::1] mu = np.ascontiguousarray(mean, dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(rstd, dtype=np.float64)
    cdef double[:, ::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1], i, j
    dx_arr = np.empty((n, d), dtype=np.float64)
    dgamma_arr = np.zeros(d, dtype=np.float64)
    dbeta_arr = np.zeros(d, dtype=np.float64)
    cdef double[:, ::1] dx = dx_arr
    cdef double[::1] dgamma = dgamma_arr
    cdef double[::1] dbeta = dbeta_arr
    cdef double m1, m2, xhat, dxhat
    for i in range(n):
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            xhat = (xv[i, j] - mu[i, 0]) * r[i, 0]
            dxhat = dyv[i, j] * g[j]
            m1 += dxhat
            m2 += dxhat * xhat
            dgamma[j] += dyv[i, j] * xhat
            dbeta[j] += dyv[i, j]
        m1 /= d
        m2 /= d
        for j in range(d):
            xhat = (xv[i, j] - mu[i, 0]) * r[i, 0]
            dxhat = dyv[i, j] * g[j]
            dx[i, j] = r[i, 0] * (dxhat - m1 - xhat * m2)
    return dx_arr, dgamma_arr, dbeta_arr


def bce_with_logits(z, y):
    cdef double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], m = zv.shape[1], i, j
    dz_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] dz = dz_arr
    cdef double total = 0.0, zz, sig
    cdef double inv_n = 1.0 / (n * m)
    for i in range(n):
        for j in range(m):
            zz = zv[i, j]
            total += (zz if zz > 0.0 else 0.0) - zz * yv[i, j] \
                + log1p(exp(-fabs(zz)))
            if zz >= 0.0:
                sig = 1.0 / (1.0 + exp(-zz))
            else:
                sig = 1.0 - 1.0 / (1.0 + exp(zz))
            dz[i, j] = (sig - yv[i, j]) * inv_n
    return total * inv_n, dz_arr


def adamw_update(value, grad, m, v, long step, double lr, double beta1,
                 double beta2, double eps, double weight_decay):
    cdef double[::1] val = value.reshape(-1)
    cdef double[::1] g = np.ascontiguousarray(grad, dtype=np.float64).reshape(-1)
    cdef double[::1] mv = m.reshape(-1)
    cdef double[::1] vv = v.reshape(-1)
    cdef Py_ssize_t n = val.shape[0], i
    cdef double bc1 = 1.0 - beta1 ** step
    cdef double bc2 = 1.0 - beta2 ** step
    cdef double mhat, vhat
    for i in range(n):
        mv[i] = beta1 * mv[i] + (1.0 - beta1) * g[i]
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * g[i] * g[i]
        mhat = mv[i] / bc1
        vhat = vv[i] / bc2
        val[i] -= lr * (mhat / (sqrt(vhat) + eps) + weight_decay * val[i])
