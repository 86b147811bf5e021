# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: special functions and the fused evidential head.

Same contracts as ``_core_py``; see that module for argument shapes.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, exp, sqrt, fabs, lgamma as c_lgamma, M_PI, INFINITY

cnp.import_array()

EPS = 1e-6
REG_EQ4 = 0
REG_OMEGA = 1
N_PARTS = 5

cdef double _EPS = 1e-6


cdef inline double _digamma(double x) nogil:
    cdef double r = 0.0, inv, inv2
    while x < 10.0:
        r -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    return r + log(x) - 0.5 * inv - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (
        1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (
            691.0 / 32760.0 - inv2 / 12.0))))))


cdef inline double _trigamma(double x) nogil:
    cdef double r = 0.0, inv, inv2
    while x < 10.0:
        r += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    return r + inv + 0.5 * inv2 + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (
        1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (
            691.0 / 2730.0 - inv2 * 7.0 / 6.0))))))


cdef inline double _softplus(double x) nogil:
    if x > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def _map(f, x):
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    cdef double[::1] src = np.ascontiguousarray(arr).reshape(-1)
    cdef double[::1] dst = out.reshape(-1)
    cdef Py_ssize_t i
    cdef int which = f
    for i in range(src.shape[0]):
        if which == 0:
            dst[i] = c_lgamma(src[i])
        elif which == 1:
            dst[i] = _digamma(src[i])
        else:
            dst[i] = _trigamma(src[i])
    return out


def lgamma(x):
    return _map(0, x)


def digamma(x):
    return _map(1, x)


def trigamma(x):
    return _map(2, x)


def softplus(x):
    return np.logaddexp(0.0, x)


def winner_modes(gamma_xy, gt):
    cdef double[:, :, :, ::1] g = np.ascontiguousarray(gamma_xy, dtype=np.float64)
    cdef double[:, :, ::1] y = np.ascontiguousarray(gt, dtype=np.float64)
    cdef Py_ssize_t B = g.shape[0], K = g.shape[1], T = g.shape[2]
    out = np.zeros(B, dtype=np.int64)
    cdef long long[::1] o = out
    cdef Py_ssize_t b, k, t
    cdef double s, best, dx, dy
    for b in range(B):
        best = INFINITY
        for k in range(K):
            s = 0.0
            for t in range(T):
                dx = g[b, k, t, 0] - y[b, t, 0]
                dy = g[b, k, t, 1] - y[b, t, 1]
                s += sqrt(dx * dx + dy * dy)
            if s < best:
                best = s
                o[b] = k
    return out


def head_loss(raw, gt, int n_modes, int horizon, double lam1, double lam2, double lam3,
              double lam4, double nu0, double alpha0, int reg_mode):
    cdef double[:, ::1] r_ = np.ascontiguousarray(raw, dtype=np.float64)
    cdef double[:, :, ::1] y_ = np.ascontiguousarray(gt, dtype=np.float64)
    cdef Py_ssize_t B = r_.shape[0], K = n_modes, T = horizon
    cdef Py_ssize_t n_nig = K * T * 8
    if r_.shape[1] != n_nig + K or y_.shape[0] != B or y_.shape[1] != T or y_.shape[2] != 2:
        raise ValueError("head_loss: shape mismatch between raw outputs and ground truth")
    parts_arr = np.zeros((B, N_PARTS))
    grad_arr = np.zeros((B, n_nig + K))
    winners_arr = np.zeros(B, dtype=np.int64)
    cdef double[:, ::1] parts = parts_arr
    cdef double[:, ::1] grad = grad_arr
    cdef long long[::1] win = winners_arr
    cdef Py_ssize_t b, k, t, a, base, kb, j
    cdef double s, best, dx, dy, scale = 1.0 / (2.0 * T)
    cdef double gamma, nu, alpha, beta, yv, res, omega, dd, ah, lo, ld, ar, sgn, ev
    cdef double sn, sa, sb, g0, g1, g2, g3
    cdef double lg_a0 = c_lgamma(alpha0), half_log_pi = 0.5 * log(M_PI)
    cdef double S, Q, pt, inv_s1, St, pj, at, kl, sq, var_sum, dsq, dkl, pk
    cdef double lgK = c_lgamma(<double>K), tri_st, dig_st
    for b in range(B):
        best = INFINITY
        kb = 0
        for k in range(K):
            s = 0.0
            for t in range(T):
                base = (k * T + t) * 8
                dx = r_[b, base] - y_[b, t, 0]
                dy = r_[b, base + 4] - y_[b, t, 1]
                s += sqrt(dx * dx + dy * dy)
            if s < best:
                best = s
                kb = k
        win[b] = kb
        for t in range(T):
            for a in range(2):
                base = ((kb * T + t) * 2 + a) * 4
                gamma = r_[b, base]
                nu = _softplus(r_[b, base + 1]) + _EPS
                alpha = 1.0 + _softplus(r_[b, base + 2]) + _EPS
                beta = _softplus(r_[b, base + 3]) + _EPS
                sn = _sigmoid(r_[b, base + 1])
                sa = _sigmoid(r_[b, base + 2])
                sb = _sigmoid(r_[b, base + 3])
                yv = y_[b, t, a]
                res = yv - gamma
                omega = 2.0 * beta * (1.0 + nu)
                dd = res * res * nu + omega
                ah = alpha + 0.5
                lo = log(omega)
                ld = log(dd)
                parts[b, 0] += scale * (half_log_pi - 0.5 * log(nu) - alpha * lo + ah * ld
                                        + c_lgamma(alpha) - c_lgamma(ah))
                g0 = -2.0 * ah * res * nu / dd
                g1 = -0.5 / nu - 2.0 * alpha * beta / omega + ah * (res * res + 2.0 * beta) / dd
                g2 = ld - lo + _digamma(alpha) - _digamma(ah)
                g3 = -alpha / beta + 2.0 * ah * (1.0 + nu) / dd
                ar = fabs(res)
                sgn = 0.0
                if res > 0.0:
                    sgn = 1.0
                elif res < 0.0:
                    sgn = -1.0
                if reg_mode == REG_EQ4:
                    ev = 2.0 * nu + alpha
                    parts[b, 1] += scale * ar * ev
                    g0 += lam1 * (-sgn * ev)
                    g1 += lam1 * 2.0 * ar
                    g2 += lam1 * ar
                else:
                    parts[b, 1] += scale * ar * omega
                    g0 += lam1 * (-sgn * omega)
                    g1 += lam1 * 2.0 * beta * ar
                    g3 += lam1 * 2.0 * (1.0 + nu) * ar
                parts[b, 2] += scale * ((alpha - alpha0) * _digamma(alpha) - c_lgamma(alpha) + lg_a0
                                        + 0.5 * log(nu / nu0) + nu0 / (2.0 * nu) - 0.5)
                g1 += lam2 * (0.5 / nu - nu0 / (2.0 * nu * nu))
                g2 += lam2 * (alpha - alpha0) * _trigamma(alpha)
                grad[b, base] = scale * g0
                grad[b, base + 1] = scale * g1 * sn
                grad[b, base + 2] = scale * g2 * sa
                grad[b, base + 3] = scale * g3 * sb

        # Dirichlet over modes; evidence raw values sit after the NIG block.
        S = 0.0
        St = 0.0
        for k in range(K):
            at = 1.0 + _softplus(r_[b, n_nig + k])
            S += at
            St += 1.0 if k == kb else at
        Q = 0.0
        var_sum = 0.0
        sq = 0.0
        for k in range(K):
            pk = (1.0 + _softplus(r_[b, n_nig + k])) / S
            Q += pk * pk
            sq += ((1.0 if k == kb else 0.0) - pk) ** 2
        pt = (1.0 + _softplus(r_[b, n_nig + kb])) / S
        inv_s1 = 1.0 / (S + 1.0)
        sq += (1.0 - Q) * inv_s1
        parts[b, 3] = sq
        dig_st = _digamma(St)
        tri_st = _trigamma(St)
        kl = c_lgamma(St) - lgK
        for k in range(K):
            if k == kb:
                continue
            at = 1.0 + _softplus(r_[b, n_nig + k])
            kl += -c_lgamma(at) + (at - 1.0) * (_digamma(at) - dig_st)
        parts[b, 4] = kl
        for j in range(K):
            at = 1.0 + _softplus(r_[b, n_nig + j])
            pj = at / S
            dsq = (-2.0 * ((1.0 if j == kb else 0.0) - pt) / S
                   + 2.0 * (pj - Q) / S * (1.0 - inv_s1) - (1.0 - Q) * inv_s1 * inv_s1)
            dkl = 0.0
            if j != kb:
                dkl = (at - 1.0) * _trigamma(at) - (St - K) * tri_st
            grad[b, n_nig + j] = lam4 * (dsq + lam3 * dkl) * _sigmoid(r_[b, n_nig + j])
    return parts_arr, winners_arr, grad_arr
