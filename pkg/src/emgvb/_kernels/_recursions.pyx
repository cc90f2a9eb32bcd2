# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled conditional-variance recursions (see ``_recursions_python``)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, isfinite

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453
cdef double SQRT2_OV_PI = 0.79788456080286541


cdef Py_ssize_t _first_bad(const double[:, ::1] sigma2):
    cdef Py_ssize_t s, t, first = -1
    cdef Py_ssize_t n_draws = sigma2.shape[0], n = sigma2.shape[1]
    cdef double v
    for s in range(n_draws):
        for t in range(n):
            v = sigma2[s, t]
            if not (isfinite(v) and v > 0):
                if first < 0 or t < first:
                    first = t
                break
    return first


def gjr_recursion(const double[::1] omega, const double[::1] alpha, const double[::1] gamma,
                  const double[:, ::1] beta, const double[::1] resids, double backcast,
                  double[:, ::1] sigma2):
    cdef Py_ssize_t n_draws = sigma2.shape[0], n = resids.shape[0]
    cdef Py_ssize_t q = beta.shape[1]
    cdef Py_ssize_t s, t
    cdef double r, v, lag2
    for s in range(n_draws):
        sigma2[s, 0] = backcast
        for t in range(1, n):
            r = resids[t - 1]
            if r < 0:
                v = omega[s] + (alpha[s] + gamma[s]) * (r * r)
            else:
                v = omega[s] + alpha[s] * (r * r)
            if q >= 1:
                v = v + beta[s, 0] * sigma2[s, t - 1]
            if q >= 2:
                lag2 = sigma2[s, t - 2] if t >= 2 else backcast
                v = v + beta[s, 1] * lag2
            sigma2[s, t] = v
    return _first_bad(sigma2)


def egarch_recursion(const double[::1] omega, const double[::1] alpha, const double[::1] gamma,
                     const double[:, ::1] beta, const double[::1] resids, double backcast,
                     double[:, ::1] sigma2):
    cdef Py_ssize_t n_draws = sigma2.shape[0], n = resids.shape[0]
    cdef Py_ssize_t q = beta.shape[1]
    cdef Py_ssize_t s, t
    cdef double lnb = log(backcast)
    cdef double z, v, prev, prev2
    for s in range(n_draws):
        prev = lnb
        prev2 = lnb
        sigma2[s, 0] = backcast
        for t in range(1, n):
            z = resids[t - 1] * exp(-0.5 * prev)
            v = omega[s] + alpha[s] * (fabs(z) - SQRT2_OV_PI) + gamma[s] * z
            if q >= 1:
                v = v + beta[s, 0] * prev
            if q >= 2:
                v = v + beta[s, 1] * prev2
            prev2 = prev
            prev = v
            sigma2[s, t] = exp(v)
    return _first_bad(sigma2)


def figarch_weights(const double[::1] phi, const double[::1] d, const double[::1] beta, Py_ssize_t truncation):
    cdef Py_ssize_t n_draws = phi.shape[0]
    cdef Py_ssize_t s, i
    cdef double delta, delta_new
    out = np.empty((n_draws, truncation))
    cdef double[:, ::1] lam = out
    for s in range(n_draws):
        delta = d[s]
        lam[s, 0] = phi[s] - beta[s] + d[s]
        for i in range(1, truncation):
            delta_new = (i - d[s]) / (i + 1) * delta
            lam[s, i] = beta[s] * lam[s, i - 1] + delta_new - phi[s] * delta
            delta = delta_new
    return out


def gaussian_loglik_rows(const double[::1] resids, const double[:, ::1] sigma2):
    cdef Py_ssize_t n_draws = sigma2.shape[0], n = sigma2.shape[1]
    cdef Py_ssize_t s, t
    cdef double acc, r
    out = np.empty(n_draws)
    cdef double[::1] res = out
    for s in range(n_draws):
        acc = 0.0
        for t in range(n):
            r = resids[t]
            acc += LOG_2PI + log(sigma2[s, t]) + r * r / sigma2[s, t]
        res[s] = -0.5 * acc
    return out
