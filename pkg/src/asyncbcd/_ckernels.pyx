# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels; mirror ``_pykernels`` operation for operation."""

from libc.math cimport sqrt, fabs
from libc.stdint cimport int64_t

NAME = "cython"


def quad_eval(const double[:, ::1] Q, const double[::1] r, const double[::1] x, double[::1] grad):
    cdef Py_ssize_t n = x.shape[0], k, l
    cdef double acc, f = 0.0
    with nogil:
        for k in range(n):
            acc = 0.0
            for l in range(n):
                acc += Q[k, l] * x[l]
            grad[k] = acc + r[k]
            f += x[k] * (0.5 * acc + r[k])
    return f


def agent_updates(const double[:, ::1] Q, const double[::1] r, const double[::1] lower,
                  const double[::1] upper, const Py_ssize_t[::1] offsets, const double[::1] gammas,
                  const double[:, ::1] copies, double[::1] x, const unsigned char[::1] active,
                  double[::1] steps, double[::1] grad_dot, double[::1] step_sq,
                  double[::1] grad_scale):
    cdef Py_ssize_t N = gammas.shape[0], n = x.shape[0], i, k, l
    cdef double acc, g, xk, u, s, ip, sq, sc, gi
    with nogil:
        for i in range(N):
            ip = 0.0
            sq = 0.0
            sc = 0.0
            for k in range(offsets[i], offsets[i + 1]):
                steps[k] = 0.0
            if active[i]:
                gi = gammas[i]
                for k in range(offsets[i], offsets[i + 1]):
                    acc = 0.0
                    for l in range(n):
                        acc += Q[k, l] * copies[i, l]
                    g = acc + r[k]
                    xk = copies[i, k]
                    u = xk - gi * g
                    if u < lower[k]:
                        u = lower[k]
                    elif u > upper[k]:
                        u = upper[k]
                    s = u - xk
                    x[k] = u
                    steps[k] = s
                    ip += s * g
                    sq += s * s
                    sc += (fabs(g) + 2.0 * fabs(s) / gi) * (fabs(xk) + fabs(u) + gi * fabs(g))
            grad_dot[i] = ip
            step_sq[i] = sq
            grad_scale[i] = sc


def deliver(double[:, ::1] copies, const double[::1] x, const Py_ssize_t[::1] offsets,
            const unsigned char[:, ::1] arrivals, int64_t[:, ::1] stamps, int64_t t_new):
    cdef Py_ssize_t N = arrivals.shape[0], i, j, k
    with nogil:
        for i in range(N):
            for j in range(N):
                if i == j or arrivals[i, j]:
                    for k in range(offsets[j], offsets[j + 1]):
                        copies[i, k] = x[k]
                    stamps[i, j] = t_new


def residual_sq(const double[::1] x, const double[::1] grad, const double[::1] lower,
                const double[::1] upper, const Py_ssize_t[::1] offsets, const double[::1] gammas,
                double[::1] out_scaled, double[::1] out_unscaled):
    cdef Py_ssize_t N = gammas.shape[0], i, k
    cdef double a, b, xk, u, v, d
    with nogil:
        for i in range(N):
            a = 0.0
            b = 0.0
            for k in range(offsets[i], offsets[i + 1]):
                xk = x[k]
                u = xk - gammas[i] * grad[k]
                if u < lower[k]:
                    u = lower[k]
                elif u > upper[k]:
                    u = upper[k]
                d = u - xk
                a += d * d
                v = xk - grad[k]
                if v < lower[k]:
                    v = lower[k]
                elif v > upper[k]:
                    v = upper[k]
                d = v - xk
                b += d * d
            out_scaled[i] = a
            out_unscaled[i] = b


def disagreement(const double[:, ::1] copies, const double[::1] x):
    cdef Py_ssize_t N = copies.shape[0], n = x.shape[0], i, k
    cdef double acc, d, worst = 0.0
    with nogil:
        for i in range(N):
            acc = 0.0
            for k in range(n):
                d = x[k] - copies[i, k]
                acc += d * d
            if acc > worst:
                worst = acc
    return sqrt(worst)
