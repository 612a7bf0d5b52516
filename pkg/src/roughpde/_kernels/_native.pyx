# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise-scan kernels (see reference.py for the contract)."""

from libc.math cimport pow, sqrt

import numpy as np

BACKEND = "native"


cdef double[::1] _lag_powers(double dt, double expo, Py_ssize_t max_lag):
    out = np.empty(max_lag, dtype=np.float64)
    cdef double[::1] view = out
    cdef Py_ssize_t lag
    for lag in range(max_lag):
        view[lag] = pow(dt * (lag + 1), expo)
    return view


def path_holder_max(double[:, ::1] values, double dt, double gamma,
                    Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t i, j, k, m = values.shape[1]
    cdef double best = 0.0, acc, diff, ratio
    cdef double[::1] pw = _lag_powers(dt, gamma, i1 - i0 if i1 > i0 else 1)
    with nogil:
        for i in range(i0, i1):
            for j in range(i + 1, i1 + 1):
                acc = 0.0
                for k in range(m):
                    diff = values[j, k] - values[i, k]
                    acc += diff * diff
                ratio = sqrt(acc) / pw[j - i - 1]
                if ratio > best:
                    best = ratio
    return best


def remainder_holder_max(double[:, ::1] y, double[:, :, ::1] yp,
                         double[:, ::1] x, double dt, double expo,
                         Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t i, j, k, l
    cdef Py_ssize_t m = y.shape[1], d = x.shape[1]
    cdef double best = 0.0, acc, rem, ratio
    cdef double[::1] pw = _lag_powers(dt, expo, i1 - i0 if i1 > i0 else 1)
    with nogil:
        for i in range(i0, i1):
            for j in range(i + 1, i1 + 1):
                acc = 0.0
                for k in range(m):
                    rem = y[j, k] - y[i, k]
                    for l in range(d):
                        rem -= yp[i, k, l] * (x[j, l] - x[i, l])
                    acc += rem * rem
                ratio = sqrt(acc) / pw[j - i - 1]
                if ratio > best:
                    best = ratio
    return best


def second_holder_max(double[:, ::1] x, double[:, :, ::1] pfx,
                      double[:, :, ::1] qfx, double dt, double expo,
                      Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t i, j, k, l, d = x.shape[1]
    cdef double best = 0.0, acc, entry, ratio
    cdef double[::1] pw = _lag_powers(dt, expo, i1 - i0 if i1 > i0 else 1)
    with nogil:
        for i in range(i0, i1):
            for j in range(i + 1, i1 + 1):
                acc = 0.0
                for k in range(d):
                    for l in range(d):
                        entry = (qfx[j, k, l] - qfx[i, k, l]
                                 + pfx[j, k, l] - pfx[i, k, l]
                                 - x[i, k] * (x[j, l] - x[i, l]))
                        acc += entry * entry
                ratio = sqrt(acc) / pw[j - i - 1]
                if ratio > best:
                    best = ratio
    return best


def control_w_dp(double[:, ::1] x, double[:, :, ::1] pfx,
                 double[:, :, ::1] qfx, double dt,
                 double gamma, double eta, Py_ssize_t i0, Py_ssize_t i1):
    cdef double p = 1.0 / (gamma - eta)
    cdef double q = 0.5 * p
    cdef Py_ssize_t n1 = i1 - i0 + 1
    cdef Py_ssize_t i, j, k, l, d = x.shape[1]
    cdef double xn, xxn, entry, cost, cand, colbest
    cdef double[::1] pw = _lag_powers(dt, -eta * p, i1 - i0 if i1 > i0 else 1)
    best_arr = np.empty(n1, dtype=np.float64)
    cdef double[::1] best = best_arr
    best[0] = 0.0
    with nogil:
        for j in range(i0 + 1, i1 + 1):
            colbest = -1.0
            for i in range(i0, j):
                xn = 0.0
                for k in range(d):
                    entry = x[j, k] - x[i, k]
                    xn += entry * entry
                xxn = 0.0
                for k in range(d):
                    for l in range(d):
                        entry = (qfx[j, k, l] - qfx[i, k, l]
                                 + pfx[j, k, l] - pfx[i, k, l]
                                 - x[i, k] * (x[j, l] - x[i, l]))
                        xxn += entry * entry
                cost = pw[j - i - 1] * (pow(sqrt(xn), p) + pow(sqrt(xxn), q))
                cand = best[i - i0] + cost
                if cand > colbest:
                    colbest = cand
            best[j - i0] = colbest
    return best[n1 - 1]
