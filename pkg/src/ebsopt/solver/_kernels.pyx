# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simplex hot kernels: tableau pivot, leaving-row scan, dual ratio
test. Fused single-pass loops; semantics identical to _kernels_py."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def pivot(cnp.float64_t[:, ::1] T, cnp.float64_t[::1] d, Py_ssize_t r, Py_ssize_t e):
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t n = T.shape[1]
    cdef Py_ssize_t i, j
    cdef double alpha = T[r, e]
    cdef double factor, de

    for j in range(n):
        T[r, j] /= alpha
    for i in range(m):
        if i == r:
            continue
        factor = T[i, e]
        if factor != 0.0:
            for j in range(n):
                T[i, j] -= factor * T[r, j]
    de = d[e]
    if de != 0.0:
        for j in range(n):
            d[j] -= de * T[r, j]
    for i in range(m):
        T[i, e] = 0.0
    T[r, e] = 1.0
    d[e] = 0.0


def most_violated_row(cnp.float64_t[::1] xB, cnp.float64_t[::1] basis_lo,
                      cnp.float64_t[::1] basis_hi, double tol):
    cdef Py_ssize_t m = xB.shape[0]
    cdef Py_ssize_t i, best = -1
    cdef double v, worst = tol
    for i in range(m):
        v = basis_lo[i] - xB[i]
        if xB[i] - basis_hi[i] > v:
            v = xB[i] - basis_hi[i]
        if v > worst:
            worst = v
            best = i
    return best


def dual_ratio_entering(cnp.float64_t[::1] alphas, cnp.float64_t[::1] d,
                        cnp.int8_t[::1] status, double piv_tol, bint bland):
    cdef Py_ssize_t n = alphas.shape[0]
    cdef Py_ssize_t j, best = -1
    cdef double a, ratio
    cdef double best_ratio = 0.0
    cdef double best_alpha = 0.0
    cdef bint ok

    for j in range(n):
        a = alphas[j]
        if status[j] == 0:
            ok = a > piv_tol
        elif status[j] == 1:
            ok = a < -piv_tol
        elif status[j] == 3:
            ok = a > piv_tol or a < -piv_tol
        else:
            ok = False
        if not ok:
            continue
        ratio = d[j] / a
        if ratio < 0.0:
            ratio = 0.0
        if best < 0:
            best = j
            best_ratio = ratio
            best_alpha = a if a > 0 else -a
            if bland and ratio <= 1e-9:
                return best
            continue
        if bland:
            if ratio < best_ratio - 1e-9:
                best = j
                best_ratio = ratio
        else:
            a = a if a > 0 else -a
            if ratio < best_ratio or (ratio == best_ratio and a > best_alpha):
                best = j
                best_ratio = ratio
                best_alpha = a
    return best
