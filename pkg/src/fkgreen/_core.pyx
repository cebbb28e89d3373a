# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of _core_py: bridge bisection + power-law accumulation.

Same level-ordered normal layout as the numpy fallback, so both backends
produce matching results up to summation roundoff.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

cnp.import_array()


def build_bridges(cnp.ndarray[cnp.float64_t, ndim=2] normals not None):
    cdef Py_ssize_t n_paths = normals.shape[0]
    cdef Py_ssize_t m = normals.shape[1]
    cdef Py_ssize_t n = m + 1
    if n & (n - 1):
        raise ValueError(f"n_steps must be a power of two, got {n}")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gamma = np.zeros((n_paths, n + 1))
    cdef double[:, ::1] g = gamma
    cdef double[:, ::1] z = np.ascontiguousarray(normals)
    cdef Py_ssize_t j, i, step, half, offset, k
    cdef int level
    cdef double std
    with nogil:
        for j in range(n_paths):
            step = n
            level = 0
            offset = 0
            while step > 1:
                half = step / 2
                std = 0.5 * pow(2.0, -0.5 * level)
                k = 0
                i = half
                while i < n:
                    g[j, i] = 0.5 * (g[j, i - half] + g[j, i + half]) \
                        + std * z[j, offset + k]
                    k += 1
                    i += step
                offset += k
                level += 1
                step = half
    return gamma


def bridge_accumulate(normals, double eta, double etap, double tau,
                      amps, exps, centers, bint compute_min=False):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] z = \
        np.ascontiguousarray(normals, dtype=np.float64)
    cdef Py_ssize_t n_paths = z.shape[0]
    cdef Py_ssize_t n = z.shape[1] + 1
    if n & (n - 1):
        raise ValueError(f"n_steps must be a power of two, got {n}")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_arr = \
        np.ascontiguousarray(amps, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e_arr = \
        np.ascontiguousarray(exps, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c_arr = \
        np.ascontiguousarray(centers, dtype=np.float64)
    cdef Py_ssize_t n_terms = a_arr.shape[0]

    cdef cnp.ndarray[cnp.float64_t, ndim=1] avg = np.empty(n_paths)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qmin_arr = np.empty(
        n_paths if compute_min else 0)
    cdef double[::1] avg_v = avg
    cdef double[::1] qmin_v = qmin_arr
    cdef double[::1] a_v = a_arr
    cdef double[::1] e_v = e_arr
    cdef double[::1] c_v = c_arr
    cdef double[:, ::1] z_v = z

    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.zeros(n + 1)
    cdef double[::1] g = buf

    cdef Py_ssize_t j, i, k, t, step, half, offset
    cdef int level
    cdef double std, sqrt_tau, slope, qa, qb, qmid, acc, term, qmn, x

    sqrt_tau = sqrt(tau)
    slope = etap - eta

    with nogil:
        for j in range(n_paths):
            g[0] = 0.0
            g[n] = 0.0
            step = n
            level = 0
            offset = 0
            while step > 1:
                half = step / 2
                std = 0.5 * pow(2.0, -0.5 * level)
                k = 0
                i = half
                while i < n:
                    g[i] = 0.5 * (g[i - half] + g[i + half]) \
                        + std * z_v[j, offset + k]
                    k += 1
                    i += step
                offset += k
                level += 1
                step = half

            acc = 0.0
            qmn = eta
            qb = eta
            for i in range(n):
                qa = qb
                qb = eta + slope * ((i + 1.0) / n) + sqrt_tau * g[i + 1]
                if qb < qmn:
                    qmn = qb
                qmid = 0.5 * (qa + qb)
                term = 0.0
                for t in range(n_terms):
                    if a_v[t] == 0.0:
                        continue
                    if e_v[t] == 0.0:
                        term += a_v[t]
                    else:
                        x = fabs(qmid - c_v[t])
                        term += a_v[t] * pow(x, e_v[t])
                acc += term
            avg_v[j] = acc / n
            if compute_min:
                qmin_v[j] = qmn

    return avg, (qmin_arr if compute_min else None)
