# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the per-round hot loops."""

import numpy as np

from libc.math cimport exp


def expansion_predict(const double[:, ::1] points, const double[::1] coefs,
                      Py_ssize_t n, const double[::1] x, double gamma):
    """sum_{j<n} coefs[j] * exp(-gamma * ||points[j] - x||^2)"""
    cdef Py_ssize_t j, k, d = x.shape[0]
    cdef double acc = 0.0, sq, diff
    with nogil:
        for j in range(n):
            sq = 0.0
            for k in range(d):
                diff = points[j, k] - x[k]
                sq += diff * diff
            acc += coefs[j] * exp(-gamma * sq)
    return acc


def gram_row(const double[:, ::1] points, Py_ssize_t n, const double[::1] x,
             double gamma, double[::1] out):
    cdef Py_ssize_t j, k, d = x.shape[0]
    cdef double sq, diff
    with nogil:
        for j in range(n):
            sq = 0.0
            for k in range(d):
                diff = points[j, k] - x[k]
                sq += diff * diff
            out[j] = exp(-gamma * sq)


def rff_features(const double[:, ::1] freqs, const double[::1] phases,
                 const double[::1] x, double scale, double[::1] out):
    """out[j] = scale * cos(freqs[j] . x + phases[j])"""
    cdef Py_ssize_t j, k, D = freqs.shape[0], d = x.shape[0]
    cdef double s
    with nogil:
        for j in range(D):
            s = phases[j]
            for k in range(d):
                s += freqs[j, k] * x[k]
            out[j] = s
    # numpy's SIMD cosine is an order of magnitude faster than scalar libm cos
    arr = np.asarray(out)
    np.cos(arr, out=arr)
    with nogil:
        for j in range(D):
            out[j] *= scale
