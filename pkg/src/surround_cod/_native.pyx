# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for pairwise Euclidean distance sums and gradients.

Mirrors the contract of `surround_cod._pairwise_np`; index arrays must
contain unique row indices into `feats`.
"""

from libc.math cimport sqrt


def pair_sum(const double[:, ::1] feats,
             const long long[::1] idx_a,
             const long long[::1] idx_b):
    """Sum of ||feats[a] - feats[b]|| over the full (a, b) index product."""
    cdef Py_ssize_t na = idx_a.shape[0]
    cdef Py_ssize_t nb = idx_b.shape[0]
    cdef Py_ssize_t dim = feats.shape[1]
    cdef Py_ssize_t i, j, d, a, b
    cdef double total = 0.0
    cdef double acc, diff
    for i in range(na):
        a = <Py_ssize_t> idx_a[i]
        for j in range(nb):
            b = <Py_ssize_t> idx_b[j]
            acc = 0.0
            for d in range(dim):
                diff = feats[a, d] - feats[b, d]
                acc += diff * diff
            total += sqrt(acc)
    return total


def pair_grad(const double[:, ::1] feats,
              const long long[::1] idx_a,
              const long long[::1] idx_b,
              double coef,
              double[:, ::1] grad):
    """Accumulate coef * d/dfeats of pair_sum into `grad` (same shape as feats).

    Zero-distance pairs contribute nothing (subgradient 0).
    """
    cdef Py_ssize_t na = idx_a.shape[0]
    cdef Py_ssize_t nb = idx_b.shape[0]
    cdef Py_ssize_t dim = feats.shape[1]
    cdef Py_ssize_t i, j, d, a, b
    cdef double acc, diff, scale
    for i in range(na):
        a = <Py_ssize_t> idx_a[i]
        for j in range(nb):
            b = <Py_ssize_t> idx_b[j]
            acc = 0.0
            for d in range(dim):
                diff = feats[a, d] - feats[b, d]
                acc += diff * diff
            if acc == 0.0:
                continue
            scale = coef / sqrt(acc)
            for d in range(dim):
                diff = (feats[a, d] - feats[b, d]) * scale
                grad[a, d] += diff
                grad[b, d] -= diff
