# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: distance reductions and piecewise-linear evaluation.

Mirrors the pure-numpy implementations in ``_kernels_py``; the two backends
must agree to float precision and are cross-checked in the test suite.
"""

from libc.math cimport fabs, sqrt

import numpy as np


def coord_value(const double[:] xs, double t, double scale):
    """scale * mean(|x - t|) over one coordinate column."""
    cdef Py_ssize_t i, n = xs.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += fabs(xs[i] - t)
    return scale * acc / n


def coord_value_batch(const double[:] xs, const double[::1] ts, double scale, double[::1] out):
    cdef Py_ssize_t i, j, n = xs.shape[0], m = ts.shape[0]
    cdef double acc, t
    for j in range(m):
        t = ts[j]
        acc = 0.0
        for i in range(n):
            acc += fabs(xs[i] - t)
        out[j] = scale * acc / n


def coord_subgrad(const double[:] xs, double t, double scale):
    """scale * mean(sign(t - x)); sign(0) = 0."""
    cdef Py_ssize_t i, n = xs.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        if t > xs[i]:
            acc += 1.0
        elif t < xs[i]:
            acc -= 1.0
    return scale * acc / n


def coord_subgrad_batch(const double[:] xs, const double[::1] ts, double scale, double[::1] out):
    cdef Py_ssize_t i, j, n = xs.shape[0], m = ts.shape[0]
    cdef double acc, t
    for j in range(m):
        t = ts[j]
        acc = 0.0
        for i in range(n):
            if t > xs[i]:
                acc += 1.0
            elif t < xs[i]:
                acc -= 1.0
        out[j] = scale * acc / n


def avg_l1(const double[:, ::1] pts, const double[::1] y, double scale):
    cdef Py_ssize_t i, j, n = pts.shape[0], d = pts.shape[1]
    cdef double acc = 0.0
    for i in range(n):
        for j in range(d):
            acc += fabs(pts[i, j] - y[j])
    return scale * acc / n


def avg_l2(const double[:, ::1] pts, const double[::1] y, double scale):
    cdef Py_ssize_t i, j, n = pts.shape[0], d = pts.shape[1]
    cdef double acc = 0.0, row, diff
    for i in range(n):
        row = 0.0
        for j in range(d):
            diff = pts[i, j] - y[j]
            row += diff * diff
        acc += sqrt(row)
    return scale * acc / n


def pwl_eval(const double[::1] a, const double[::1] b, double x):
    """max_k (a[k]*x + b[k]); arrays are non-empty."""
    cdef Py_ssize_t k, m = a.shape[0]
    cdef double best = a[0] * x + b[0], v
    for k in range(1, m):
        v = a[k] * x + b[k]
        if v > best:
            best = v
    return best


def pwl_eval_batch(const double[::1] a, const double[::1] b, const double[::1] xs, double[::1] out):
    cdef Py_ssize_t k, j, m = a.shape[0], t = xs.shape[0]
    cdef double best, v, x
    for j in range(t):
        x = xs[j]
        best = a[0] * x + b[0]
        for k in range(1, m):
            v = a[k] * x + b[k]
            if v > best:
                best = v
        out[j] = best


def pwl_eval_coords(const double[::1] a_flat, const double[::1] b_flat,
                    const long[::1] offsets, const double[::1] y, double[::1] out):
    """Evaluate one max-of-lines hypothesis per coordinate (CSR layout)."""
    cdef Py_ssize_t i, k, d = y.shape[0]
    cdef Py_ssize_t lo, hi
    cdef double best, v, x
    for i in range(d):
        lo = offsets[i]
        hi = offsets[i + 1]
        x = y[i]
        best = a_flat[lo] * x + b_flat[lo]
        for k in range(lo + 1, hi):
            v = a_flat[k] * x + b_flat[k]
            if v > best:
                best = v
        out[i] = best


def subset_min(const double[:, ::1] dists, const long[::1] idx, const long[::1] offsets,
               double fill, double norm, double[:, ::1] out):
    """Per subset j: out[p, j] = norm * min(dists[p, idx in subset]); empty -> norm*fill."""
    cdef Py_ssize_t p, j, k, np_ = dists.shape[0], ns = offsets.shape[0] - 1
    cdef Py_ssize_t lo, hi
    cdef double best, v
    for j in range(ns):
        lo = offsets[j]
        hi = offsets[j + 1]
        if hi == lo:
            for p in range(np_):
                out[p, j] = norm * fill
            continue
        for p in range(np_):
            best = dists[p, idx[lo]]
            for k in range(lo + 1, hi):
                v = dists[p, idx[k]]
                if v < best:
                    best = v
            out[p, j] = norm * best
