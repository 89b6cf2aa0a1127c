# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-flow kernels: single-sample net passes and LID queries.

Mirrors the call surface of `_pure`; arithmetic differs from the numpy
backend only in summation order (agreement is checked in the test suite).
"""

import numpy as np

from libc.math cimport exp, log, sqrt

DIST_FLOOR = 1e-12
LID_CAP = 1e6

cdef double _DIST_FLOOR = 1e-12
cdef double _LID_CAP = 1e6


cdef object _affine(double[::1] h, double[:, ::1] w, double[::1] b, bint relu):
    cdef Py_ssize_t n_in = w.shape[0]
    cdef Py_ssize_t n_out = w.shape[1]
    cdef object out_arr = np.empty(n_out, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r, j
    cdef double xr
    for j in range(n_out):
        out[j] = b[j]
    for r in range(n_in):
        xr = h[r]
        if xr != 0.0:
            for j in range(n_out):
                out[j] += xr * w[r, j]
    if relu:
        for j in range(n_out):
            if out[j] < 0.0:
                out[j] = 0.0
    return out_arr


cdef void _softmax_inplace(double[::1] z):
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t j
    cdef double m = z[0]
    cdef double s = 0.0
    for j in range(1, n):
        if z[j] > m:
            m = z[j]
    for j in range(n):
        z[j] = exp(z[j] - m)
        s += z[j]
    for j in range(n):
        z[j] /= s


def forward_trace(list weights, list biases, x):
    """One sample through the net: (softmax probs, list of hidden activations)."""
    cdef object h = np.ascontiguousarray(x, dtype=np.float64)
    cdef list trace = []
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t i
    for i in range(last):
        h = _affine(h, weights[i], biases[i], True)
        trace.append(h)
    cdef object logits = _affine(h, weights[last], biases[last], False)
    _softmax_inplace(logits)
    return logits, trace


cdef object _backprop(list weights, list acts, object delta_arr):
    cdef Py_ssize_t i, r, j
    cdef double s
    cdef double[:, ::1] w
    cdef double[::1] delta, nd, act
    cdef object nd_arr
    for i in range(len(weights) - 1, 0, -1):
        w = weights[i]
        delta = delta_arr
        act = acts[i]
        nd_arr = np.empty(w.shape[0], dtype=np.float64)
        nd = nd_arr
        for r in range(w.shape[0]):
            if act[r] > 0.0:
                s = 0.0
                for j in range(w.shape[1]):
                    s += w[r, j] * delta[j]
                nd[r] = s
            else:
                nd[r] = 0.0
        delta_arr = nd_arr
    w = weights[0]
    delta = delta_arr
    nd_arr = np.empty(w.shape[0], dtype=np.float64)
    nd = nd_arr
    for r in range(w.shape[0]):
        s = 0.0
        for j in range(w.shape[1]):
            s += w[r, j] * delta[j]
        nd[r] = s
    return nd_arr


def input_gradient(list weights, list biases, x, int y):
    """Gradient of the cross-entropy loss at label y with respect to the input."""
    cdef object h = np.ascontiguousarray(x, dtype=np.float64)
    cdef list acts = [h]
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t i
    for i in range(last):
        h = _affine(h, weights[i], biases[i], True)
        acts.append(h)
    cdef object probs = _affine(h, weights[last], biases[last], False)
    _softmax_inplace(probs)
    cdef object delta = probs.copy()
    delta[y] -= 1.0
    return probs, _backprop(weights, acts, delta)


def logit_value_grad(list weights, list biases, x, seed):
    """Value and input gradient of seed . logits (pre-softmax)."""
    cdef object h = np.ascontiguousarray(x, dtype=np.float64)
    cdef list acts = [h]
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t i
    for i in range(last):
        h = _affine(h, weights[i], biases[i], True)
        acts.append(h)
    cdef object logits = _affine(h, weights[last], biases[last], False)
    cdef object seed_arr = np.ascontiguousarray(seed, dtype=np.float64)
    cdef double value = float(logits @ seed_arr)
    return value, _backprop(weights, acts, seed_arr.copy())


cdef double _mle(double[::1] d):
    cdef Py_ssize_t k = d.shape[0]
    cdef Py_ssize_t i
    cdef double r_max = d[k - 1]
    cdef double s = 0.0
    for i in range(k):
        s += log(d[i] / r_max)
    s /= k
    if s == 0.0:
        return _LID_CAP
    s = -1.0 / s
    if s > _LID_CAP:
        return _LID_CAP
    return s


def lid_mle(distances):
    """MLE local intrinsic dimensionality over sorted ascending neighbor distances."""
    cdef double[::1] d = np.ascontiguousarray(distances, dtype=np.float64)
    return _mle(d)


def lid_query(query, refs, int k):
    """LID of `query` against reference rows: k nearest Euclidean distances, MLE.

    Exact-zero distances (self matches) are dropped; remaining distances are
    floored at DIST_FLOOR. If fewer than k nonzero distances exist the floor
    value pads the neighborhood.
    """
    cdef double[::1] q = np.ascontiguousarray(query, dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(refs, dtype=np.float64)
    cdef Py_ssize_t m = r.shape[0]
    cdef Py_ssize_t w = r.shape[1]
    cdef object best_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] best = best_arr
    cdef Py_ssize_t i, j, p, n_best = 0
    cdef double sq, diff
    for i in range(m):
        sq = 0.0
        for j in range(w):
            diff = r[i, j] - q[j]
            sq += diff * diff
        if sq <= 0.0:
            continue
        if n_best < k:
            p = n_best
            while p > 0 and best[p - 1] > sq:
                best[p] = best[p - 1]
                p -= 1
            best[p] = sq
            n_best += 1
        elif sq < best[k - 1]:
            p = k - 1
            while p > 0 and best[p - 1] > sq:
                best[p] = best[p - 1]
                p -= 1
            best[p] = sq
    cdef object d_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] d = d_arr
    cdef Py_ssize_t pad = k - n_best
    for i in range(pad):
        d[i] = _DIST_FLOOR
    for i in range(n_best):
        d[pad + i] = sqrt(best[i])
        if d[pad + i] < _DIST_FLOOR:
            d[pad + i] = _DIST_FLOOR
    return _mle(d)
