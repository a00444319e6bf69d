"""Numba-compiled versions of the kernels in ``_numpy``."""

from __future__ import annotations

import numpy as np
from numba import njit

_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True)
def layer_forward(x, ia, ib, V):
    n_rows = x.shape[0]
    width = ia.shape[0]
    y = np.empty((n_rows, width))
    for r in range(n_rows):
        for n in range(width):
            a = x[r, ia[n]]
            b = x[r, ib[n]]
            y[r, n] = ((1.0 - a) * ((1.0 - b) * V[n, 0] + b * V[n, 1])
                       + a * ((1.0 - b) * V[n, 2] + b * V[n, 3]))
    return y


@njit(cache=True)
def layer_backward(x, ia, ib, V, dy):
    n_rows, n_in = x.shape
    width = ia.shape[0]
    dx = np.zeros((n_rows, n_in))
    M = np.zeros((width, 4))
    edge_sq = 0.0
    for r in range(n_rows):
        for n in range(width):
            a = x[r, ia[n]]
            b = x[r, ib[n]]
            g = dy[r, n]
            da = g * ((1.0 - b) * (V[n, 2] - V[n, 0]) + b * (V[n, 3] - V[n, 1]))
            db = g * ((1.0 - a) * (V[n, 1] - V[n, 0]) + a * (V[n, 3] - V[n, 2]))
            dx[r, ia[n]] += da
            dx[r, ib[n]] += db
            edge_sq += da * da + db * db
            M[n, 0] += g * (1.0 - a) * (1.0 - b)
            M[n, 1] += g * (1.0 - a) * b
            M[n, 2] += g * a * (1.0 - b)
            M[n, 3] += g * a * b
    return dx, M, edge_sq


@njit(cache=True)
def eval_packed_words(words, gate, ra, rb):
    n_in, n_words = words.shape
    vals = np.empty((n_in + gate.shape[0], n_words), dtype=np.uint64)
    vals[:n_in] = words
    zero = np.uint64(0)
    for k in range(gate.shape[0]):
        # gate id - 1 holds the truth bits b00 b01 b10 b11 (msb first)
        t = gate[k] - 1
        m00 = _ONES if (t >> 3) & 1 else zero
        m01 = _ONES if (t >> 2) & 1 else zero
        m10 = _ONES if (t >> 1) & 1 else zero
        m11 = _ONES if t & 1 else zero
        i = n_in + k
        pa, pb = ra[k], rb[k]
        # branch-free minterm sum so the word loop vectorizes
        for w in range(n_words):
            a = vals[pa, w]
            b = vals[pb, w]
            vals[i, w] = ((~a & ~b & m00) | (~a & b & m01) | (a & ~b & m10) | (a & b & m11))
    return vals
