"""Pure-numpy layer and circuit kernels."""

from __future__ import annotations

import numpy as np

_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


def layer_forward(x, ia, ib, V):
    a = x[:, ia]
    b = x[:, ib]
    # (1-a)(1-b)V00 + (1-a)b V01 + a(1-b) V10 + ab V11
    return ((1.0 - a) * ((1.0 - b) * V[:, 0] + b * V[:, 1])
            + a * ((1.0 - b) * V[:, 2] + b * V[:, 3]))


def layer_backward(x, ia, ib, V, dy):
    """Returns (dx, M, edge_sq).

    dx is the gradient w.r.t. the layer input, M[n, c] the sum over rows of
    dy * e_c(a, b), and edge_sq the squared norm of the per-edge partials
    before they are scattered onto shared predecessors.
    """
    n_rows, n_in = x.shape
    a = x[:, ia]
    b = x[:, ib]
    da = dy * ((1.0 - b) * (V[:, 2] - V[:, 0]) + b * (V[:, 3] - V[:, 1]))
    db = dy * ((1.0 - a) * (V[:, 1] - V[:, 0]) + a * (V[:, 3] - V[:, 2]))
    base = (np.arange(n_rows) * n_in)[:, None]
    idx = np.stack([base + ia[None, :], base + ib[None, :]], axis=-1).ravel()
    w = np.stack([da, db], axis=-1).ravel()
    dx = np.bincount(idx, weights=w, minlength=n_rows * n_in).reshape(n_rows, n_in)
    M = np.empty((V.shape[0], 4))
    M[:, 0] = np.sum(dy * (1.0 - a) * (1.0 - b), axis=0)
    M[:, 1] = np.sum(dy * (1.0 - a) * b, axis=0)
    M[:, 2] = np.sum(dy * a * (1.0 - b), axis=0)
    M[:, 3] = np.sum(dy * a * b, axis=0)
    edge_sq = float(np.sum(da * da) + np.sum(db * db))
    return dx, M, edge_sq


def _apply_gate(g, a, b):
    if g == 1:
        return np.zeros_like(a)
    if g == 2:
        return a & b
    if g == 3:
        return a & ~b
    if g == 4:
        return a.copy()
    if g == 5:
        return ~a & b
    if g == 6:
        return b.copy()
    if g == 7:
        return a ^ b
    if g == 8:
        return a | b
    if g == 9:
        return ~(a | b)
    if g == 10:
        return ~(a ^ b)
    if g == 11:
        return ~b
    if g == 12:
        return a | ~b
    if g == 13:
        return ~a
    if g == 14:
        return ~a | b
    if g == 15:
        return ~(a & b)
    return np.full_like(a, _ONES)


def eval_packed_words(words, gate, ra, rb):
    """Evaluate nodes over packed words; ``words`` is (n_in, n_words) uint64.

    Refs index the concatenation [inputs, nodes]. Returns the full value table.
    """
    n_in, n_words = words.shape
    vals = np.empty((n_in + len(gate), n_words), dtype=np.uint64)
    vals[:n_in] = words
    for k in range(len(gate)):
        vals[n_in + k] = _apply_gate(int(gate[k]), vals[ra[k]], vals[rb[k]])
    return vals
