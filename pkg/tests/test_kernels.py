"""The numba and numpy kernel paths must agree."""

import numpy as np
import pytest

from dlgn import kernels
from dlgn.kernels import numpy_impl

nb = kernels.numba_impl
needs_numba = pytest.mark.skipif(nb is None, reason="numba path disabled")


def _layer(rng, rows=17, prev=23, width=31):
    x = rng.random((rows, prev))
    ia = rng.integers(0, prev, size=width).astype(np.int64)
    ib = rng.integers(0, prev, size=width).astype(np.int64)
    V = rng.random((width, 4))
    dy = rng.normal(size=(rows, width))
    return x, ia, ib, V, dy


def test_numpy_forward_reference(rng):
    x, ia, ib, V, _ = _layer(rng)
    a, b = x[:, ia], x[:, ib]
    ref = (1 - a) * (1 - b) * V[:, 0] + (1 - a) * b * V[:, 1] + a * (1 - b) * V[:, 2] + a * b * V[:, 3]
    np.testing.assert_allclose(numpy_impl.layer_forward(x, ia, ib, V), ref, atol=1e-14)


def test_numpy_backward_finite_difference(rng):
    x, ia, ib, V, dy = _layer(rng, rows=3, prev=5, width=6)
    dx, M, edge_sq = numpy_impl.layer_backward(x, ia, ib, V, dy)
    h = 1e-6
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            xp, xm = x.copy(), x.copy()
            xp[i, j] += h
            xm[i, j] -= h
            fd = np.sum(dy * (numpy_impl.layer_forward(xp, ia, ib, V)
                              - numpy_impl.layer_forward(xm, ia, ib, V))) / (2 * h)
            assert abs(dx[i, j] - fd) < 1e-8
    for n in range(V.shape[0]):
        for c in range(4):
            Vp, Vm = V.copy(), V.copy()
            Vp[n, c] += h
            Vm[n, c] -= h
            fd = np.sum(dy * (numpy_impl.layer_forward(x, ia, ib, Vp)
                              - numpy_impl.layer_forward(x, ia, ib, Vm))) / (2 * h)
            assert abs(M[n, c] - fd) < 1e-8
    assert edge_sq >= 0


@needs_numba
def test_forward_backends_agree(rng):
    x, ia, ib, V, dy = _layer(rng)
    np.testing.assert_allclose(nb.layer_forward(x, ia, ib, V),
                               numpy_impl.layer_forward(x, ia, ib, V), atol=1e-13)


@needs_numba
def test_backward_backends_agree(rng):
    x, ia, ib, V, dy = _layer(rng)
    for got, want in zip(nb.layer_backward(x, ia, ib, V, dy),
                         numpy_impl.layer_backward(x, ia, ib, V, dy)):
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


@needs_numba
def test_packed_backends_agree(rng):
    from helpers import random_circuit
    from dlgn.circuit import pack_rows
    c = random_circuit(rng, n_in=9, n_nodes=120)
    words = pack_rows(rng.random((300, 9)) > 0.5)
    np.testing.assert_array_equal(nb.eval_packed_words(words, c.gate, c.ra, c.rb),
                                  numpy_impl.eval_packed_words(words, c.gate, c.ra, c.rb))


def test_backend_flag_selects_numpy(monkeypatch):
    import importlib
    monkeypatch.setenv("DLGN_NUMBA", "0")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND_NAME == "numpy"
        assert mod.layer_forward is numpy_impl.layer_forward
    finally:
        monkeypatch.delenv("DLGN_NUMBA")
        importlib.reload(kernels)
