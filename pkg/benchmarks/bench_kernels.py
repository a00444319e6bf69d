"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Prints median wall time per call and the speedup of numba over numpy.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from dlgn.circuit import pack_rows
from dlgn.kernels import numba_impl, numpy_impl


def _layer_case(rows, width, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random((rows, width))
    ia = rng.integers(0, width, size=width).astype(np.int64)
    ib = rng.integers(0, width, size=width).astype(np.int64)
    V = rng.random((width, 4))
    dy = rng.normal(size=(rows, width))
    return x, ia, ib, V, dy


def _circuit_case(rows, n_in, nodes, seed=0):
    rng = np.random.default_rng(seed)
    gate = rng.integers(1, 17, size=nodes).astype(np.int64)
    ra = np.array([rng.integers(0, n_in + k) for k in range(nodes)], dtype=np.int64)
    rb = np.array([rng.integers(0, n_in + k) for k in range(nodes)], dtype=np.int64)
    words = pack_rows(rng.random((rows, n_in)) > 0.5)
    return words, gate, ra, rb


def _median_time(fn, repeat):
    fn()  # warm-up (and JIT compile)
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return np.median(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args(argv)
    if numba_impl is None:
        raise SystemExit("numba backend unavailable (DLGN_NUMBA disabled or numba missing)")

    sizes = [(100, 256), (100, 1024)] if args.quick else [(100, 256), (100, 1024), (1000, 4096)]
    rows = []
    for r, w in sizes:
        x, ia, ib, V, dy = _layer_case(r, w)
        for name, call in (
            ("layer_forward", lambda m: m.layer_forward(x, ia, ib, V)),
            ("layer_backward", lambda m: m.layer_backward(x, ia, ib, V, dy)),
        ):
            t_np = _median_time(lambda: call(numpy_impl), args.repeat)
            t_nb = _median_time(lambda: call(numba_impl), args.repeat)
            rows.append((name, f"{r}x{w}", t_np, t_nb))
    circ = [(10_000, 64, 2_000)] if args.quick else [(10_000, 64, 2_000), (100_000, 256, 8_000)]
    for r, n_in, nodes in circ:
        words, gate, ra, rb = _circuit_case(r, n_in, nodes)
        call = lambda m: m.eval_packed_words(words, gate, ra, rb)  # noqa: E731
        t_np = _median_time(lambda: call(numpy_impl), args.repeat)
        t_nb = _median_time(lambda: call(numba_impl), args.repeat)
        rows.append(("eval_packed", f"{r} rows/{nodes} nodes", t_np, t_nb))

    print(f"{'kernel':<16}{'size':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, size, t_np, t_nb in rows:
        print(f"{name:<16}{size:<24}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
