import numpy as np

from dlgn.circuit import DiscreteCircuit


def random_circuit(rng, n_in=6, n_nodes=40, classes=3, per_bin=4, gates=None):
    """Random layered-free DAG: each node reads any earlier input or node."""
    gate = rng.integers(1, 17, size=n_nodes) if gates is None else rng.choice(gates, size=n_nodes)
    ra = np.array([rng.integers(0, n_in + k) for k in range(n_nodes)], dtype=np.int64)
    rb = np.array([rng.integers(0, n_in + k) for k in range(n_nodes)], dtype=np.int64)
    outputs = rng.integers(0, n_in + n_nodes, size=classes * per_bin).astype(np.int64)
    return DiscreteCircuit(n_in, gate.astype(np.int64), ra, rb, outputs,
                           np.full(classes, per_bin, dtype=np.int64))


def all_rows(n):
    return ((np.arange(2 ** n)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(bool)
