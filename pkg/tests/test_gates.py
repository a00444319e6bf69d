import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dlgn import gates
from dlgn.gates import (DomainError, GateError, expectation_oracle, gate_from_bits,
                        gate_from_mnemonic, mnemonic, negation_of, surrogate_eval,
                        surrogate_grad, truth_table)

GATES = range(1, 17)
unit = st.floats(0.0, 1.0, allow_nan=False)


@pytest.mark.parametrize("gate", GATES)
def test_surrogate_matches_truth_table_at_corners(gate):
    for (a, b), bit in zip(itertools.product((0, 1), repeat=2), truth_table(gate)):
        assert surrogate_eval(gate, a, b) == bit


def test_gate_id_is_binary_truth_table_plus_one():
    for gate in GATES:
        bits = truth_table(gate)
        assert gate == 1 + int("".join(map(str, bits)), 2)
        assert gate_from_bits(bits) == gate


@pytest.mark.parametrize("gate", GATES)
def test_negation_pairs(gate):
    neg = negation_of(gate)
    assert neg == 17 - gate
    assert np.all(np.array(truth_table(gate)) + np.array(truth_table(neg)) == 1)


def test_known_rows():
    assert mnemonic(2) == "AND" and truth_table(2) == (0, 0, 0, 1)
    assert mnemonic(7) == "XOR" and truth_table(7) == (0, 1, 1, 0)
    assert mnemonic(8) == "OR" and truth_table(8) == (0, 1, 1, 1)
    assert truth_table(gates.PASS_A) == (0, 0, 1, 1)
    assert truth_table(gates.PASS_B) == (0, 1, 0, 1)
    assert gate_from_mnemonic("NAND") == 15


@given(st.integers(1, 16), unit, unit)
def test_surrogate_equals_expectation(gate, p, q):
    assert abs(surrogate_eval(gate, p, q) - expectation_oracle(gate, p, q)) < 1e-12


@given(st.integers(1, 16), unit, unit)
def test_gradient_matches_symbolic_difference(gate, p, q):
    # g is bilinear, so the derivative equals the exact secant over [0, 1]
    da, db = surrogate_grad(gate, p, q)
    assert abs(da - (surrogate_eval(gate, 1, q) - surrogate_eval(gate, 0, q))) < 1e-12
    assert abs(db - (surrogate_eval(gate, p, 1) - surrogate_eval(gate, p, 0))) < 1e-12


def test_vectorized_shapes():
    p = np.linspace(0, 1, 7)
    assert surrogate_eval(7, p, 0.3).shape == (7,)
    assert isinstance(surrogate_eval(7, 0.2, 0.3), float)
    da, db = surrogate_grad(2, p, p)
    assert da.shape == db.shape == (7,)


@pytest.mark.parametrize("bad", [0, 17, -1, 2.5, "3"])
def test_bad_gate_ids_rejected(bad):
    with pytest.raises(GateError):
        surrogate_eval(bad, 0.5, 0.5)


@pytest.mark.parametrize("p,q", [(-0.1, 0.5), (0.5, 1.0001), (float("nan"), 0.5)])
def test_inputs_outside_unit_interval_rejected(p, q):
    with pytest.raises(DomainError):
        surrogate_eval(3, p, q)
    with pytest.raises(DomainError):
        surrogate_grad(3, p, q)


def test_unknown_mnemonic():
    with pytest.raises(GateError):
        gate_from_mnemonic("MAYBE")
