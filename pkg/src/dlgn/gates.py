"""The 16 two-input Boolean functions, their probabilistic surrogates and gradients.

Gate ids are 1-based everywhere in the public surface. Corner order for truth
tables is ``(0,0), (0,1), (1,0), (1,1)`` for inputs ``(A, B)``.
"""

from __future__ import annotations

import numpy as np

N_GATES = 16

MNEMONICS = (
    "FALSE", "AND", "ANOTB", "A", "BNOTA", "B", "XOR", "OR",
    "NOR", "XNOR", "NOTB", "BIMPA", "NOTA", "AIMPB", "NAND", "TRUE",
)

# Rows indexed by gate id - 1; columns are the corners (0,0), (0,1), (1,0), (1,1).
TRUTH = np.array(
    [
        [0, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
        [0, 0, 1, 1],
        [0, 1, 0, 0],
        [0, 1, 0, 1],
        [0, 1, 1, 0],
        [0, 1, 1, 1],
        [1, 0, 0, 0],
        [1, 0, 0, 1],
        [1, 0, 1, 0],
        [1, 0, 1, 1],
        [1, 1, 0, 0],
        [1, 1, 0, 1],
        [1, 1, 1, 0],
        [1, 1, 1, 1],
    ],
    dtype=np.uint8,
)
TRUTH.setflags(write=False)

# Surrogate polynomials g = c0 + c1*A + c2*B + c3*A*B, written out per gate.
SURROGATE_COEFFS = np.array(
    [
        [0, 0, 0, 0],    # 0
        [0, 0, 0, 1],    # AB
        [0, 1, 0, -1],   # A(1-B)
        [0, 1, 0, 0],    # A
        [0, 0, 1, -1],   # B(1-A)
        [0, 0, 1, 0],    # B
        [0, 1, 1, -2],   # A+B-2AB
        [0, 1, 1, -1],   # A+B-AB
        [1, -1, -1, 1],  # 1-A-B+AB
        [1, -1, -1, 2],  # 1-A-B+2AB
        [1, 0, -1, 0],   # 1-B
        [1, 0, -1, 1],   # 1-B+AB
        [1, -1, 0, 0],   # 1-A
        [1, -1, 0, 1],   # 1-A+AB
        [1, 0, 0, -1],   # 1-AB
        [1, 0, 0, 0],    # 1
    ],
    dtype=np.float64,
)
SURROGATE_COEFFS.setflags(write=False)

# d/dA = a0 + a1*B and d/dB = b0 + b1*A, transcribed column by column.
GRAD_A_COEFFS = np.array(
    [[0, 0], [0, 1], [1, -1], [1, 0], [0, -1], [0, 0], [1, -2], [1, -1],
     [-1, 1], [-1, 2], [0, 0], [0, 1], [-1, 0], [-1, 1], [0, -1], [0, 0]],
    dtype=np.float64,
)
GRAD_B_COEFFS = np.array(
    [[0, 0], [0, 1], [0, -1], [0, 0], [1, -1], [1, 0], [1, -2], [1, -1],
     [-1, 1], [-1, 2], [-1, 0], [-1, 1], [0, 0], [0, 1], [0, -1], [0, 0]],
    dtype=np.float64,
)
GRAD_A_COEFFS.setflags(write=False)
GRAD_B_COEFFS.setflags(write=False)

PASS_A = 4
PASS_B = 6


class GateError(ValueError):
    """Raised for an invalid gate id."""


class DomainError(ValueError):
    """Raised when a probability argument lies outside [0, 1]."""


def check_gate(gate: int) -> int:
    if isinstance(gate, (bool, np.bool_)) or not isinstance(gate, (int, np.integer)):
        raise GateError(f"gate id must be an integer, got {gate!r}")
    if not 1 <= gate <= N_GATES:
        raise GateError(f"gate id {gate} outside [1, 16]")
    return int(gate)


def check_unit(name: str, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def truth_table(gate: int) -> tuple[int, int, int, int]:
    """Output bits of ``gate`` at corners (0,0), (0,1), (1,0), (1,1)."""
    g = check_gate(gate)
    return tuple(int(v) for v in TRUTH[g - 1])


def gate_from_bits(bits) -> int:
    """Inverse of :func:`truth_table`."""
    b = [int(v) for v in bits]
    if len(b) != 4 or any(v not in (0, 1) for v in b):
        raise GateError(f"expected 4 binary outputs, got {bits!r}")
    return 1 + (b[0] << 3 | b[1] << 2 | b[2] << 1 | b[3])


def negation_of(gate: int) -> int:
    return 17 - check_gate(gate)


def mnemonic(gate: int) -> str:
    return MNEMONICS[check_gate(gate) - 1]


def gate_from_mnemonic(name: str) -> int:
    try:
        return MNEMONICS.index(name) + 1
    except ValueError:
        raise GateError(f"unknown gate mnemonic {name!r}") from None


def surrogate_eval(gate: int, p, q):
    g = check_gate(gate)
    p = check_unit("p", p)
    q = check_unit("q", q)
    c0, c1, c2, c3 = SURROGATE_COEFFS[g - 1]
    out = c0 + c1 * p + c2 * q + c3 * p * q
    return float(out) if out.ndim == 0 else out


def surrogate_grad(gate: int, p, q):
    """Partial derivatives ``(d/dp, d/dq)`` of the surrogate of ``gate``."""
    g = check_gate(gate)
    p = check_unit("p", p)
    q = check_unit("q", q)
    a0, a1 = GRAD_A_COEFFS[g - 1]
    b0, b1 = GRAD_B_COEFFS[g - 1]
    dp = a0 + a1 * q + 0.0 * p
    dq = b0 + b1 * p + 0.0 * q
    if dp.ndim == 0:
        return float(dp), float(dq)
    return dp, dq


def expectation_oracle(gate: int, p, q):
    """Bernoulli expectation of the hard gate, summed over the four outcomes.

    Independent of the polynomial table; used to check it.
    """
    g = check_gate(gate)
    p = check_unit("p", p)
    q = check_unit("q", q)
    total = np.zeros(np.broadcast(p, q).shape)
    for a in (0, 1):
        pa = p if a else 1.0 - p
        for b in (0, 1):
            pb = q if b else 1.0 - q
            if TRUTH[g - 1, 2 * a + b]:
                total = total + pa * pb
    return float(total) if total.ndim == 0 else total
