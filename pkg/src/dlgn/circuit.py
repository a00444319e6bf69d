"""Hardened logic circuits: evaluation, simplification, bit-packed inference
and the ``dlgn-netlist v1`` text format.

Node references are unified integers: ``0 .. input_width-1`` are circuit
inputs and ``input_width + k`` is node ``k``. Nodes are stored in
topological order, so every reference points to an input or an earlier node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .gates import MNEMONICS, TRUTH, gate_from_bits, gate_from_mnemonic

NETLIST_MAGIC = "dlgn-netlist"
NETLIST_VERSION = "v1"

# Bitwise templates executed by the packed evaluator, keyed by gate id.
TEMPLATES = {
    1: "0", 2: "a & b", 3: "a & ~b", 4: "a", 5: "~a & b", 6: "b", 7: "a ^ b",
    8: "a | b", 9: "~(a | b)", 10: "~(a ^ b)", 11: "~b", 12: "a | ~b", 13: "~a",
    14: "~a | b", 15: "~(a & b)", 16: "~0",
}


class CircuitError(ValueError):
    pass


class NetlistParseError(CircuitError):
    pass


class NetlistValidationError(CircuitError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteCircuit:
    input_width: int
    gate: np.ndarray
    ra: np.ndarray
    rb: np.ndarray
    outputs: np.ndarray
    bin_sizes: tuple[int, ...]

    def __post_init__(self):
        for name in ("gate", "ra", "rb", "outputs"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "bin_sizes", tuple(int(b) for b in self.bin_sizes))
        self.validate()

    @property
    def n_nodes(self) -> int:
        return len(self.gate)

    @property
    def class_count(self) -> int:
        return len(self.bin_sizes)

    def validate(self) -> None:
        n_in = self.input_width
        if n_in < 1:
            raise CircuitError("circuit needs at least one input")
        if not (len(self.gate) == len(self.ra) == len(self.rb)):
            raise CircuitError("gate/ref arrays differ in length")
        if len(self.gate) and (self.gate.min() < 1 or self.gate.max() > 16):
            raise CircuitError("gate id outside [1, 16]")
        limit = n_in + np.arange(len(self.gate))
        for name, refs in (("a", self.ra), ("b", self.rb)):
            bad = np.flatnonzero((refs < 0) | (refs >= limit))
            if len(bad):
                raise CircuitError(f"node {bad[0]} has an {name}-reference that is not earlier")
        total = n_in + len(self.gate)
        if len(self.outputs) and (self.outputs.min() < 0 or self.outputs.max() >= total):
            raise CircuitError("output reference out of range")
        if not self.bin_sizes or any(b < 0 for b in self.bin_sizes):
            raise CircuitError("need at least one class bin of non-negative size")
        if sum(self.bin_sizes) != len(self.outputs):
            raise CircuitError("bins do not partition the outputs")

    def structurally_equal(self, other: "DiscreteCircuit") -> bool:
        return (self.input_width == other.input_width
                and self.bin_sizes == other.bin_sizes
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("gate", "ra", "rb", "outputs")))

    def gate_histogram(self) -> dict[int, int]:
        ids, counts = np.unique(self.gate, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}

    def bin_starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.bin_sizes)[:-1]]).astype(np.int64)


def _scores_from_bits(c: DiscreteCircuit, out_bits: np.ndarray) -> np.ndarray:
    """``out_bits`` is (rows, n_outputs); returns integer class scores (rows, C)."""
    scores = np.zeros((out_bits.shape[0], c.class_count), dtype=np.int64)
    start = 0
    for k, size in enumerate(c.bin_sizes):
        scores[:, k] = out_bits[:, start:start + size].sum(axis=1)
        start += size
    return scores


def eval_circuit_batch(c: DiscreteCircuit, bits) -> np.ndarray:
    """Reference evaluator: node by node through the truth tables. Returns scores."""
    x = np.atleast_2d(np.asarray(bits))
    if x.shape[1] != c.input_width:
        raise CircuitError(f"row width {x.shape[1]} != circuit inputs {c.input_width}")
    vals = np.empty((x.shape[0], c.input_width + c.n_nodes), dtype=np.uint8)
    vals[:, :c.input_width] = x != 0
    n_in = c.input_width
    for k in range(c.n_nodes):
        corner = 2 * vals[:, c.ra[k]] + vals[:, c.rb[k]]
        vals[:, n_in + k] = TRUTH[c.gate[k] - 1][corner]
    return _scores_from_bits(c, vals[:, c.outputs])


def eval_circuit(c: DiscreteCircuit, bits) -> tuple[np.ndarray, int]:
    """Scores and predicted class for one input row (ties go to the lowest class)."""
    row = np.asarray(bits)
    if row.ndim != 1:
        raise CircuitError("eval_circuit takes a single row")
    scores = eval_circuit_batch(c, row[None, :])[0]
    return scores, int(np.argmax(scores))


def predict(scores: np.ndarray) -> np.ndarray:
    return np.argmax(scores, axis=-1)


# --- bit-packed inference ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class PackedCircuit:
    circuit: DiscreteCircuit
    templates: tuple[str, ...]
    lanes: int = 64


def pack(c: DiscreteCircuit) -> PackedCircuit:
    return PackedCircuit(c, tuple(TEMPLATES[int(g)] for g in c.gate))


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """(rows, n) 0/1 -> (n, ceil(rows/64)) uint64, row r in bit r%64 of word r//64."""
    rows, n = bits.shape
    n_words = -(-rows // 64)
    padded = np.zeros((n, n_words * 64), dtype=np.uint8)
    padded[:, :rows] = (bits != 0).T
    return np.packbits(padded, axis=1, bitorder="little").view("<u8")


def unpack_rows(words: np.ndarray, rows: int) -> np.ndarray:
    """Inverse of :func:`pack_rows`; returns (rows, n) uint8."""
    bytes_ = np.ascontiguousarray(words).astype("<u8").view(np.uint8)
    return np.unpackbits(bytes_, axis=1, bitorder="little")[:, :rows].T


def eval_packed(pc: PackedCircuit, bits) -> np.ndarray:
    """Class scores per row, computed 64 rows per machine word."""
    c = pc.circuit
    x = np.asarray(bits)
    if x.ndim != 2:
        x = x.reshape(-1, c.input_width) if x.size == 0 else np.atleast_2d(x)
    if x.shape[1] != c.input_width:
        raise CircuitError(f"row width {x.shape[1]} != circuit inputs {c.input_width}")
    rows = x.shape[0]
    if rows == 0:
        return np.zeros((0, c.class_count), dtype=np.int64)
    words = pack_rows(x)
    vals = kernels.eval_packed_words(np.ascontiguousarray(words), c.gate, c.ra, c.rb)
    out_bits = unpack_rows(vals[c.outputs], rows)
    return _scores_from_bits(c, out_bits)


# --- simplification ---------------------------------------------------------

def _bits(g: int) -> list[int]:
    return [int(v) for v in TRUTH[g - 1]]


def _single_var(t: list[int]):
    """Classify a truth table: ('const', v), ('a', neg), ('b', neg) or None if it uses both."""
    dep_a = t[0] != t[2] or t[1] != t[3]
    dep_b = t[0] != t[1] or t[2] != t[3]
    if not dep_a and not dep_b:
        return ("const", t[0])
    if not dep_b:
        return ("a", t[0])  # t(0,.) = 1 means negation
    if not dep_a:
        return ("b", t[0])
    return None


def _compose(t: list[int], neg_a: int, neg_b: int) -> list[int]:
    return [t[2 * (a ^ neg_a) + (b ^ neg_b)] for a in (0, 1) for b in (0, 1)]


def _merge_same_input(t: list[int]) -> list[int]:
    """Both inputs read the same wire: only corners (0,0) and (1,1) are reachable."""
    return [t[0], t[0], t[3], t[3]]


_CONST_GATE = {0: 1, 1: 16}


def _normalize(t: list[int], ra: int, rb: int) -> tuple[int, int, int]:
    """Gate and refs with ignored inputs collapsed onto the used one."""
    if ra == rb:
        t = _merge_same_input(t)
    kind = _single_var(t)
    if kind is None:
        return gate_from_bits(t), ra, rb
    if kind[0] == "const":
        return _CONST_GATE[kind[1]], 0, 0
    if kind[0] == "a":
        return (13 if kind[1] else 4), ra, ra
    return (11 if kind[1] else 6), rb, rb


def _lists(c: DiscreteCircuit):
    return c.gate.tolist(), c.ra.tolist(), c.rb.tolist(), c.outputs.tolist()


def _rebuild(c: DiscreteCircuit, gate, ra, rb, outputs) -> DiscreteCircuit:
    return DiscreteCircuit(c.input_width, np.asarray(gate, dtype=np.int64),
                           np.asarray(ra, dtype=np.int64), np.asarray(rb, dtype=np.int64),
                           np.asarray(outputs, dtype=np.int64), c.bin_sizes)


def propagate_constants(c: DiscreteCircuit) -> DiscreteCircuit:
    """Fold constant nodes into their consumers and drop ignored inputs."""
    n_in = c.input_width
    gate, ra, rb, outputs = _lists(c)
    const: dict[int, int] = {}
    for k in range(len(gate)):
        t = _bits(gate[k])
        a, b = ra[k], rb[k]
        if a in const:
            v = const[a]
            t = [t[2 * v], t[2 * v + 1]] * 2
            a = b
        if b in const:
            v = const[b]
            t = [t[v], t[v], t[2 + v], t[2 + v]]
            b = a
        if a in const:  # both inputs were the same constant
            t = [t[0]] * 4
        g, a, b = _normalize(t, a, b)
        gate[k], ra[k], rb[k] = g, a, b
        if g in (1, 16):
            const[n_in + k] = int(g == 16)
    return _rebuild(c, gate, ra, rb, outputs)


def eliminate_passthroughs(c: DiscreteCircuit) -> DiscreteCircuit:
    """Rewire consumers of (possibly negated) pass-through nodes to the source.

    Negations are folded into the consuming gate's truth table; a negated
    pass-through feeding an output is kept as a NOTA node on the resolved source.
    """
    n_in = c.input_width
    gate, ra, rb, outputs = _lists(c)
    alias: dict[int, tuple[int, int]] = {}

    def resolve(ref):
        return alias.get(ref, (ref, 0))

    for k in range(len(gate)):
        sa, na = resolve(ra[k])
        sb, nb = resolve(rb[k])
        t = _compose(_bits(gate[k]), na, nb)
        g, a, b = _normalize(t, sa, sb)
        gate[k], ra[k], rb[k] = g, a, b
        if g in (4, 13):
            alias[n_in + k] = (a, int(g == 13))
        elif g in (6, 11):
            alias[n_in + k] = (b, int(g == 11))
    new_out = []
    for ref in outputs:
        src, neg = resolve(ref)
        if neg:
            k = ref - n_in
            gate[k], ra[k], rb[k] = 13, src, src
            new_out.append(ref)
        else:
            new_out.append(src)
    return _rebuild(c, gate, ra, rb, new_out)


def eliminate_dead_nodes(c: DiscreteCircuit) -> DiscreteCircuit:
    n_in = c.input_width
    gate, ra, rb, outputs = _lists(c)
    live = [False] * len(gate)
    for ref in outputs:
        if ref >= n_in:
            live[ref - n_in] = True
    for k in range(len(gate) - 1, -1, -1):
        if live[k]:
            for ref in (ra[k], rb[k]):
                if ref >= n_in:
                    live[ref - n_in] = True
    remap = {}
    g2, a2, b2 = [], [], []
    for k in range(len(gate)):
        if not live[k]:
            continue
        remap[n_in + k] = n_in + len(g2)
        g2.append(gate[k])
        a2.append(remap.get(ra[k], ra[k]))
        b2.append(remap.get(rb[k], rb[k]))
    return _rebuild(c, g2, a2, b2, [remap.get(r, r) for r in outputs])


def simplify(c: DiscreteCircuit, max_passes: int = 100) -> DiscreteCircuit:
    """Run the three passes until nothing changes (or ``max_passes`` rounds)."""
    for _ in range(max_passes):
        nxt = eliminate_dead_nodes(eliminate_passthroughs(propagate_constants(c)))
        if nxt.structurally_equal(c):
            return nxt
        c = nxt
    return c


# --- netlist ----------------------------------------------------------------

def _fmt_ref(ref: int, n_in: int) -> str:
    return f"in:{ref}" if ref < n_in else f"n:{ref - n_in}"


def export_netlist(c: DiscreteCircuit) -> str:
    n_in = c.input_width
    lines = [f"{NETLIST_MAGIC} {NETLIST_VERSION} inputs={n_in} classes={c.class_count}"]
    lines.extend(f"in {i}" for i in range(n_in))
    for k in range(c.n_nodes):
        lines.append(f"node {k} {MNEMONICS[c.gate[k] - 1]} "
                     f"{_fmt_ref(c.ra[k], n_in)} {_fmt_ref(c.rb[k], n_in)}")
    start = 0
    for cls, size in enumerate(c.bin_sizes):
        refs = " ".join(_fmt_ref(r, n_in) for r in c.outputs[start:start + size])
        lines.append(f"bin {cls} {refs}".rstrip())
        start += size
    return "\n".join(lines) + "\n"


def import_netlist(text: str) -> DiscreteCircuit:
    lines = text.splitlines()
    if not lines:
        raise NetlistParseError("line 1: empty netlist")
    head = lines[0].split()
    if len(head) != 4 or head[0] != NETLIST_MAGIC or head[1] != NETLIST_VERSION:
        raise NetlistParseError(f"line 1: expected '{NETLIST_MAGIC} {NETLIST_VERSION} inputs=<n> classes=<C>'")
    try:
        kv = dict(tok.split("=", 1) for tok in head[2:])
        n_in, n_cls = int(kv["inputs"]), int(kv["classes"])
    except (ValueError, KeyError):
        raise NetlistParseError("line 1: malformed inputs=/classes= fields") from None

    inputs_seen: list[int] = []
    node_index: dict[int, int] = {}
    gate, ra, rb = [], [], []
    bins: list[list[int]] = []

    def parse_ref(tok: str, lineno: int) -> int:
        kind, _, num = tok.partition(":")
        if kind not in ("in", "n") or not num.lstrip("-").isdigit():
            raise NetlistParseError(f"line {lineno}: bad reference {tok!r}")
        i = int(num)
        if kind == "in":
            if not 0 <= i < n_in:
                raise NetlistValidationError(f"line {lineno}: input reference {tok} out of range")
            return i
        if i not in node_index:
            raise NetlistValidationError(
                f"line {lineno}: reference {tok} is not an earlier node (acyclicity)")
        return n_in + node_index[i]

    for lineno, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        kind = tok[0]
        if kind == "in":
            if len(tok) != 2 or not tok[1].isdigit():
                raise NetlistParseError(f"line {lineno}: expected 'in <i>'")
            inputs_seen.append(int(tok[1]))
        elif kind == "node":
            if bins:
                raise NetlistParseError(f"line {lineno}: node after bin declarations")
            if len(tok) != 5 or not tok[1].isdigit():
                raise NetlistParseError(f"line {lineno}: expected 'node <id> <GATE> <ref> <ref>'")
            if tok[2] not in MNEMONICS:
                raise NetlistParseError(f"line {lineno}: unknown gate mnemonic {tok[2]!r}")
            nid = int(tok[1])
            if nid in node_index:
                raise NetlistValidationError(f"line {lineno}: duplicate node id {nid}")
            a = parse_ref(tok[3], lineno)
            b = parse_ref(tok[4], lineno)
            node_index[nid] = len(gate)
            gate.append(gate_from_mnemonic(tok[2]))
            ra.append(a)
            rb.append(b)
        elif kind == "bin":
            if len(tok) < 2 or not tok[1].isdigit():
                raise NetlistParseError(f"line {lineno}: expected 'bin <class> <refs...>'")
            if int(tok[1]) != len(bins):
                raise NetlistValidationError(
                    f"line {lineno}: bins must be declared in class order, expected {len(bins)}")
            bins.append([parse_ref(t, lineno) for t in tok[2:]])
        else:
            raise NetlistParseError(f"line {lineno}: unknown statement {kind!r}")

    if sorted(inputs_seen) != list(range(n_in)):
        raise NetlistValidationError("input declarations must cover 0..inputs-1 exactly once")
    if len(bins) != n_cls:
        raise NetlistValidationError(f"expected {n_cls} bins, found {len(bins)}")
    outputs = [r for b in bins for r in b]
    try:
        return DiscreteCircuit(n_in, np.asarray(gate, dtype=np.int64), np.asarray(ra, dtype=np.int64),
                               np.asarray(rb, dtype=np.int64), np.asarray(outputs, dtype=np.int64),
                               tuple(len(b) for b in bins))
    except CircuitError as exc:
        raise NetlistValidationError(str(exc)) from None
