"""Constraint-system representation.

Every wire is defined by exactly one instruction (struct-of-arrays layout):
public inputs first, then gates (``CONST``/``ADD``/``MUL``) and hints
(prover-computed values) interleaved in feed-forward order. Assertions
live in a separate constraint table.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, FormatError
from ..field import FieldConfig
from ..quantize import QuantConfig

# Wire opcodes.
INPUT, CONST, ADD, MUL = 0, 1, 2, 3
HINT_BIT, HINT_DIV, HINT_MOD, HINT_MAX = 4, 5, 6, 7
GATE_OPS = (CONST, ADD, MUL)
HINT_OPS = (HINT_BIT, HINT_DIV, HINT_MOD, HINT_MAX)
OP_NAMES = {
    INPUT: "Input", CONST: "Const", ADD: "Add", MUL: "Mul",
    HINT_BIT: "Bit", HINT_DIV: "IntDiv", HINT_MOD: "IntMod", HINT_MAX: "Max",
}

# Constraint kinds.
ASSERT_ZERO, ASSERT_EQUAL, ASSERT_BOOL = 0, 1, 2
CONSTRAINT_NAMES = {ASSERT_ZERO: "AssertZero", ASSERT_EQUAL: "AssertEqual", ASSERT_BOOL: "AssertBool"}

CIRCUIT_MAGIC = b"ZKICIRC\x00"
CIRCUIT_VERSION = 1


@dataclass(frozen=True)
class CostConfig:
    """Weights of the total-cost proxy."""

    c_input: int = 1000
    c_var: int = 100
    c_mul: int = 10
    c_add: int = 3
    c_const: int = 3

    def __post_init__(self):
        for k, v in self.as_tuple_named():
            if not isinstance(v, int) or v < 0:
                raise ConfigError(f"cost weight {k} must be a nonnegative integer")

    def as_tuple_named(self):
        return (("c_input", self.c_input), ("c_var", self.c_var), ("c_mul", self.c_mul),
                ("c_add", self.c_add), ("c_const", self.c_const))

    def to_dict(self) -> dict:
        return dict(self.as_tuple_named())

    @classmethod
    def from_dict(cls, d: dict) -> "CostConfig":
        return cls(**{k: int(v) for k, v in d.items()})


@dataclass(frozen=True)
class CircuitCounts:
    n_inputs: int
    n_gates: int
    n_mul: int
    n_add: int
    n_cst: int
    n_constraints: int = 0
    n_hints: int = 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def total_cost(counts, ccfg: CostConfig) -> int:
    """Weighted gate inventory; accepts a ConstraintSystem or CircuitCounts."""
    c = counts.counts if isinstance(counts, ConstraintSystem) else counts
    return (
        c.n_inputs * ccfg.c_input
        + c.n_gates * ccfg.c_var
        + c.n_mul * ccfg.c_mul
        + c.n_add * ccfg.c_add
        + c.n_cst * ccfg.c_const
    )


@dataclass(eq=False)
class ConstraintSystem:
    fcfg: FieldConfig
    qcfg: QuantConfig
    ccfg: CostConfig
    n_inputs: int
    op: np.ndarray  # uint8 per wire
    a: np.ndarray  # int64 operand wire
    b: np.ndarray  # int64 operand wire
    imm: np.ndarray  # uint64 constant residue / bit index / divisor
    ckind: np.ndarray  # uint8 per constraint
    ca: np.ndarray
    cb: np.ndarray
    outputs: np.ndarray  # int64 public output wires
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]
    _digest: bytes | None = field(default=None, repr=False)

    @property
    def n_wires(self) -> int:
        return int(self.op.size)

    @property
    def n_constraints(self) -> int:
        return int(self.ckind.size)

    @property
    def inputs(self) -> np.ndarray:
        return np.arange(self.n_inputs, dtype=np.int64)

    @property
    def counts(self) -> CircuitCounts:
        tally = np.bincount(self.op, minlength=8)
        n_mul, n_add, n_cst = int(tally[MUL]), int(tally[ADD]), int(tally[CONST])
        return CircuitCounts(
            n_inputs=self.n_inputs,
            n_gates=n_mul + n_add + n_cst,
            n_mul=n_mul,
            n_add=n_add,
            n_cst=n_cst,
            n_constraints=self.n_constraints,
            n_hints=int(tally[list(HINT_OPS)].sum()),
        )

    def total_cost(self) -> int:
        return total_cost(self, self.ccfg)

    def to_bytes(self) -> bytes:
        return serialize_circuit(self)

    def digest(self) -> bytes:
        if self._digest is None:
            self._digest = hashlib.sha256(self.to_bytes()).digest()
        return self._digest

    def constraint_wires(self, idx: int) -> tuple[int, ...]:
        k = int(self.ckind[idx])
        if k == ASSERT_EQUAL:
            return (int(self.ca[idx]), int(self.cb[idx]))
        return (int(self.ca[idx]),)


def unbound_hints(cs: ConstraintSystem) -> np.ndarray:
    """Hint wires that no assertion reaches through Add/Mul gates.

    Any such wire is a free prover choice; a sound circuit has none.
    """
    bound = np.zeros(cs.n_wires, dtype=bool)
    bound[cs.ca] = True
    bound[cs.cb] = True
    ops, aa, bb = cs.op.tolist(), cs.a.tolist(), cs.b.tolist()
    flags = bound.tolist()
    for i in range(cs.n_wires - 1, -1, -1):
        if flags[i] and ops[i] in (ADD, MUL):
            flags[aa[i]] = True
            flags[bb[i]] = True
    hints = np.isin(cs.op, HINT_OPS)
    return np.flatnonzero(hints & ~np.asarray(flags, dtype=bool))


class CircuitBuilder:
    """Append-only emitter; all methods take and return int64 wire arrays."""

    def __init__(self, fcfg: FieldConfig):
        self.fcfg = fcfg
        self.n_wires = 0
        self.n_inputs = 0
        self._chunks: list[tuple] = []
        self._cchunks: list[tuple] = []
        self._n_constraints = 0
        self._consts: dict[int, int] = {}

    def _emit(self, op: int, a, b, imm) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64).ravel()
        n = a.size
        b = np.broadcast_to(np.asarray(b, dtype=np.int64), (n,))
        imm = np.broadcast_to(np.asarray(imm, dtype=np.uint64), (n,))
        out = np.arange(self.n_wires, self.n_wires + n, dtype=np.int64)
        if n:
            if op in (ADD, MUL) + HINT_OPS and (a.min() < 0 or a.max() >= self.n_wires):
                raise ValueError("operand refers to a wire that does not exist yet")
            if op in (ADD, MUL, HINT_MAX) and (b.min() < 0 or b.max() >= self.n_wires):
                raise ValueError("operand refers to a wire that does not exist yet")
            self._chunks.append((np.full(n, op, dtype=np.uint8), a, np.array(b), np.array(imm)))
            self.n_wires += n
        return out

    def inputs(self, n: int) -> np.ndarray:
        if self.n_wires != self.n_inputs:
            raise ValueError("inputs must be declared before any other wire")
        out = self._emit(INPUT, np.zeros(n), 0, 0)
        self.n_inputs += n
        return out

    def const(self, value: int) -> int:
        v = value % self.fcfg.p
        if v not in self._consts:
            self._consts[v] = int(self._emit(CONST, [0], 0, v)[0])
        return self._consts[v]

    def consts(self, values) -> np.ndarray:
        vals = np.asarray(values, dtype=object).ravel()
        return np.array([self.const(int(v)) for v in vals], dtype=np.int64)

    def add(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64))
        return self._emit(ADD, x, y.ravel(), 0).reshape(x.shape)

    def mul(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64))
        return self._emit(MUL, x, y.ravel(), 0).reshape(x.shape)

    def neg(self, x) -> np.ndarray:
        return self.mul(x, self.const(-1))

    def sub(self, x, y) -> np.ndarray:
        return self.add(x, self.neg(y))

    def add_const(self, x, value: int) -> np.ndarray:
        return self.add(x, self.const(value))

    def hint(self, op: int, x, y=0, imm=0) -> np.ndarray:
        if op not in HINT_OPS:
            raise ValueError(f"not a hint opcode: {op}")
        x = np.asarray(x, dtype=np.int64)
        return self._emit(op, x, np.broadcast_to(np.asarray(y, dtype=np.int64), x.shape).ravel(), imm).reshape(x.shape)

    def _constrain(self, kind: int, x, y=None):
        x = np.asarray(x, dtype=np.int64).ravel()
        y = x if y is None else np.broadcast_to(np.asarray(y, dtype=np.int64), x.shape).ravel()
        if x.size:
            self._cchunks.append((np.full(x.size, kind, dtype=np.uint8), x, np.array(y)))
            self._n_constraints += x.size

    def assert_zero(self, x):
        self._constrain(ASSERT_ZERO, x)

    def assert_equal(self, x, y):
        self._constrain(ASSERT_EQUAL, x, y)

    def assert_bool(self, x):
        self._constrain(ASSERT_BOOL, x)

    @property
    def n_constraints(self) -> int:
        return self._n_constraints

    def finish(self, qcfg: QuantConfig, ccfg: CostConfig, outputs, input_shape, output_shape) -> ConstraintSystem:
        def cat(parts, dtype):
            return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

        return ConstraintSystem(
            fcfg=self.fcfg,
            qcfg=qcfg,
            ccfg=ccfg,
            n_inputs=self.n_inputs,
            op=cat([c[0] for c in self._chunks], np.uint8),
            a=cat([c[1] for c in self._chunks], np.int64),
            b=cat([c[2] for c in self._chunks], np.int64),
            imm=cat([c[3] for c in self._chunks], np.uint64),
            ckind=cat([c[0] for c in self._cchunks], np.uint8),
            ca=cat([c[1] for c in self._cchunks], np.int64),
            cb=cat([c[2] for c in self._cchunks], np.int64),
            outputs=np.asarray(outputs, dtype=np.int64).ravel(),
            input_shape=tuple(int(d) for d in input_shape),
            output_shape=tuple(int(d) for d in output_shape),
        )


# -- serialization -----------------------------------------------------------

_HEADER = struct.Struct("<8sHQHHHBB5QQQQ")


def _shape_bytes(shape) -> bytes:
    return struct.pack("<B", len(shape)) + struct.pack(f"<{len(shape)}I", *shape)


def serialize_circuit(cs: ConstraintSystem) -> bytes:
    q, c = cs.qcfg, cs.ccfg
    head = _HEADER.pack(
        CIRCUIT_MAGIC, CIRCUIT_VERSION, cs.fcfg.p, q.s, q.nu, q.kappa,
        0 if q.mode == "accumulate" else 1, int(q.fuse_relu),
        c.c_input, c.c_var, c.c_mul, c.c_add, c.c_const,
        cs.n_inputs, cs.n_wires, cs.n_constraints,
    )
    cnt = cs.counts
    parts = [
        head,
        _shape_bytes(cs.input_shape),
        _shape_bytes(cs.output_shape),
        struct.pack("<Q", cs.outputs.size),
        cs.outputs.astype("<i8").tobytes(),
        cs.op.astype("u1").tobytes(),
        cs.a.astype("<i8").tobytes(),
        cs.b.astype("<i8").tobytes(),
        cs.imm.astype("<u8").tobytes(),
        cs.ckind.astype("u1").tobytes(),
        cs.ca.astype("<i8").tobytes(),
        cs.cb.astype("<i8").tobytes(),
        struct.pack("<5Q", cnt.n_gates, cnt.n_mul, cnt.n_add, cnt.n_cst, cnt.n_constraints),
    ]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise FormatError("circuit file is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def array(self, dtype: str, n: int) -> np.ndarray:
        width = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(width * n), dtype=dtype).copy()

    def shape(self) -> tuple[int, ...]:
        (rank,) = self.unpack("<B")
        return self.unpack(f"<{rank}I")


def deserialize_circuit(data: bytes) -> ConstraintSystem:
    r = _Reader(data)
    (magic, version, p, s, nu, kappa, mode, fuse, ci, cv, cm, ca_, cc,
     n_inputs, n_wires, n_constraints) = r.unpack(_HEADER.format)
    if magic != CIRCUIT_MAGIC:
        raise FormatError("not a circuit file")
    if version != CIRCUIT_VERSION:
        raise FormatError(f"unsupported circuit format version {version}")
    try:
        fcfg = FieldConfig(p=p, name="from-circuit")
        qcfg = QuantConfig(s=s, nu=nu, kappa=kappa, mode="accumulate" if mode == 0 else "per_product",
                           fuse_relu=bool(fuse))
        ccfg = CostConfig(ci, cv, cm, ca_, cc)
    except ConfigError as exc:
        raise FormatError(f"invalid circuit header: {exc}") from exc
    input_shape, output_shape = r.shape(), r.shape()
    (n_out,) = r.unpack("<Q")
    outputs = r.array("<i8", n_out).astype(np.int64)
    op = r.array("u1", n_wires)
    a = r.array("<i8", n_wires).astype(np.int64)
    b = r.array("<i8", n_wires).astype(np.int64)
    imm = r.array("<u8", n_wires).astype(np.uint64)
    ckind = r.array("u1", n_constraints)
    ca = r.array("<i8", n_constraints).astype(np.int64)
    cb = r.array("<i8", n_constraints).astype(np.int64)
    stored = r.unpack("<5Q")
    if r.pos != len(data):
        raise FormatError("trailing bytes after circuit")
    cs = ConstraintSystem(fcfg, qcfg, ccfg, n_inputs, op, a, b, imm, ckind, ca, cb, outputs,
                          tuple(input_shape), tuple(output_shape))
    _validate_layout(cs)
    cnt = cs.counts
    if stored != (cnt.n_gates, cnt.n_mul, cnt.n_add, cnt.n_cst, cnt.n_constraints):
        raise FormatError("counter block disagrees with gate/constraint lists")
    return cs


def _validate_layout(cs: ConstraintSystem) -> None:
    n = cs.n_wires
    if cs.op.size and cs.op.max() > HINT_MAX:
        raise FormatError("unknown opcode")
    if np.any(cs.op[: cs.n_inputs] != INPUT) or np.any(cs.op[cs.n_inputs :] == INPUT):
        raise FormatError("input wires must form a contiguous prefix")
    idx = np.arange(n)
    reads_a = np.isin(cs.op, (ADD, MUL) + HINT_OPS)
    reads_b = np.isin(cs.op, (ADD, MUL, HINT_MAX))
    if np.any(reads_a & ((cs.a < 0) | (cs.a >= idx))) or np.any(reads_b & ((cs.b < 0) | (cs.b >= idx))):
        raise FormatError("operand does not precede its output wire")
    if np.any((cs.op == CONST) & (cs.imm >= np.uint64(cs.fcfg.p))):
        raise FormatError("constant is not a field residue")
    if np.any(np.isin(cs.op, (HINT_DIV, HINT_MOD)) & (cs.imm == 0)):
        raise FormatError("division hint by zero")
    if cs.ckind.size and cs.ckind.max() > ASSERT_BOOL:
        raise FormatError("unknown constraint kind")
    for arr in (cs.ca, cs.cb, cs.outputs):
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise FormatError("wire reference out of range")
