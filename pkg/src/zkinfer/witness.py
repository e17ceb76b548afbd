"""Witness generation, constraint checking and the witness file format."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .circuit.system import (
    ASSERT_EQUAL,
    CONSTRAINT_NAMES,
    HINT_OPS,
    OP_NAMES,
    ConstraintSystem,
)
from .errors import ArtifactMismatchError, FormatError, ShapeError, WitnessRangeError
from .field import decode_array
from .quantize import QuantizedTensor
from .reference import run_float_reference, run_integer_reference

__all__ = [
    "ConstraintReport",
    "Witness",
    "check_constraints",
    "evaluate",
    "evaluate_residues",
    "generate_witness",
    "output_document",
    "recompute_hints",
    "run_float_reference",
    "run_integer_reference",
]

WITNESS_MAGIC = b"ZKIWITN\x00"
WITNESS_VERSION = 1
_WHEAD = struct.Struct("<8sH32sQB")


@dataclass(eq=False)
class Witness:
    values: np.ndarray  # uint64 residue per wire
    circuit_digest: bytes

    def public_inputs(self, cs: ConstraintSystem) -> np.ndarray:
        return self.values[: cs.n_inputs]

    def public_outputs(self, cs: ConstraintSystem) -> np.ndarray:
        return self.values[cs.outputs]

    def to_bytes(self) -> bytes:
        head = _WHEAD.pack(WITNESS_MAGIC, WITNESS_VERSION, self.circuit_digest, self.values.size, 8)
        return head + self.values.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Witness":
        if len(data) < _WHEAD.size:
            raise FormatError("witness file is truncated")
        magic, version, digest, n, width = _WHEAD.unpack_from(data)
        if magic != WITNESS_MAGIC:
            raise FormatError("not a witness file")
        if version != WITNESS_VERSION or width != 8:
            raise FormatError(f"unsupported witness format (version {version}, width {width})")
        body = data[_WHEAD.size :]
        if len(body) != 8 * n:
            raise FormatError(f"witness body has {len(body)} bytes, header promises {8 * n}")
        return cls(np.frombuffer(body, dtype="<u8").astype(np.uint64), digest)

    def copy(self) -> "Witness":
        return Witness(self.values.copy(), self.circuit_digest)


@dataclass
class ConstraintReport:
    constraints: np.ndarray  # indices of violated assertions
    gates: np.ndarray  # wires whose gate equation fails

    @property
    def ok(self) -> bool:
        return self.constraints.size == 0 and self.gates.size == 0

    def __len__(self) -> int:
        return int(self.constraints.size + self.gates.size)

    def describe(self, cs: ConstraintSystem, limit: int = 1) -> str:
        parts = []
        for g in self.gates[:limit]:
            parts.append(f"gate {OP_NAMES[int(cs.op[g])]} at wire {int(g)} inconsistent")
        for c in self.constraints[:limit]:
            kind = int(cs.ckind[c])
            wires = (int(cs.ca[c]), int(cs.cb[c])) if kind == ASSERT_EQUAL else (int(cs.ca[c]),)
            parts.append(f"constraint #{int(c)} {CONSTRAINT_NAMES[kind]}{wires} violated")
        return "; ".join(parts) or "no violations"


def _kernel(cs: ConstraintSystem, backend: str | None):
    return kernels.for_prime(cs.fcfg.p, backend)


def _encode_inputs(cs: ConstraintSystem, x) -> np.ndarray:
    data = x.data if isinstance(x, QuantizedTensor) else x
    arr = np.asarray(data)
    if arr.size != cs.n_inputs:
        raise ShapeError(f"input has {arr.size} values, circuit expects {cs.n_inputs} (shape {list(cs.input_shape)})")
    if arr.ndim > 1 and arr.shape != cs.input_shape:
        raise ShapeError(f"input shape {list(arr.shape)} != circuit input shape {list(cs.input_shape)}")
    flat = [int(v) for v in arr.ravel()]
    limit = 1 << (cs.qcfg.kappa - 1)
    for v in flat:
        if not -limit <= v < limit:
            raise WitnessRangeError(f"input value {v} outside the {cs.qcfg.kappa}-bit signed budget")
    p = cs.fcfg.p
    return np.array([v % p for v in flat], dtype=np.uint64)


def evaluate(cs: ConstraintSystem, x, overrides: dict | None = None, backend: str | None = None) -> np.ndarray:
    """Evaluate all wires in order. ``overrides`` pins hint wires to given residues."""
    return evaluate_residues(cs, _encode_inputs(cs, x), overrides, backend)


def evaluate_residues(cs: ConstraintSystem, inputs, overrides: dict | None = None,
                      backend: str | None = None) -> np.ndarray:
    """Like :func:`evaluate` but takes raw input residues, with no budget check."""
    inputs = np.asarray(inputs, dtype=np.uint64).ravel()
    if inputs.size != cs.n_inputs:
        raise ShapeError(f"expected {cs.n_inputs} input residues, got {inputs.size}")
    if inputs.size and int(inputs.max()) >= cs.fcfg.p:
        raise FormatError("input is not a field residue")
    values = np.zeros(cs.n_wires, dtype=np.uint64)
    values[: cs.n_inputs] = inputs
    fixed = np.zeros(0, dtype=np.uint8)
    if overrides:
        fixed = np.zeros(cs.n_wires, dtype=np.uint8)
        for wire, v in overrides.items():
            if int(cs.op[wire]) not in HINT_OPS:
                raise ValueError(f"wire {wire} is not a hint")
            values[wire] = int(v) % cs.fcfg.p
            fixed[wire] = 1
    _kernel(cs, backend).evaluate(cs.op, cs.a, cs.b, cs.imm, values, fixed, cs.n_inputs, cs.fcfg.p)
    return values


def check_constraints(cs: ConstraintSystem, w, backend: str | None = None) -> ConstraintReport:
    """Recheck every gate equation and every assertion over the field."""
    values = w.values if isinstance(w, Witness) else np.asarray(w, dtype=np.uint64)
    if values.size != cs.n_wires:
        raise FormatError(f"witness has {values.size} values, circuit has {cs.n_wires} wires")
    k = _kernel(cs, backend)
    if not k.residues_in_field(values, cs.fcfg.p):
        raise FormatError("witness value is not a field residue")
    return ConstraintReport(
        constraints=k.check_constraints(cs.ckind, cs.ca, cs.cb, values),
        gates=k.check_gates(cs.op, cs.a, cs.b, cs.imm, values, cs.fcfg.p),
    )


def generate_witness(cs: ConstraintSystem, x, backend: str | None = None) -> Witness:
    """Run the circuit on quantized input ``x`` and return a checked witness.

    Aborts with :class:`WitnessRangeError` instead of emitting a witness that
    fails any constraint: an honest run only fails when some intermediate
    left its audited window.
    """
    values = evaluate(cs, x, backend=backend)
    report = check_constraints(cs, values, backend=backend)
    if not report.ok:
        raise WitnessRangeError(f"intermediate left its window: {report.describe(cs)}")
    return Witness(values, cs.digest())


def recompute_hints(cs: ConstraintSystem, w: Witness, backend: str | None = None) -> np.ndarray:
    """Hint wires whose stored value differs from recomputation from operands."""
    if w.circuit_digest != cs.digest():
        raise ArtifactMismatchError("witness belongs to a different circuit")
    fresh = evaluate(cs, decode_array(w.public_inputs(cs), cs.fcfg), backend=backend)
    hints = np.isin(cs.op, HINT_OPS)
    return np.flatnonzero(hints & (fresh != w.values))


def output_document(cs: ConstraintSystem, w: Witness) -> dict:
    out = decode_array(w.public_outputs(cs), cs.fcfg)
    alpha = float(cs.qcfg.alpha)
    return {
        "output": out,
        "shape": list(cs.output_shape),
        "scale_exponent": cs.qcfg.s,
        "float_view": [v / alpha for v in out],
    }
