"""Designated-verifier reference proof backend and a Freivalds checker.

The backend is neither zero-knowledge nor succinct: the verifier holds the
witness and rechecks every constraint. The artifact binds circuit, public
IO and witness by SHA-256 digest, derives its challenge seed from those
digests (Fiat-Shamir style, no ambient randomness) and carries openings of
a seeded subset of constraints.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .circuit.system import ASSERT_BOOL, ASSERT_EQUAL, ASSERT_ZERO, ConstraintSystem
from .errors import ArtifactMismatchError, ConstraintViolationError, FormatError, ShapeError
from .field import MERSENNE_61
from .witness import Witness, check_constraints

PROOF_MAGIC = b"ZKIPROOF"
PROOF_VERSION = 1
HASH_SHA256 = 1
DEFAULT_OPENINGS = 64


def _h(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()


@dataclass(eq=False)
class PublicIO:
    inputs: np.ndarray  # uint64 residues
    outputs: np.ndarray

    @classmethod
    def from_witness(cls, cs: ConstraintSystem, w: Witness) -> "PublicIO":
        return cls(w.public_inputs(cs).copy(), w.public_outputs(cs).copy())

    def digest(self) -> bytes:
        return _h(
            b"zkinfer/io",
            struct.pack("<Q", self.inputs.size),
            self.inputs.astype("<u8").tobytes(),
            struct.pack("<Q", self.outputs.size),
            self.outputs.astype("<u8").tobytes(),
        )

    def __eq__(self, other):
        return np.array_equal(self.inputs, other.inputs) and np.array_equal(self.outputs, other.outputs)


def witness_digest(w: Witness) -> bytes:
    return _h(b"zkinfer/witness", w.to_bytes())


def derive_seed(circuit_digest: bytes, io_digest: bytes, wit_digest: bytes) -> bytes:
    return _h(b"zkinfer/seed", circuit_digest, io_digest, wit_digest)[:16]


def spot_check_indices(seed: bytes, n_constraints: int, count: int = DEFAULT_OPENINGS) -> list[int]:
    """Distinct constraint indices from a SHA-256 counter-mode PRF over ``seed``."""
    if count >= n_constraints:
        return list(range(n_constraints))
    chosen: list[int] = []
    seen: set[int] = set()
    ctr = 0
    while len(chosen) < count:
        block = _h(b"zkinfer/spot", seed, struct.pack("<Q", ctr))
        ctr += 1
        idx = int.from_bytes(block[:8], "little") % n_constraints
        if idx not in seen:
            seen.add(idx)
            chosen.append(idx)
    return chosen


@dataclass
class ProofArtifact:
    circuit_digest: bytes
    io_digest: bytes
    witness_digest: bytes
    challenge_seed: bytes
    openings: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)
    hash_id: int = HASH_SHA256

    def to_bytes(self) -> bytes:
        digests = self.circuit_digest + self.io_digest + self.witness_digest + self.challenge_seed
        body = [struct.pack("<I", len(self.openings))]
        for idx, vals in self.openings:
            body.append(struct.pack(f"<QB{len(vals)}Q", idx, len(vals), *vals))
        openings = b"".join(body)
        return b"".join([
            PROOF_MAGIC,
            struct.pack("<HB", PROOF_VERSION, self.hash_id),
            struct.pack("<I", len(digests)), digests,
            struct.pack("<I", len(openings)), openings,
        ])

    @classmethod
    def from_bytes(cls, data: bytes) -> "ProofArtifact":
        try:
            if data[:8] != PROOF_MAGIC:
                raise FormatError("not a proof file")
            version, hash_id = struct.unpack_from("<HB", data, 8)
            if version != PROOF_VERSION:
                raise FormatError(f"unsupported proof version {version}")
            if hash_id != HASH_SHA256:
                raise FormatError(f"unknown hash algorithm id {hash_id}")
            pos = 11
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if n != 112 or pos + n > len(data):
                raise FormatError("bad digest section")
            d = data[pos : pos + n]
            pos += n
            (m,) = struct.unpack_from("<I", data, pos)
            pos += 4
            section = data[pos : pos + m]
            if len(section) != m or pos + m != len(data):
                raise FormatError("bad openings section length")
            (count,) = struct.unpack_from("<I", section, 0)
            off, openings = 4, []
            for _ in range(count):
                idx, k = struct.unpack_from("<QB", section, off)
                off += 9
                vals = struct.unpack_from(f"<{k}Q", section, off)
                off += 8 * k
                openings.append((idx, tuple(vals)))
            if off != m:
                raise FormatError("trailing bytes in openings section")
        except struct.error as exc:
            raise FormatError(f"truncated proof: {exc}") from exc
        return cls(d[:32], d[32:64], d[64:96], d[96:112], openings, hash_id)


@dataclass
class Verdict:
    accepted: bool
    reason: str = "OK"
    clause: str = ""

    def __bool__(self) -> bool:
        return self.accepted


def _opening_holds(kind: int, vals: tuple[int, ...]) -> bool:
    if kind == ASSERT_ZERO:
        return vals[0] == 0
    if kind == ASSERT_EQUAL:
        return vals[0] == vals[1]
    if kind == ASSERT_BOOL:
        return vals[0] in (0, 1)
    return False


def _open(cs: ConstraintSystem, w: Witness, indices) -> list[tuple[int, tuple[int, ...]]]:
    return [(i, tuple(int(w.values[x]) for x in cs.constraint_wires(i))) for i in indices]


def make_artifact(cs: ConstraintSystem, w: Witness, n_openings: int = DEFAULT_OPENINGS) -> ProofArtifact:
    """Assemble an artifact without the prover's constraint check."""
    cd = cs.digest()
    iod = PublicIO.from_witness(cs, w).digest()
    wd = witness_digest(w)
    seed = derive_seed(cd, iod, wd)
    return ProofArtifact(cd, iod, wd, seed, _open(cs, w, spot_check_indices(seed, cs.n_constraints, n_openings)))


def prove(cs: ConstraintSystem, w: Witness, n_openings: int = DEFAULT_OPENINGS) -> ProofArtifact:
    if w.circuit_digest != cs.digest():
        raise ArtifactMismatchError("witness was generated for a different circuit")
    report = check_constraints(cs, w)
    if not report.ok:
        raise ConstraintViolationError(
            f"refusing to prove: {report.describe(cs)}", list(report.constraints) + list(report.gates)
        )
    return make_artifact(cs, w, n_openings)


def verify(cs: ConstraintSystem, io: PublicIO, w: Witness, pa: ProofArtifact) -> Verdict:
    """Accept iff digests, seed, openings and the full constraint recheck all agree."""
    if pa.circuit_digest != cs.digest() or w.circuit_digest != cs.digest():
        return Verdict(False, "circuit digest mismatch", "circuit_digest")
    if io.digest() != pa.io_digest:
        return Verdict(False, "public input/output digest mismatch", "io_digest")
    if witness_digest(w) != pa.witness_digest:
        return Verdict(False, "witness digest mismatch", "witness_digest")
    if w.values.size != cs.n_wires:
        raise FormatError("witness length does not match circuit")
    if not io == PublicIO.from_witness(cs, w):
        return Verdict(False, "public input/output differ from witness", "io_binding")
    if pa.challenge_seed != derive_seed(pa.circuit_digest, pa.io_digest, pa.witness_digest):
        return Verdict(False, "challenge seed does not match its derivation", "seed")
    expected = spot_check_indices(pa.challenge_seed, cs.n_constraints, len(pa.openings))
    if [i for i, _ in pa.openings] != expected or (cs.n_constraints and not pa.openings):
        return Verdict(False, "opening indices do not match the challenge", "openings")
    for idx, vals in pa.openings:
        if vals != tuple(int(w.values[x]) for x in cs.constraint_wires(idx)):
            return Verdict(False, f"opening for constraint #{idx} disagrees with witness", "openings")
        if not _opening_holds(int(cs.ckind[idx]), vals):
            return Verdict(False, f"opened constraint #{idx} does not hold", "openings")
    report = check_constraints(cs, w)
    if not report.ok:
        return Verdict(False, f"constraint recheck failed: {report.describe(cs)}", "constraints")
    return Verdict(True)


class ProofBackend(Protocol):
    name: str

    def prove(self, cs: ConstraintSystem, w: Witness) -> bytes: ...

    def verify(self, cs: ConstraintSystem, io: PublicIO, proof: bytes, w: Witness) -> Verdict: ...


class ReferenceBackend:
    """Pluggable-backend adapter around :func:`prove` / :func:`verify`."""

    name = "reference-sha256"

    def __init__(self, n_openings: int = DEFAULT_OPENINGS):
        self.n_openings = n_openings

    def prove(self, cs: ConstraintSystem, w: Witness) -> bytes:
        return prove(cs, w, self.n_openings).to_bytes()

    def verify(self, cs: ConstraintSystem, io: PublicIO, proof: bytes, w: Witness) -> Verdict:
        return verify(cs, io, w, ProofArtifact.from_bytes(proof))


# -- Freivalds ---------------------------------------------------------------


@dataclass(frozen=True)
class FreivaldsParams:
    repetitions: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def _as_rows(m) -> list[list[int]]:
    rows = [[int(v) for v in row] for row in np.asarray(m, dtype=object).tolist()]
    if not rows or not rows[0]:
        raise ShapeError("matrices must be non-empty")
    return rows


def _matvec(m: list[list[int]], v: list[int], p: int) -> list[int]:
    return [sum(a * b for a, b in zip(row, v)) % p for row in m]


def freivalds_round(A, B, C, v, p: int = MERSENNE_61) -> bool:
    """One check of ``A(Bv) == Cv`` over Z/pZ."""
    A, B, C = _as_rows(A), _as_rows(B), _as_rows(C)
    _check_shapes(A, B, C)
    v = [int(x) % p for x in v]
    return _matvec(A, _matvec(B, v, p), p) == _matvec(C, v, p)


def _check_shapes(A, B, C) -> None:
    n, k, m = len(A), len(A[0]), len(B[0])
    if len(B) != k or len(C) != n or len(C[0]) != m:
        raise ShapeError(f"non-conformable shapes {n}x{k} * {len(B)}x{m} vs {len(C)}x{len(C[0])}")


def freivalds_check(A, B, C, params: FreivaldsParams = FreivaldsParams(), p: int = MERSENNE_61) -> bool:
    """Accept iff ``t`` random challenges all satisfy ``A(Bv) == Cv``.

    Always accepts a correct product; a wrong one survives each round with
    probability at most 1/p.
    """
    A, B, C = _as_rows(A), _as_rows(B), _as_rows(C)
    _check_shapes(A, B, C)
    rng = random.Random(params.seed)
    for _ in range(params.repetitions):
        v = [rng.randrange(p) for _ in range(len(B[0]))]
        if _matvec(A, _matvec(B, v, p), p) != _matvec(C, v, p):
            return False
    return True


def freivalds_accepting(A, B, C, V: np.ndarray, p: int) -> np.ndarray:
    """Vectorized round over many challenge vectors (rows of ``V``); small p only."""
    if p >= 1 << 20:
        raise ValueError("batched Freivalds is for small primes (int64 headroom)")
    A, B, C = (np.asarray(m, dtype=np.int64) % p for m in (A, B, C))
    if A.shape[1] != B.shape[0] or C.shape != (A.shape[0], B.shape[1]):
        raise ShapeError("non-conformable shapes")
    V = np.asarray(V, dtype=np.int64) % p
    left = ((V @ B.T) % p) @ A.T % p
    right = V @ C.T % p
    return np.all(left == right, axis=1)
