import numpy as np
import pytest

from zkinfer.circuit import compile_model
from zkinfer.circuit.system import HINT_BIT
from zkinfer.errors import ArtifactMismatchError, ConstraintViolationError, FormatError
from zkinfer.fixtures import lenet_model, random_input, single_gemm_model, single_relu_model
from zkinfer.proof import (
    DEFAULT_OPENINGS,
    ProofArtifact,
    PublicIO,
    ReferenceBackend,
    derive_seed,
    make_artifact,
    prove,
    spot_check_indices,
    verify,
)
from zkinfer.quantize import QuantConfig, quantize
from zkinfer.witness import Witness, generate_witness


@pytest.fixture(scope="module")
def gemm():
    g = single_gemm_model()
    cs = compile_model(g)
    w = generate_witness(cs, quantize(random_input(g, 3), cs.qcfg))
    return cs, w, prove(cs, w)


def tampered(w, wire, delta=1):
    bad = w.copy()
    bad.values[wire] = np.uint64((int(bad.values[wire]) + delta) % (2**61 - 1))
    return bad


def test_honest_accepts(gemm):
    cs, w, pa = gemm
    v = verify(cs, PublicIO.from_witness(cs, w), w, pa)
    assert v and v.reason == "OK"
    assert len(pa.openings) == DEFAULT_OPENINGS


def test_lenet_completeness_and_determinism():
    g = lenet_model()
    cs = compile_model(g)
    xq = quantize(random_input(g, 1), cs.qcfg)
    w = generate_witness(cs, xq)
    a, b = prove(cs, w), prove(cs, generate_witness(cs, xq))
    assert a.to_bytes() == b.to_bytes()
    assert verify(cs, PublicIO.from_witness(cs, w), w, a)


def test_prove_refuses_bad_witness(gemm):
    cs, w, _ = gemm
    bit = int(np.flatnonzero(cs.op == HINT_BIT)[0])
    with pytest.raises(ConstraintViolationError):
        prove(cs, tampered(w, bit))
    with pytest.raises(ArtifactMismatchError):
        prove(cs, Witness(w.values, b"\1" * 32))


def test_flipped_output_rejected(gemm):
    cs, w, pa = gemm
    io = PublicIO.from_witness(cs, w)
    io.outputs[0] = np.uint64(int(io.outputs[0]) + 1)
    v = verify(cs, io, w, pa)
    assert not v and v.clause == "io_digest"


def test_wire_tamper_rejected_both_ways(gemm):
    cs, w, pa = gemm
    io = PublicIO.from_witness(cs, w)
    for wire in range(0, cs.n_wires, 37):
        bad = tampered(w, wire)
        v = verify(cs, io, bad, pa)
        assert not v and v.clause == "witness_digest"
        # attacker recomputes every digest and the seed
        forged = make_artifact(cs, bad)
        v = verify(cs, PublicIO.from_witness(cs, bad), bad, forged)
        assert not v and v.clause in ("openings", "constraints"), wire


def test_seed_and_opening_tamper(gemm):
    cs, w, pa = gemm
    io = PublicIO.from_witness(cs, w)
    bad_seed = ProofArtifact(pa.circuit_digest, pa.io_digest, pa.witness_digest, b"\0" * 16, pa.openings)
    assert verify(cs, io, w, bad_seed).clause == "seed"
    idx, vals = pa.openings[0]
    moved = [(idx + 1, vals)] + pa.openings[1:]
    assert verify(cs, io, w, ProofArtifact(pa.circuit_digest, pa.io_digest, pa.witness_digest,
                                           pa.challenge_seed, moved)).clause == "openings"
    lied = [(idx, tuple(v ^ 1 for v in vals))] + pa.openings[1:]
    assert verify(cs, io, w, ProofArtifact(pa.circuit_digest, pa.io_digest, pa.witness_digest,
                                           pa.challenge_seed, lied)).clause == "openings"


def test_other_circuit_rejected(gemm):
    cs, w, pa = gemm
    other = compile_model(single_gemm_model(), QuantConfig(s=12))
    v = verify(other, PublicIO.from_witness(cs, w), w, pa)
    assert not v and v.clause == "circuit_digest"


def test_artifact_round_trip_and_format_errors(gemm):
    _, _, pa = gemm
    data = pa.to_bytes()
    assert data.startswith(b"ZKIPROOF")
    assert ProofArtifact.from_bytes(data) == pa
    for broken in (b"", data[:20], data[:-1], data + b"\0", b"NOTPROOF" + data[8:],
                   data[:8] + b"\2\0" + data[10:], data[:10] + b"\7" + data[11:]):
        with pytest.raises(FormatError):
            ProofArtifact.from_bytes(broken)


def test_byte_flips_never_accept(gemm):
    cs, w, pa = gemm
    io = PublicIO.from_witness(cs, w)
    data = pa.to_bytes()
    rng = np.random.default_rng(0)
    for pos in rng.choice(len(data), 200, replace=False):
        b = bytearray(data)
        b[pos] ^= 1 << int(rng.integers(8))
        try:
            v = verify(cs, io, w, ProofArtifact.from_bytes(bytes(b)))
        except FormatError:
            continue
        assert not v


def test_reference_backend(gemm):
    cs, w, _ = gemm
    be = ReferenceBackend(n_openings=8)
    proof = be.prove(cs, w)
    assert be.verify(cs, PublicIO.from_witness(cs, w), proof, w)
    assert len(ProofArtifact.from_bytes(proof).openings) == 8


def test_spot_check_indices():
    seed = derive_seed(b"a" * 32, b"b" * 32, b"c" * 32)
    idx = spot_check_indices(seed, 1000, 64)
    assert len(idx) == len(set(idx)) == 64 and all(0 <= i < 1000 for i in idx)
    assert idx == spot_check_indices(seed, 1000, 64)
    assert spot_check_indices(seed, 10, 64) == list(range(10))
    assert spot_check_indices(seed[::-1], 1000, 64) != idx


def test_small_circuit_opens_everything():
    cs = compile_model(single_relu_model(), QuantConfig(s=4, nu=8, kappa=8))
    w = generate_witness(cs, np.array([[-2]]))
    pa = prove(cs, w)
    assert [i for i, _ in pa.openings] == list(range(cs.n_constraints))
    assert verify(cs, PublicIO.from_witness(cs, w), w, pa)
