import itertools

import numpy as np
import pytest

from conftest import build, decoded, run
from exhaustive import assert_max_accepts, range_check_accepts
from zkinfer.circuit import (
    assert_bits_and_reconstruct,
    assert_max,
    fused_requant_relu,
    max_of,
    range_check_signed,
    range_check_unsigned,
    relu,
    requantize,
    unconstrained_to_bits,
)
from zkinfer.circuit.system import ASSERT_BOOL, HINT_BIT, HINT_DIV, HINT_MOD
from zkinfer.errors import ConfigError
from zkinfer.field import MERSENNE_61
from zkinfer.quantize import QuantConfig, requantize_int

S4 = QuantConfig(s=4, nu=8, kappa=8)


def test_to_bits_examples():
    cs = build(1, lambda bld, x: unconstrained_to_bits(bld, x, 4).ravel())
    for x, want in [(5, [1, 0, 1, 0]), (0, [0, 0, 0, 0]), (15, [1, 1, 1, 1])]:
        values, rep = run(cs, [x])
        assert decoded(cs, values, cs.outputs) == want
        assert rep.ok  # no constraints emitted


def test_to_bits_width_errors():
    with pytest.raises(ConfigError):
        build(1, lambda bld, x: unconstrained_to_bits(bld, x, 0))
    with pytest.raises(ConfigError):
        build(1, lambda bld, x: unconstrained_to_bits(bld, x, 7))  # 128 > 97
    with pytest.raises(ConfigError):
        build(1, lambda bld, x: range_check_signed(bld, x, 7))


def test_reconstruct_examples():
    cs = build(3, lambda bld, x: assert_bits_and_reconstruct(bld, x[None, :]))
    _, rep = run(cs, [1, 0, 1])
    values, _ = run(cs, [1, 0, 1])
    assert decoded(cs, values, cs.outputs) == [5]
    values, rep = run(cs, [1, 1, 0])
    assert decoded(cs, values, cs.outputs) == [3] and rep.ok
    values, rep = run(cs, [2, 0, 0])
    assert not rep.ok
    assert [int(cs.ckind[c]) for c in rep.constraints] == [ASSERT_BOOL]
    assert int(cs.ca[rep.constraints[0]]) == 0


def test_signed_boundaries_default_field():
    k = 32
    def body(bld, x):
        range_check_signed(bld, x, k)

    cs = build(3, body, p=MERSENNE_61)
    for x, ok in [(-(1 << (k - 1)), True), ((1 << (k - 1)) - 1, True), (1 << (k - 1), False), (-(1 << (k - 1)) - 1, False)]:
        _, rep = run(cs, [x, 0, 0])
        assert rep.ok is ok, x


def test_signed_exhaustive_small_field():
    # every residue of p = 97, all 2^6 bit assignments
    assert range_check_accepts(97, 6, signed=True) == {x % 97 for x in range(-32, 32)}


def test_unsigned_exhaustive_small_field():
    assert range_check_accepts(97, 6, signed=False) == set(range(64))


def test_assert_max_examples():
    cs = build(3, lambda bld, w: assert_max(bld, w[2], w[0], w[1], 8), p=MERSENNE_61)
    assert run(cs, [3, 5, 5])[1].ok
    assert not run(cs, [3, 5, 3])[1].ok
    assert run(cs, [4, 4, 4])[1].ok


@pytest.mark.slow
def test_assert_max_exhaustive():
    got = assert_max_accepts(97, 6, -8, 7)
    want = {(a, b, x) for a, b, x in itertools.product(range(-8, 8), repeat=3) if x == max(a, b)}
    assert got == want


@pytest.mark.parametrize("c, y", [(-7, 0), (7, 7), (0, 0)])
def test_relu_examples(c, y):
    cs = build(1, lambda bld, x: relu(bld, x, 8), p=MERSENNE_61)
    values, rep = run(cs, [c])
    assert rep.ok and decoded(cs, values, cs.outputs) == [y]


def test_max_of_honest():
    cs = build(2, lambda bld, x: max_of(bld, x[0], x[1], 8), p=MERSENNE_61)
    for a, b in [(1, 5), (-3, -1), (4, 4), (-100, 100)]:
        values, rep = run(cs, [a, b])
        assert rep.ok and decoded(cs, values, cs.outputs) == [max(a, b)]


def _requant_circuit(fused=False):
    def body(bld, x):
        if fused:
            return fused_requant_relu(bld, x, S4)
        q, msb = requantize(bld, x, S4)
        return np.concatenate([q, msb])
    return build(1, body, p=MERSENNE_61, qcfg=S4)


@pytest.mark.parametrize("ab, q, r, msb", [(35, 2, 3, 1), (-35, -3, 13, 0), (192, 12, 0, 1)])
def test_requantize_gadget(ab, q, r, msb):
    cs = _requant_circuit()
    values, rep = run(cs, [ab])
    assert rep.ok
    assert decoded(cs, values, cs.outputs) == [q, msb]
    r_wire = np.flatnonzero(cs.op == HINT_MOD)[0]
    assert int(values[r_wire]) == r
    assert (q, r) == requantize_int(ab, S4)[::2]


def test_requantize_r_equal_alpha_unsatisfiable():
    cs = _requant_circuit()
    values, _ = run(cs, [35])
    qs_wire = int(np.flatnonzero(cs.op == HINT_DIV)[0])
    r_wire = int(np.flatnonzero(cs.op == HINT_MOD)[0])
    r_bits = [int(w) for w in np.flatnonzero(cs.op == HINT_BIT) if int(cs.a[w]) == r_wire]
    assert len(r_bits) == S4.s
    # keep t = alpha*q_sharp + r intact, move one alpha into r
    base = {qs_wire: int(values[qs_wire]) - 1, r_wire: int(values[r_wire]) + S4.alpha}
    for v in itertools.product((0, 1), repeat=S4.s):
        over = {**base, **dict(zip(r_bits, v))}
        _, rep = run(cs, [35], over)
        assert not rep.ok


@pytest.mark.parametrize("ab, y", [(35, 2), (-35, 0), (0, 0)])
def test_fused_requant_relu(ab, y):
    cs = _requant_circuit(fused=True)
    values, rep = run(cs, [ab])
    assert rep.ok and decoded(cs, values, cs.outputs) == [y]


def test_fused_matches_unfused_relation():
    fused = _requant_circuit(fused=True)

    def unfused_body(bld, x):
        q, _ = requantize(bld, x, S4)
        return relu(bld, q, S4.kappa)

    unfused = build(1, unfused_body, p=MERSENNE_61, qcfg=S4)
    assert fused.n_constraints < unfused.n_constraints
    for ab in range(-S4.offset, S4.offset, 7):
        vf, rf = run(fused, [ab])
        vu, ru = run(unfused, [ab])
        assert rf.ok and ru.ok
        assert decoded(fused, vf, fused.outputs) == decoded(unfused, vu, unfused.outputs) == [max(ab // 16, 0)]
