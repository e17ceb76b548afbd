import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zkinfer.errors import ConfigError, FieldMismatchError, OutOfRangeError
from zkinfer.field import (
    DEFAULT_FIELD,
    MERSENNE_61,
    FieldConfig,
    FieldElement,
    decode_array,
    decode_signed,
    encode_array,
    encode_signed,
    fe_add,
    fe_inv,
    fe_mul,
    fe_sub,
    is_prime,
)

P = MERSENNE_61
F = DEFAULT_FIELD
legal = st.integers(min_value=-(P - 1) // 2, max_value=(P - 1) // 2)
residue = st.integers(min_value=0, max_value=P - 1)


def fe(v):
    return FieldElement(v, F)


def test_add_wraps():
    assert fe_add(fe(P - 1), fe(1)).value == 0
    assert fe_add(fe(0), fe(12345)).value == 12345
    assert fe_add(fe(3), fe(4)).value == 7


def test_mul_examples():
    assert fe_mul(fe(1), fe(999)).value == 999
    assert fe_mul(fe(P - 1), fe(P - 1)).value == 1
    assert fe_mul(fe(1 << 30), fe(1 << 31)).value == 1


def test_encode_decode_examples():
    assert encode_signed(-1).value == P - 1
    assert encode_signed(0).value == 0
    assert encode_signed(-35).value == P - 35
    assert decode_signed(fe(P - 1)) == -1
    assert decode_signed(fe((P - 1) // 2)) == (P - 1) // 2
    assert decode_signed(fe(P - 35)) == -35


def test_encode_out_of_range():
    with pytest.raises(OutOfRangeError):
        encode_signed((P + 1) // 2)
    with pytest.raises(OutOfRangeError):
        encode_array([0, -(P + 1) // 2])


def test_field_mismatch():
    g = FieldConfig(97)
    with pytest.raises(FieldMismatchError):
        fe_add(fe(1), FieldElement(1, g))
    with pytest.raises(ConfigError):
        fe(1) * FieldElement(2, g)


def test_config_validation():
    with pytest.raises(ConfigError):
        FieldConfig(91)  # 7 * 13
    with pytest.raises(ConfigError):
        FieldConfig(1 << 64)
    assert FieldConfig(97).half == 48
    with pytest.raises(OutOfRangeError):
        FieldElement(P, F)


def test_is_prime_small_range():
    naive = [n for n in range(2, 2000) if all(n % d for d in range(2, int(n**0.5) + 1))]
    assert [n for n in range(2000) if is_prime(n)] == naive
    assert is_prime(MERSENNE_61)
    assert not is_prime((1 << 61) + 1)


def test_inverse():
    for v in (1, 2, 12345, P - 1):
        assert fe_mul(fe(v), fe_inv(fe(v))).value == 1
    with pytest.raises(ZeroDivisionError):
        fe_inv(fe(0))


@given(legal)
def test_roundtrip(x):
    assert decode_signed(encode_signed(x)) == x


@given(legal, legal)
def test_homomorphism(x, y):
    h = (P - 1) // 2
    if abs(x + y) <= h:
        assert fe_add(encode_signed(x), encode_signed(y)) == encode_signed(x + y)
    if abs(x - y) <= h:
        assert fe_sub(encode_signed(x), encode_signed(y)) == encode_signed(x - y)
    if abs(x * y) <= (P - 1) // 2:
        assert fe_mul(encode_signed(x), encode_signed(y)) == encode_signed(x * y)


@settings(max_examples=200)
@given(residue, residue, residue)
def test_field_axioms(a, b, c):
    a, b, c = fe(a), fe(b), fe(c)
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + (-a) == fe(0)
    if a.value:
        assert a * a.inverse() == fe(1)


@given(st.lists(legal, max_size=20))
def test_array_roundtrip(xs):
    assert decode_array(encode_array(xs)) == xs
