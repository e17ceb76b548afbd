"""Prime-field arithmetic and the signed (balanced residue) encoding.

Field elements are least nonnegative residues. Signed integers are decoded
from the balanced representative in ``[-(p-1)/2, (p-1)/2]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FieldMismatchError, OutOfRangeError

MERSENNE_61 = (1 << 61) - 1

# Deterministic Miller-Rabin witnesses, exact for all n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class FieldConfig:
    p: int = MERSENNE_61
    name: str = "mersenne61"

    def __post_init__(self):
        if not isinstance(self.p, int) or isinstance(self.p, bool):
            raise ConfigError(f"prime must be an integer, got {self.p!r}")
        if self.p >= 1 << 64:
            raise ConfigError("prime must fit in 64 bits")
        if not is_prime(self.p):
            raise ConfigError(f"{self.p} is not prime")

    @property
    def half(self) -> int:
        """Largest positive value of the balanced representation."""
        return (self.p - 1) // 2

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(value % self.p, self)

    def to_dict(self) -> dict:
        return {"p": self.p, "name": self.name}

    @classmethod
    def from_dict(cls, d: dict) -> "FieldConfig":
        return cls(p=int(d.get("p", MERSENNE_61)), name=str(d.get("name", "custom")))


DEFAULT_FIELD = FieldConfig()


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: FieldConfig = DEFAULT_FIELD

    def __post_init__(self):
        if not 0 <= self.value < self.field.p:
            raise OutOfRangeError(f"{self.value} is not a residue mod {self.field.p}")

    def _other(self, other) -> "FieldElement":
        if isinstance(other, int):
            return self.field(other)
        if other.field != self.field:
            raise FieldMismatchError(f"field {other.field.p} != {self.field.p}")
        return other

    def __add__(self, other):
        return fe_add(self, self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return fe_sub(self, self._other(other))

    def __mul__(self, other):
        return fe_mul(self, self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement((-self.value) % self.field.p, self.field)

    def __int__(self):
        return self.value

    def inverse(self) -> "FieldElement":
        return fe_inv(self)

    def signed(self) -> int:
        return decode_signed(self)


def _check_same(a: FieldElement, b: FieldElement) -> FieldConfig:
    if a.field != b.field:
        raise FieldMismatchError(f"field {a.field.p} != {b.field.p}")
    return a.field


def fe_add(a: FieldElement, b: FieldElement) -> FieldElement:
    f = _check_same(a, b)
    return FieldElement((a.value + b.value) % f.p, f)


def fe_sub(a: FieldElement, b: FieldElement) -> FieldElement:
    f = _check_same(a, b)
    return FieldElement((a.value - b.value) % f.p, f)


def fe_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    f = _check_same(a, b)
    return FieldElement(a.value * b.value % f.p, f)


def fe_inv(a: FieldElement) -> FieldElement:
    """Inverse by Fermat exponentiation. Only test oracles need this."""
    if a.value == 0:
        raise ZeroDivisionError("zero has no inverse")
    return FieldElement(pow(a.value, a.field.p - 2, a.field.p), a.field)


def encode_signed(x: int, field: FieldConfig = DEFAULT_FIELD) -> FieldElement:
    if abs(x) > field.half:
        raise OutOfRangeError(f"|{x}| exceeds (p-1)/2 for p={field.p}")
    return FieldElement(x % field.p, field)


def decode_signed(v: FieldElement) -> int:
    return v.value if v.value <= v.field.half else v.value - v.field.p


def encode_array(xs, field: FieldConfig = DEFAULT_FIELD) -> np.ndarray:
    """Vector form of :func:`encode_signed`; returns uint64 residues."""
    flat = [int(x) for x in np.asarray(xs).ravel()]
    half, p = field.half, field.p
    for x in flat:
        if abs(x) > half:
            raise OutOfRangeError(f"|{x}| exceeds (p-1)/2 for p={p}")
    return np.array([x % p for x in flat], dtype=np.uint64)


def decode_array(vs, field: FieldConfig = DEFAULT_FIELD) -> list[int]:
    half, p = field.half, field.p
    return [v if v <= half else v - p for v in (int(v) for v in np.asarray(vs).ravel())]
