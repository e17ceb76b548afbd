"""Circuit gadgets built from bit decomposition.

All gadgets are vectorized: wire arguments are int64 arrays (a Python int
is treated as a single wire) and every element gets an independent copy of
the gadget.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..quantize import QuantConfig
from .system import HINT_BIT, HINT_DIV, HINT_MAX, HINT_MOD, CircuitBuilder


def _wires(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=np.int64)).ravel()


def _check_width(bld: CircuitBuilder, n_bits: int) -> None:
    if n_bits < 1:
        raise ConfigError("n_bits must be > 0")
    if 1 << n_bits > bld.fcfg.p:
        raise ConfigError(f"2^{n_bits} exceeds the field modulus {bld.fcfg.p}")


def unconstrained_to_bits(bld: CircuitBuilder, x, n_bits: int) -> np.ndarray:
    """Hint wires holding the low ``n_bits`` of each residue, little-endian.

    Nothing is constrained here. Returns shape ``(len(x), n_bits)``.
    """
    _check_width(bld, n_bits)
    x = _wires(x)
    bits = [bld.hint(HINT_BIT, x, imm=i) for i in range(n_bits)]
    return np.stack(bits, axis=1)


def assert_bits_and_reconstruct(bld: CircuitBuilder, bits) -> np.ndarray:
    """Booleanity on every bit, then the weighted sum ``sum 2^i d_i``."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim == 1:
        bits = bits[None, :]
    if bits.shape[1] == 0:
        raise ConfigError("cannot reconstruct from zero bits")
    bld.assert_bool(bits)
    acc = None
    for i in range(bits.shape[1]):
        term = bld.mul(bld.const(1 << i), bits[:, i])
        acc = term if acc is None else bld.add(acc, term)
    return acc


def range_check_unsigned(bld: CircuitBuilder, x, kappa: int) -> np.ndarray:
    """Constrain each residue of ``x`` to ``[0, 2^kappa - 1]``; returns its bits."""
    x = _wires(x)
    bits = unconstrained_to_bits(bld, x, kappa)
    bld.assert_equal(x, assert_bits_and_reconstruct(bld, bits))
    return bits


def range_check_signed(bld: CircuitBuilder, x, kappa: int) -> np.ndarray:
    """Constrain decoded ``x`` to ``[-2^(kappa-1), 2^(kappa-1) - 1]`` by shifting first."""
    _check_width(bld, kappa)
    x = _wires(x)
    shifted = bld.add_const(x, 1 << (kappa - 1))
    bits = unconstrained_to_bits(bld, shifted, kappa)
    bld.assert_equal(shifted, assert_bits_and_reconstruct(bld, bits))
    return bits


def assert_max(bld: CircuitBuilder, x, a, b, kappa: int) -> None:
    """Enforce ``x = max(a, b)``: both differences nonnegative and one of them zero."""
    x, a, b = np.broadcast_arrays(_wires(x), _wires(a), _wires(b))
    da = bld.sub(x, a)
    db = bld.sub(x, b)
    range_check_unsigned(bld, da, kappa)
    range_check_unsigned(bld, db, kappa)
    bld.assert_zero(bld.mul(da, db))


def max_of(bld: CircuitBuilder, a, b, kappa: int) -> np.ndarray:
    """Prover-supplied maximum bound by :func:`assert_max`."""
    a, b = np.broadcast_arrays(_wires(a), _wires(b))
    x = bld.hint(HINT_MAX, a, b)
    assert_max(bld, x, a, b, kappa)
    return x


def relu(bld: CircuitBuilder, c, kappa: int) -> np.ndarray:
    """``max(c, 0)``; the second difference ``y - 0`` is ``y`` itself."""
    c = _wires(c)
    y = bld.hint(HINT_MAX, c, bld.const(0))
    d = bld.sub(y, c)
    range_check_unsigned(bld, d, kappa)
    range_check_unsigned(bld, y, kappa)
    bld.assert_zero(bld.mul(d, y))
    return y


def requantize(bld: CircuitBuilder, ab, cfg: QuantConfig) -> tuple[np.ndarray, np.ndarray]:
    """Rescale by ``alpha`` with a verified quotient and remainder.

    With ``t = ab + alpha*2^(nu-1)`` the prover supplies ``q_sharp = t // alpha``
    and ``r = t % alpha``; the circuit checks ``t = alpha*q_sharp + r``,
    ``r`` in ``s`` bits and ``q_sharp`` in ``nu`` bits. Returns
    ``(q, msb)`` where ``q = q_sharp - 2^(nu-1)`` and ``msb`` is the top bit
    of ``q_sharp`` (1 exactly when ``q >= 0``).
    """
    ab = _wires(ab)
    t = bld.add_const(ab, cfg.offset)
    q_sharp = bld.hint(HINT_DIV, t, imm=cfg.alpha)
    r = bld.hint(HINT_MOD, t, imm=cfg.alpha)
    bld.assert_equal(t, bld.add(bld.mul(bld.const(cfg.alpha), q_sharp), r))
    range_check_unsigned(bld, r, cfg.s)
    q_bits = range_check_unsigned(bld, q_sharp, cfg.nu)
    q = bld.add_const(q_sharp, -(1 << (cfg.nu - 1)))
    return q, q_bits[:, cfg.nu - 1]


def fused_requant_relu(bld: CircuitBuilder, ab, cfg: QuantConfig) -> np.ndarray:
    """``ReLU(requantize(ab))`` reusing the quotient's sign bit: one extra Mul."""
    q, msb = requantize(bld, ab, cfg)
    return bld.mul(msb, q)
