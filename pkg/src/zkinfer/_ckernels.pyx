# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled witness evaluation and constraint checking.

Requires p < 2**63 so that residue sums fit a uint64; products use a
128-bit intermediate.
"""

import numpy as np

from libc.stdint cimport int64_t, uint8_t, uint64_t

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"


cdef inline int64_t _signed(uint64_t v, uint64_t p, uint64_t half) nogil:
    if v <= half:
        return <int64_t>v
    return -<int64_t>(p - v)


def evaluate(const uint8_t[::1] op, const int64_t[::1] a, const int64_t[::1] b,
             const uint64_t[::1] imm, uint64_t[::1] values, const uint8_t[::1] fixed,
             Py_ssize_t start, uint64_t p):
    cdef Py_ssize_t i, n = op.shape[0]
    cdef bint use_fixed = fixed.shape[0] > 0
    cdef uint64_t x, y, half = (p - 1) // 2
    cdef uint8_t o
    with nogil:
        for i in range(start, n):
            if use_fixed and fixed[i]:
                continue
            o = op[i]
            if o == 1:
                values[i] = imm[i]
            elif o == 2:
                x = values[a[i]] + values[b[i]]
                values[i] = x - p if x >= p else x
            elif o == 3:
                values[i] = <uint64_t>((<u128>values[a[i]] * <u128>values[b[i]]) % p)
            elif o == 4:
                values[i] = (values[a[i]] >> imm[i]) & 1 if imm[i] < 64 else 0
            elif o == 5:
                values[i] = values[a[i]] // imm[i]
            elif o == 6:
                values[i] = values[a[i]] % imm[i]
            elif o == 7:
                x = values[a[i]]
                y = values[b[i]]
                values[i] = x if _signed(x, p, half) >= _signed(y, p, half) else y


def check_gates(const uint8_t[::1] op, const int64_t[::1] a, const int64_t[::1] b,
                const uint64_t[::1] imm, const uint64_t[::1] values, uint64_t p):
    cdef Py_ssize_t i, k = 0, n = op.shape[0]
    cdef uint64_t x, want
    cdef uint8_t o
    bad_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] bad = bad_arr
    with nogil:
        for i in range(n):
            o = op[i]
            if o == 1:
                want = imm[i]
            elif o == 2:
                x = values[a[i]] + values[b[i]]
                want = x - p if x >= p else x
            elif o == 3:
                want = <uint64_t>((<u128>values[a[i]] * <u128>values[b[i]]) % p)
            else:
                continue
            if values[i] != want:
                bad[k] = i
                k += 1
    return bad_arr[:k]


def check_constraints(const uint8_t[::1] kind, const int64_t[::1] ca, const int64_t[::1] cb,
                      const uint64_t[::1] values):
    cdef Py_ssize_t i, k = 0, n = kind.shape[0]
    cdef uint64_t v
    cdef bint ok
    bad_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] bad = bad_arr
    with nogil:
        for i in range(n):
            v = values[ca[i]]
            if kind[i] == 0:
                ok = v == 0
            elif kind[i] == 1:
                ok = v == values[cb[i]]
            else:
                ok = v <= 1
            if not ok:
                bad[k] = i
                k += 1
    return bad_arr[:k]


def residues_in_field(const uint64_t[::1] values, uint64_t p):
    cdef Py_ssize_t i
    cdef bint ok = True
    with nogil:
        for i in range(values.shape[0]):
            if values[i] >= p:
                ok = False
                break
    return ok
