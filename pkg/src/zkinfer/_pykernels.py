"""Pure-Python twins of the compiled kernels in ``_ckernels.pyx``.

Semantics are identical; these work for any 64-bit prime.
"""

import numpy as np


def _signed(v, p, half):
    return v if v <= half else v - p


def evaluate(op, a, b, imm, values, fixed, start, p):
    ops, aa, bb, ii = op.tolist(), a.tolist(), b.tolist(), imm.tolist()
    vals = values.tolist()
    fix = fixed.tolist() if len(fixed) else None
    half = (p - 1) // 2
    for i in range(start, len(ops)):
        if fix is not None and fix[i]:
            continue
        o = ops[i]
        if o == 1:
            vals[i] = ii[i]
        elif o == 2:
            vals[i] = (vals[aa[i]] + vals[bb[i]]) % p
        elif o == 3:
            vals[i] = vals[aa[i]] * vals[bb[i]] % p
        elif o == 4:
            vals[i] = (vals[aa[i]] >> ii[i]) & 1
        elif o == 5:
            vals[i] = vals[aa[i]] // ii[i]
        elif o == 6:
            vals[i] = vals[aa[i]] % ii[i]
        elif o == 7:
            x, y = vals[aa[i]], vals[bb[i]]
            vals[i] = x if _signed(x, p, half) >= _signed(y, p, half) else y
    values[:] = np.array(vals, dtype=np.uint64)


def check_gates(op, a, b, imm, values, p):
    ops, aa, bb, ii = op.tolist(), a.tolist(), b.tolist(), imm.tolist()
    vals = values.tolist()
    bad = []
    for i, o in enumerate(ops):
        if o == 1:
            want = ii[i]
        elif o == 2:
            want = (vals[aa[i]] + vals[bb[i]]) % p
        elif o == 3:
            want = vals[aa[i]] * vals[bb[i]] % p
        else:
            continue
        if vals[i] != want:
            bad.append(i)
    return np.array(bad, dtype=np.int64)


def check_constraints(kind, ca, cb, values):
    kk, xa, xb = kind.tolist(), ca.tolist(), cb.tolist()
    vals = values.tolist()
    bad = []
    for i, k in enumerate(kk):
        v = vals[xa[i]]
        if k == 0:
            ok = v == 0
        elif k == 1:
            ok = v == vals[xb[i]]
        else:
            ok = v <= 1
        if not ok:
            bad.append(i)
    return np.array(bad, dtype=np.int64)


def residues_in_field(values, p):
    return bool(values.size == 0 or int(values.max()) < p)
