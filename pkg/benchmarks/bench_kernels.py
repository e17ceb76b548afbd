"""Compare the compiled and pure-Python kernels on a compiled model.

    python3 benchmarks/bench_kernels.py [--model lenet] [--repeats 3]

Prints per-kernel best-of-N timings and the speedup, and checks both
backends produce identical wire values and violation lists.
"""

import argparse
import time

import numpy as np

from zkinfer import QuantConfig, compile_model, kernels
from zkinfer.fixtures import FIXTURES, random_input
from zkinfer.quantize import quantize
from zkinfer.witness import _encode_inputs


def best_of(fn, repeats):
    best, out = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(model="lenet", repeats=3):
    graph = FIXTURES[model]()
    qcfg = QuantConfig()
    cs = compile_model(graph, qcfg)
    x = quantize(random_input(graph, seed=0), qcfg).data
    p = cs.fcfg.p
    empty = np.zeros(0, dtype=np.uint8)
    rows = []
    results = {}
    for name in ("cython", "python"):
        try:
            k = kernels.get(name)
        except RuntimeError:
            print(f"{name}: not available")
            continue

        def ev():
            v = np.zeros(cs.n_wires, dtype=np.uint64)
            v[: cs.n_inputs] = _encode_inputs(cs, x)
            k.evaluate(cs.op, cs.a, cs.b, cs.imm, v, empty, cs.n_inputs, p)
            return v

        t_ev, values = best_of(ev, repeats)
        t_g, gates = best_of(lambda: k.check_gates(cs.op, cs.a, cs.b, cs.imm, values, p), repeats)
        t_c, cons = best_of(lambda: k.check_constraints(cs.ckind, cs.ca, cs.cb, values), repeats)
        results[name] = (values, gates, cons)
        rows.append((name, t_ev, t_g, t_c))

    print(f"model={model} wires={cs.n_wires} constraints={cs.n_constraints}")
    print(f"{'backend':<8} {'evaluate':>10} {'gates':>10} {'asserts':>10}")
    for name, *ts in rows:
        print(f"{name:<8} " + " ".join(f"{t * 1e3:>8.2f}ms" for t in ts))
    if len(rows) == 2:
        speed = [py / cy for cy, py in zip(rows[0][1:], rows[1][1:])]
        print("speedup  " + " ".join(f"{s:>9.1f}x" for s in speed))
        (v1, g1, c1), (v2, g2, c2) = results["cython"], results["python"]
        same = np.array_equal(v1, v2) and np.array_equal(g1, g2) and np.array_equal(c1, c2)
        print("backends agree:", same)
        return same
    return True


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="lenet", choices=sorted(FIXTURES))
    ap.add_argument("--repeats", type=int, default=3)
    a = ap.parse_args()
    raise SystemExit(0 if run(a.model, a.repeats) else 1)
