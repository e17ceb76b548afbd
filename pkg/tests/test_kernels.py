import os
import subprocess
import sys

import numpy as np
import pytest

from zkinfer import kernels
from zkinfer.circuit import compile_model
from zkinfer.circuit.system import HINT_BIT
from zkinfer.field import FieldConfig
from zkinfer.fixtures import FIXTURES, random_input, single_relu_model
from zkinfer.quantize import QuantConfig, quantize
from zkinfer.witness import check_constraints, evaluate

needs_c = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")


@needs_c
@pytest.mark.parametrize("name", ["gemm", "conv", "gemm_relu", "lenet"])
def test_backends_agree(name):
    g = FIXTURES[name]()
    cs = compile_model(g)
    x = quantize(random_input(g, 5), cs.qcfg)
    vc = evaluate(cs, x, backend="cython")
    vp = evaluate(cs, x, backend="python")
    assert np.array_equal(vc, vp)
    bad = vc.copy()
    bits = np.flatnonzero(cs.op == HINT_BIT)[:5]
    bad[bits] = np.uint64(2)
    rc, rp = check_constraints(cs, bad, "cython"), check_constraints(cs, bad, "python")
    assert np.array_equal(rc.constraints, rp.constraints) and np.array_equal(rc.gates, rp.gates)
    assert not rc.ok


def test_pure_python_switch():
    env = dict(os.environ, ZKINFER_PURE_PYTHON="1")
    code = "import zkinfer.kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_large_prime_uses_fallback():
    p = (1 << 64) - 59
    assert kernels.for_prime(p) is kernels._pykernels
    cs = compile_model(single_relu_model(), QuantConfig(s=4, nu=8, kappa=8), FieldConfig(p, "p64"))
    values = evaluate(cs, np.array([[-5]]))
    assert check_constraints(cs, values).ok
    assert int(values[cs.outputs[0]]) == 0


def test_unknown_backend_when_missing(monkeypatch):
    monkeypatch.setattr(kernels, "_ckernels", None)
    assert kernels.get() is kernels._pykernels
    with pytest.raises(RuntimeError):
        kernels.get("cython")
