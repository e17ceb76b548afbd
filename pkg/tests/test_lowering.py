import numpy as np
import pytest

from zkinfer.bench import make_depth_model
from zkinfer.circuit import CostConfig, compile_model, total_cost
from zkinfer.circuit.system import CircuitCounts, deserialize_circuit, serialize_circuit, unbound_hints
from zkinfer.errors import FormatError, OverflowAuditError
from zkinfer.field import FieldConfig, decode_array
from zkinfer.fixtures import FIXTURES, depth3_model, gemm_relu_model, random_input, single_relu_model
from zkinfer.model import ModelGraph, ModelNode, TensorSpec
from zkinfer.quantize import PER_PRODUCT, QuantConfig, quantize, quantize_model
from zkinfer.witness import generate_witness, run_integer_reference

Q4 = QuantConfig(s=4, nu=16, kappa=16)


def gemm_graph(w, b=None, k=None):
    w = np.asarray(w, dtype=float)
    inits = {"w": w}
    ins = ("x", "w")
    if b is not None:
        inits["b"] = np.asarray(b, dtype=float)
        ins = ("x", "w", "b")
    return ModelGraph([ModelNode("Gemm", ins, "y")], inits, TensorSpec("x", (1, k or w.shape[0])), "y")


def outputs(graph, x, qcfg=Q4):
    cs = compile_model(graph, qcfg)
    xq = quantize(x, qcfg)
    w = generate_witness(cs, xq)
    return decode_array(w.public_outputs(cs), cs.fcfg), cs


def test_gemm_two_products_oracle():
    # integer oracle: floor((16*16 + 32*16) / 16) = 48
    out, _ = outputs(gemm_graph([[1.0], [1.0]]), np.array([[1.0, 2.0]]))
    xq = np.array([16, 32])
    wq = np.array([16, 16])
    assert out == [int(np.floor_divide(xq @ wq, 16))] == [48]


def test_identity_gemm():
    x = np.array([[0.5, -0.25, 1.5]])
    out, _ = outputs(gemm_graph(np.eye(3)), x)
    assert out == quantize(x, Q4).data.ravel().tolist()


def test_one_by_one_gemm_shape():
    _, cs = outputs(gemm_graph([[0.75]]), np.array([[2.0]]))
    # input range check + one product + requantize; nothing else multiplies
    assert cs.n_inputs == 1 and cs.outputs.size == 1
    relu_free = compile_model(gemm_graph([[0.75]]), Q4).counts
    assert relu_free.n_constraints == (Q4.kappa + 1) + 1 + (Q4.s + 1) + (Q4.nu + 1)


def test_conv_window_sums():
    graph = ModelGraph(
        [ModelNode("Conv2D", ("x", "w"), "y", {"stride": 1, "padding": 0})],
        {"w": np.ones((1, 1, 2, 2))},
        TensorSpec("x", (1, 1, 3, 3)),
        "y",
    )
    x = np.arange(9, dtype=float).reshape(1, 1, 3, 3) / 8 - 0.5
    out, cs = outputs(graph, x)
    assert cs.output_shape == (1, 1, 2, 2)
    xq = quantize(x, Q4).data[0, 0]
    want = []
    for i in range(2):
        for j in range(2):
            acc = sum(int(xq[i + di, j + dj]) * 16 for di in range(2) for dj in range(2))
            want.append(acc // 16)
    assert out == want


def test_conv_pointwise_and_zero_kernel():
    x = np.array([[[[0.5, -1.0], [0.25, 2.0]]]])
    for k, f in [(0.5, lambda v: v // 2), (0.0, lambda v: 0 * v)]:
        g = ModelGraph(
            [ModelNode("Conv2D", ("x", "w"), "y", {"stride": 1, "padding": 0})],
            {"w": np.full((1, 1, 1, 1), k)},
            TensorSpec("x", (1, 1, 2, 2)),
            "y",
        )
        out, _ = outputs(g, x)
        assert out == [int(f(v)) for v in quantize(x, Q4).data.ravel()]


def maxpool_graph(shape):
    return ModelGraph(
        [ModelNode("MaxPool2D", ("x",), "y", {"kernel_shape": list(shape[2:]), "stride": list(shape[2:])})],
        {},
        TensorSpec("x", shape),
        "y",
    )


@pytest.mark.parametrize(
    "window,want",
    [([1, 5, 3, 2], 5), ([3, 3, 3, 3], 3), ([-3, -1], -1)],
)
def test_maxpool_windows(window, want):
    shape = (1, 1, 1, len(window))
    out, _ = outputs(maxpool_graph(shape), np.array(window, dtype=float).reshape(shape) / 16)
    assert out == [want]


def test_single_relu_constraint_count():
    kappa = 8
    cs = compile_model(single_relu_model(), QuantConfig(s=4, nu=8, kappa=kappa))
    input_check = kappa + 1
    relu_gadget = 2 * (kappa + 1) + 1  # two unsigned checks, one product-is-zero
    assert cs.n_constraints == input_check + relu_gadget == 28


def test_depth_counts_affine():
    counts = [compile_model(make_depth_model(d, 16)).n_constraints for d in range(2, 7)]
    steps = np.diff(counts)
    # pools only follow the first two convs, so from d=3 on each extra conv adds the same block
    assert len(set(steps[1:].tolist())) == 1
    assert steps[0] > 0


def test_deterministic_serialization():
    g = FIXTURES["gemm_relu"]()
    a = compile_model(g)
    b = compile_model(gemm_relu_model())
    assert serialize_circuit(a) == serialize_circuit(b)
    back = deserialize_circuit(serialize_circuit(a))
    assert back.digest() == a.digest()
    assert back.counts == a.counts


def test_deserialize_rejects_corruption():
    data = serialize_circuit(compile_model(FIXTURES["gemm"]()))
    with pytest.raises(FormatError):
        deserialize_circuit(data[:-3])
    with pytest.raises(FormatError):
        deserialize_circuit(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        deserialize_circuit(data + b"\0")


def test_total_cost_examples():
    w = CostConfig(c_input=10, c_var=5, c_mul=100, c_add=3, c_const=2)
    counts = CircuitCounts(2, 3, 1, 2, 1)
    assert total_cost(counts, w) == 143
    assert total_cost(CircuitCounts(0, 0, 0, 0, 0), w) == 0
    double = CircuitCounts(4, 6, 2, 4, 2)
    assert total_cost(double, w) == 2 * 143


def test_total_cost_of_compiled_circuit():
    cs = compile_model(FIXTURES["gemm"]())
    c, w = cs.counts, cs.ccfg
    assert c.n_gates == c.n_mul + c.n_add + c.n_cst
    want = c.n_inputs * w.c_input + c.n_gates * w.c_var + c.n_mul * w.c_mul + c.n_add * w.c_add + c.n_cst * w.c_const
    assert cs.total_cost() == want


def test_overflow_audit_names_node():
    g = gemm_graph(np.full((64, 1), 0.9))
    # 31-bit field: the accumulator bound cannot fit
    small = FieldConfig((1 << 31) - 1, "m31")
    with pytest.raises(OverflowAuditError, match="Gemm"):
        compile_model(g, QuantConfig(s=8, nu=20, kappa=20), small)


def test_fusion_saves_constraints():
    g = gemm_relu_model()
    fused = compile_model(g, QuantConfig())
    plain = compile_model(g, QuantConfig(fuse_relu=False))
    assert fused.n_constraints < plain.n_constraints


def test_per_product_matches_reference():
    cfg = QuantConfig(mode=PER_PRODUCT)
    g = FIXTURES["gemm_relu"]()
    qm = quantize_model(g, cfg)
    cs = compile_model(g, cfg)
    for seed in range(5):
        xq = quantize(random_input(g, seed), cfg)
        w = generate_witness(cs, xq)
        want = run_integer_reference(qm, xq.data).ravel().tolist()
        assert decode_array(w.public_outputs(cs), cs.fcfg) == want


@pytest.mark.parametrize("name", ["gemm", "conv", "relu", "gemm_relu"])
def test_every_hint_is_bound(name):
    assert unbound_hints(compile_model(FIXTURES[name]())).size == 0


def test_depth3_hints_bound():
    assert unbound_hints(compile_model(depth3_model())).size == 0
