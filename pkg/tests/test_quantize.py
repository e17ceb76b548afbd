import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zkinfer.errors import ConfigError, OutOfRangeError, OverflowAuditError
from zkinfer.field import DEFAULT_FIELD, FieldConfig
from zkinfer.fixtures import lenet_model
from zkinfer.quantize import (
    QuantConfig,
    QuantizedModel,
    dequantize,
    quantize,
    quantize_model,
    requantize_int,
)

S4 = QuantConfig(s=4, nu=8, kappa=8)


def test_quantize_examples():
    assert quantize(1.5, S4).data.item() == 24
    assert quantize(-0.1, S4).data.item() == -2
    assert quantize(0.0, S4).data.item() == 0


def test_dequantize_examples():
    q = quantize(np.array([1.5, -0.1]), S4)
    assert dequantize(q).tolist() == [1.5, -0.125]


def test_idempotence():
    z = np.random.default_rng(0).uniform(-3, 3, 50)
    q = quantize(z, S4)
    assert np.array_equal(quantize(dequantize(q), S4).data, q.data)


def test_overflow_names_element():
    with pytest.raises(OverflowAuditError, match=r"w\[2\]"):
        quantize(np.array([0.0, 1.0, 9.0]), S4, "w")


@pytest.mark.parametrize(
    "ab, q, qs, r",
    [(192, 12, 140, 0), (35, 2, 130, 3), (-35, -3, 125, 13)],
)
def test_requantize_examples(ab, q, qs, r):
    assert requantize_int(ab, S4) == (q, qs, r)


def test_requantize_window():
    lo, hi = -S4.offset, S4.offset - 1
    requantize_int(lo, S4)
    requantize_int(hi, S4)
    with pytest.raises(OutOfRangeError):
        requantize_int(hi + 1, S4)
    with pytest.raises(OutOfRangeError):
        requantize_int(lo - 1, S4)


@given(st.integers(min_value=-(16 << 7), max_value=(16 << 7) - 1))
def test_requantize_identity(ab):
    q, qs, r = requantize_int(ab, S4)
    assert 16 * q + r == ab and 0 <= r < 16 and 0 <= qs < 256 and q == ab // 16


def test_config_invariants():
    with pytest.raises(ConfigError):
        QuantConfig(s=0)
    with pytest.raises(ConfigError):
        QuantConfig(kappa=33, nu=32)
    with pytest.raises(ConfigError):
        QuantConfig(mode="stochastic")
    with pytest.raises(ConfigError):
        QuantConfig(s=20, nu=40).check_field(DEFAULT_FIELD)
    with pytest.raises(ConfigError):
        QuantConfig().check_field(FieldConfig(97))
    QuantConfig().check_field(DEFAULT_FIELD)


def test_product_fidelity():
    cfg = QuantConfig()
    rng = np.random.default_rng(1)
    alpha = cfg.alpha
    for x, y in rng.uniform(-1, 1, (2000, 2)):
        qx, qy = int(np.floor(alpha * x)), int(np.floor(alpha * y))
        q, _, _ = requantize_int(qx * qy, cfg)
        assert abs(q / alpha - x * y) < 2**-13


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=20))
def test_monotone(zs):
    zs = sorted(zs)
    assert np.all(np.diff(quantize(np.array(zs), QuantConfig()).data) >= 0)


def test_model_sidecar_roundtrip():
    qm = quantize_model(lenet_model(), QuantConfig())
    qm.meta = {"circuit_digest": "ab"}
    back = QuantizedModel.from_dict(qm.to_dict())
    assert back.qcfg == qm.qcfg and back.meta == qm.meta
    assert all(np.array_equal(back.params[k], v) for k, v in qm.params.items())
    assert [n.op_kind for n in back.graph.nodes] == [n.op_kind for n in qm.graph.nodes]
