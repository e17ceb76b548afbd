"""Circuit-free executors used as oracles.

``run_float_reference`` is plain float64 inference. ``run_integer_reference``
executes the quantized model with numpy int64 arithmetic, mirroring the
rescaling contract but sharing no code with circuit lowering.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, WitnessRangeError
from .model import ModelGraph, ModelNode, infer_shapes
from .quantize import ACCUMULATE, QuantizedModel


def _pad(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


def _conv_taps(node: ModelNode, x: np.ndarray, w: np.ndarray):
    """Yield ``(contribution, kernel index)`` pairs for a direct convolution."""
    (sh, sw), (ph, pw) = node.pair_attr("stride", 1), node.pair_attr("padding", 0)
    cout, cin, kh, kw = w.shape
    xp = _pad(x, ph, pw)
    oh = (xp.shape[2] - kh) // sh + 1
    ow = (xp.shape[3] - kw) // sw + 1
    for c in range(cin):
        for i in range(kh):
            for j in range(kw):
                patch = xp[:, c, i : i + sh * (oh - 1) + 1 : sh, j : j + sw * (ow - 1) + 1 : sw]
                yield patch[:, None, :, :], w[None, :, c, i, j, None, None]


def _maxpool(node: ModelNode, x: np.ndarray) -> np.ndarray:
    (kh, kw), (sh, sw) = node.pair_attr("kernel_shape", 1), node.pair_attr("stride", 1)
    oh = (x.shape[2] - kh) // sh + 1
    ow = (x.shape[3] - kw) // sw + 1
    out = None
    for i in range(kh):
        for j in range(kw):
            v = x[:, :, i : i + sh * (oh - 1) + 1 : sh, j : j + sw * (ow - 1) + 1 : sw]
            out = v if out is None else np.maximum(out, v)
    return out


def _gemm_operands(node: ModelNode, a: np.ndarray, w: np.ndarray):
    if node.attributes.get("transA", 0):
        a = a.T
    if node.attributes.get("transB", 0):
        w = w.T
    return a, w


def _check_input(graph: ModelGraph, x) -> np.ndarray:
    x = np.asarray(x)
    shape = graph.graph_input.shape
    if x.size != int(np.prod(shape)):
        raise ShapeError(f"input has {x.size} values, model expects shape {list(shape)}")
    return x.reshape(shape)


def run_float_reference(graph: ModelGraph, x) -> np.ndarray:
    env = {graph.graph_input.name: _check_input(graph, x).astype(np.float64)}
    env.update(graph.initializers)
    shapes = infer_shapes(graph)
    for node in graph.ordered():
        v = env[node.inputs[0]]
        if node.op_kind == "ReLU":
            out = np.maximum(v, 0.0)
        elif node.op_kind == "Reshape":
            out = v.reshape(shapes[node.output].shape)
        elif node.op_kind == "MaxPool2D":
            out = _maxpool(node, v)
        elif node.op_kind == "Gemm":
            a, w = _gemm_operands(node, v, env[node.inputs[1]])
            out = a @ w
            if len(node.inputs) > 2:
                out = out + env[node.inputs[2]].reshape(1, -1)
        else:
            w = env[node.inputs[1]]
            out = sum(p * k for p, k in _conv_taps(node, v, w))
            if len(node.inputs) > 2:
                out = out + env[node.inputs[2]][None, :, None, None]
        env[node.output] = out
    return env[graph.output_name]


def _rescale(acc: np.ndarray, qm: QuantizedModel, node: ModelNode) -> np.ndarray:
    cfg = qm.qcfg
    lo, hi = -cfg.offset, cfg.offset - 1
    if acc.size and (acc.min() < lo or acc.max() > hi):
        raise WitnessRangeError(f"{node.label}: accumulator leaves the requantization window")
    return np.floor_divide(acc, cfg.alpha)


def run_integer_reference(qm: QuantizedModel, x_int) -> np.ndarray:
    """Integer-only inference over the quantized model (no circuit involved)."""
    graph, cfg = qm.graph, qm.qcfg
    env = {graph.graph_input.name: _check_input(graph, x_int).astype(np.int64)}
    env.update(qm.params)
    shapes = infer_shapes(graph)
    for node in graph.ordered():
        v = env[node.inputs[0]]
        if node.op_kind == "ReLU":
            out = np.maximum(v, 0)
        elif node.op_kind == "Reshape":
            out = v.reshape(shapes[node.output].shape)
        elif node.op_kind == "MaxPool2D":
            out = _maxpool(node, v)
        else:
            bias = env[node.inputs[2]] if len(node.inputs) > 2 else None
            if node.op_kind == "Gemm":
                a, w = _gemm_operands(node, v, env[node.inputs[1]])
                products = a[:, :, None] * w[None, :, :]
                bias = None if bias is None else bias.reshape(1, -1)
                axis = 1
            else:
                taps = list(_conv_taps(node, v, env[node.inputs[1]]))
                products = np.stack([p * k for p, k in taps], axis=-1)
                bias = None if bias is None else bias[None, :, None, None]
                axis = -1
            if cfg.mode == ACCUMULATE:
                acc = products.sum(axis=axis)
                if bias is not None:
                    acc = acc + cfg.alpha * bias
                out = _rescale(acc, qm, node)
            else:
                out = _rescale(products, qm, node).sum(axis=axis)
                if bias is not None:
                    out = out + bias
        env[node.output] = out
    return env[graph.output_name]
