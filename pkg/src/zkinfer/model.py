"""JSON model graphs with ONNX operator semantics.

Document layout::

    {
      "format_version": 1,
      "input": {"name": "x", "shape": [1, 1, 8, 8]},
      "output": "y",
      "nodes": [
        {"op": "Conv2D", "inputs": ["x", "w", "b"], "output": "c",
         "attributes": {"stride": 1, "padding": 1}},
        ...
      ],
      "initializers": {"w": [[[[...]]]], "b": [...]}
    }

Initializers are nested row-major arrays of doubles. Supported ops are
``Gemm``, ``Conv2D``, ``ReLU``, ``MaxPool2D`` and ``Reshape``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import GraphStructureError, SchemaError, ShapeError, UnsupportedOperatorError

FORMAT_VERSION = 1
SUPPORTED_OPS = ("Gemm", "Conv2D", "ReLU", "MaxPool2D", "Reshape")
MAX_RANK = 4


@dataclass(frozen=True)
class TensorSpec:
    name: str
    shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if not self.shape or len(self.shape) > MAX_RANK:
            raise ShapeError(f"tensor {self.name!r}: rank must be 1..{MAX_RANK}, got {self.shape}")
        if any(d < 1 for d in self.shape):
            raise ShapeError(f"tensor {self.name!r}: dimensions must be >= 1, got {self.shape}")

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


@dataclass(frozen=True)
class ModelNode:
    op_kind: str
    inputs: tuple[str, ...]
    output: str
    attributes: dict = field(default_factory=dict, hash=False)
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or f"{self.op_kind}->{self.output}"

    def pair_attr(self, key: str, default: int) -> tuple[int, int]:
        v = self.attributes.get(key, default)
        if isinstance(v, int):
            return (v, v)
        if len(v) != 2:
            raise SchemaError(f"{self.label}: attribute {key!r} must be an int or a pair")
        return (int(v[0]), int(v[1]))


@dataclass(eq=False)
class ModelGraph:
    nodes: list[ModelNode]
    initializers: dict[str, np.ndarray]
    graph_input: TensorSpec
    output_name: str

    def __eq__(self, other):
        if not isinstance(other, ModelGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.graph_input == other.graph_input
            and self.output_name == other.output_name
            and self.initializers.keys() == other.initializers.keys()
            and all(np.array_equal(v, other.initializers[k]) for k, v in self.initializers.items())
        )

    @property
    def graph_output(self) -> TensorSpec:
        return infer_shapes(self)[self.output_name]

    def ordered(self) -> list[ModelNode]:
        return topological_order(self)

    def consumers(self, tensor: str) -> list[ModelNode]:
        return [n for n in self.nodes if tensor in n.inputs]

    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.initializers.values()))


# -- parsing -----------------------------------------------------------------


def _require(d: dict, key: str, typ, where: str):
    if key not in d:
        raise SchemaError(f"{where}: missing field {key!r}")
    v = d[key]
    if not isinstance(v, typ) or isinstance(v, bool):
        raise SchemaError(f"{where}: field {key!r} has wrong type {type(v).__name__}")
    return v


def _as_tensor(name: str, data) -> np.ndarray:
    try:
        arr = np.array(data, dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"initializer {name!r}: not a rectangular numeric array") from exc
    if arr.ndim == 0 or arr.ndim > MAX_RANK:
        raise SchemaError(f"initializer {name!r}: rank {arr.ndim} not in 1..{MAX_RANK}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"initializer {name!r}: non-finite value")
    return arr


def _check_attributes(node: ModelNode) -> None:
    a = node.attributes
    if node.op_kind == "Conv2D":
        if min(node.pair_attr("stride", 1)) < 1:
            raise SchemaError(f"{node.label}: stride must be >= 1")
        if min(node.pair_attr("padding", 0)) < 0:
            raise SchemaError(f"{node.label}: padding must be >= 0")
    elif node.op_kind == "MaxPool2D":
        if "kernel_shape" not in a:
            raise SchemaError(f"{node.label}: MaxPool2D needs kernel_shape")
        if min(node.pair_attr("kernel_shape", 1)) < 1:
            raise SchemaError(f"{node.label}: window dims must be >= 1")
        if min(node.pair_attr("stride", 1)) < 1:
            raise SchemaError(f"{node.label}: stride must be >= 1")
    elif node.op_kind == "Reshape":
        shape = a.get("shape")
        if not isinstance(shape, list) or not shape or not all(isinstance(d, int) for d in shape):
            raise SchemaError(f"{node.label}: Reshape needs an integer list 'shape'")
    elif node.op_kind == "Gemm":
        for flag in ("transA", "transB"):
            if a.get(flag, 0) not in (0, 1):
                raise SchemaError(f"{node.label}: {flag} must be 0 or 1")


_ARITY = {"Gemm": (2, 3), "Conv2D": (2, 3), "ReLU": (1, 1), "MaxPool2D": (1, 1), "Reshape": (1, 1)}


def graph_from_dict(doc: dict) -> ModelGraph:
    if not isinstance(doc, dict):
        raise SchemaError("model document must be a JSON object")
    version = _require(doc, "format_version", int, "model")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {version}")
    inp = _require(doc, "input", dict, "model")
    shape = _require(inp, "shape", list, "input")
    if not all(isinstance(d, int) and not isinstance(d, bool) for d in shape):
        raise SchemaError("input: shape must be a list of integers")
    graph_input = TensorSpec(_require(inp, "name", str, "input"), tuple(shape))
    output = _require(doc, "output", str, "model")

    raw_inits = doc.get("initializers", {})
    if not isinstance(raw_inits, dict):
        raise SchemaError("model: 'initializers' must be an object")
    inits = {k: _as_tensor(k, v) for k, v in raw_inits.items()}

    nodes = []
    for i, raw in enumerate(_require(doc, "nodes", list, "model")):
        where = f"nodes[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}: must be an object")
        op = _require(raw, "op", str, where)
        ins = _require(raw, "inputs", list, where)
        if not all(isinstance(s, str) for s in ins):
            raise SchemaError(f"{where}: inputs must be strings")
        attrs = raw.get("attributes", {})
        if not isinstance(attrs, dict):
            raise SchemaError(f"{where}: attributes must be an object")
        node = ModelNode(op, tuple(ins), _require(raw, "output", str, where), dict(attrs), raw.get("name", ""))
        if op not in SUPPORTED_OPS:
            raise UnsupportedOperatorError(op, node.label)
        lo, hi = _ARITY[op]
        if not lo <= len(ins) <= hi:
            raise SchemaError(f"{node.label}: expected {lo}..{hi} inputs, got {len(ins)}")
        _check_attributes(node)
        nodes.append(node)

    graph = ModelGraph(nodes, inits, graph_input, output)
    _validate_structure(graph)
    return graph


def _validate_structure(graph: ModelGraph) -> None:
    produced: dict[str, ModelNode] = {}
    for n in graph.nodes:
        if n.output in produced or n.output == graph.graph_input.name or n.output in graph.initializers:
            raise GraphStructureError(f"tensor {n.output!r} is defined more than once")
        produced[n.output] = n
    for n in graph.nodes:
        for j, t in enumerate(n.inputs):
            if t == graph.graph_input.name or t in produced:
                if j > 0 and n.op_kind in ("Gemm", "Conv2D"):
                    raise GraphStructureError(f"{n.label}: weights/bias {t!r} must be initializers")
            elif t in graph.initializers:
                if j == 0:
                    raise GraphStructureError(f"{n.label}: data input {t!r} cannot be an initializer")
            else:
                raise GraphStructureError(f"{n.label}: dangling tensor reference {t!r}")
    if graph.output_name not in produced:
        raise GraphStructureError(f"graph output {graph.output_name!r} is not produced by any node")
    topological_order(graph)


def parse_model(document: str | bytes) -> ModelGraph:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return graph_from_dict(doc)


def graph_to_dict(graph: ModelGraph) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "input": {"name": graph.graph_input.name, "shape": list(graph.graph_input.shape)},
        "output": graph.output_name,
        "nodes": [
            {
                "op": n.op_kind,
                "inputs": list(n.inputs),
                "output": n.output,
                "attributes": n.attributes,
                **({"name": n.name} if n.name else {}),
            }
            for n in graph.nodes
        ],
        "initializers": {k: v.tolist() for k, v in graph.initializers.items()},
    }


def dump_model(graph: ModelGraph) -> str:
    return json.dumps(graph_to_dict(graph))


# -- ordering and shapes -----------------------------------------------------


def topological_order(graph: ModelGraph) -> list[ModelNode]:
    """Kahn's algorithm; ties resolve by declaration order."""
    producer = {n.output: i for i, n in enumerate(graph.nodes)}
    deps = [
        {producer[t] for t in n.inputs if t in producer} for n in graph.nodes
    ]
    for i, d in enumerate(deps):
        if i in d:
            raise GraphStructureError(f"{graph.nodes[i].label}: cycle: node consumes its own output")
    done: set[int] = set()
    order: list[ModelNode] = []
    while len(order) < len(graph.nodes):
        ready = next((i for i, d in enumerate(deps) if i not in done and d <= done), None)
        if ready is None:
            stuck = [graph.nodes[i].label for i in range(len(deps)) if i not in done]
            raise GraphStructureError(f"cycle among nodes {stuck}")
        done.add(ready)
        order.append(graph.nodes[ready])
    return order


def _conv_out(size: int, k: int, pad: int, stride: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def infer_shapes(graph: ModelGraph) -> dict[str, TensorSpec]:
    shapes: dict[str, TensorSpec] = {graph.graph_input.name: graph.graph_input}
    for name, arr in graph.initializers.items():
        shapes[name] = TensorSpec(name, arr.shape)
    for n in topological_order(graph):
        x = shapes[n.inputs[0]].shape
        out = _node_shape(n, x, [shapes[t].shape for t in n.inputs[1:]])
        shapes[n.output] = TensorSpec(n.output, out)
    return shapes


def _node_shape(n: ModelNode, x: tuple, params: list[tuple]) -> tuple:
    def fail(msg):
        raise ShapeError(f"{n.label}: {msg}")

    if n.op_kind == "ReLU":
        return x
    if n.op_kind == "Reshape":
        target = list(n.attributes["shape"])
        size = int(np.prod(x))
        if target.count(-1) > 1:
            fail("at most one -1 in Reshape target")
        if -1 in target:
            known = int(np.prod([d for d in target if d != -1]))
            if known <= 0 or size % known:
                fail(f"cannot reshape {x} to {target}")
            target[target.index(-1)] = size // known
        if int(np.prod(target)) != size or min(target) < 1:
            fail(f"cannot reshape {x} to {target}")
        return tuple(target)
    if n.op_kind == "Gemm":
        if len(x) != 2:
            fail(f"Gemm input must be rank 2, got {x}")
        w = params[0]
        if len(w) != 2:
            fail(f"Gemm weight must be rank 2, got {w}")
        m, k = (x[1], x[0]) if n.attributes.get("transA", 0) else x
        kw, nn = (w[1], w[0]) if n.attributes.get("transB", 0) else w
        if k != kw:
            fail(f"inner dimensions differ: [{m},{k}] x [{kw},{nn}]")
        if len(params) > 1 and tuple(params[1]) not in ((nn,), (1, nn)):
            fail(f"bias shape {params[1]} does not match {nn} outputs")
        return (m, nn)
    if n.op_kind == "Conv2D":
        if len(x) != 4:
            fail(f"Conv2D input must be NCHW, got {x}")
        w = params[0]
        if len(w) != 4:
            fail(f"Conv2D weight must be rank 4, got {w}")
        cout, cin, kh, kw = w
        if cin != x[1]:
            fail(f"weight expects {cin} input channels, input has {x[1]}")
        if "kernel_shape" in n.attributes and n.pair_attr("kernel_shape", 1) != (kh, kw):
            fail("kernel_shape attribute disagrees with weight shape")
        if len(params) > 1 and tuple(params[1]) != (cout,):
            fail(f"bias shape {params[1]} does not match {cout} channels")
        (sh, sw), (ph, pw) = n.pair_attr("stride", 1), n.pair_attr("padding", 0)
        oh, ow = _conv_out(x[2], kh, ph, sh), _conv_out(x[3], kw, pw, sw)
        if oh < 1 or ow < 1:
            fail(f"kernel {kh}x{kw} does not fit input {x[2]}x{x[3]} with padding {ph},{pw}")
        return (x[0], cout, oh, ow)
    if n.op_kind == "MaxPool2D":
        if len(x) != 4:
            fail(f"MaxPool2D input must be NCHW, got {x}")
        (kh, kw), (sh, sw) = n.pair_attr("kernel_shape", 1), n.pair_attr("stride", 1)
        oh, ow = _conv_out(x[2], kh, 0, sh), _conv_out(x[3], kw, 0, sw)
        if oh < 1 or ow < 1:
            fail(f"window {kh}x{kw} does not fit input {x[2]}x{x[3]}")
        return (x[0], x[1], oh, ow)
    raise UnsupportedOperatorError(n.op_kind, n.label)


def layer_counts(graph: ModelGraph) -> dict[str, int]:
    """Counts of convolutions, pools, fully-connected layers and ReLUs.

    ``f`` counts Gemm nodes feeding a ReLU (FC blocks); a bare classifier
    head is not an FC block. ``gemm`` is the raw Gemm count.
    """
    kinds = [n.op_kind for n in graph.nodes]
    relu_inputs = {n.inputs[0] for n in graph.nodes if n.op_kind == "ReLU"}
    return {
        "c": kinds.count("Conv2D"),
        "p": kinds.count("MaxPool2D"),
        "f": sum(1 for n in graph.nodes if n.op_kind == "Gemm" and n.output in relu_inputs),
        "r": kinds.count("ReLU"),
        "gemm": kinds.count("Gemm"),
    }


def load_input(document: str | bytes, expected_shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Parse an input-data file ``{"input": [...], "shape": [...]}``."""
    try:
        doc: Any = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "input" not in doc:
        raise SchemaError("input file needs an 'input' array")
    try:
        data = np.array(doc["input"], dtype=np.float64).ravel()
    except (ValueError, TypeError) as exc:
        raise SchemaError("input values must be numbers") from exc
    if not np.all(np.isfinite(data)):
        raise SchemaError("input values must be finite")
    shape = doc.get("shape")
    if shape is not None:
        if not isinstance(shape, list) or not all(isinstance(d, int) for d in shape):
            raise SchemaError("'shape' must be a list of integers")
        if int(np.prod(shape)) != data.size:
            raise ShapeError(f"input has {data.size} values but shape {shape}")
    if expected_shape is not None:
        if data.size != int(np.prod(expected_shape)) or (shape is not None and tuple(shape) != tuple(expected_shape)):
            raise ShapeError(f"input shape {shape or [data.size]} does not match model input {list(expected_shape)}")
        return data.reshape(expected_shape)
    return data.reshape(shape) if shape is not None else data
