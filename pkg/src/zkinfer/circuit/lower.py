"""Lower a quantized model graph into a constraint system.

Every integer tensor carries a worst-case magnitude bound through the
graph. Lowering fails with :class:`OverflowAuditError` whenever a bound
could let an intermediate wrap modulo p, so field equalities always mean
integer equalities.
"""

from __future__ import annotations

import logging

import numpy as np

from ..errors import OverflowAuditError, ShapeError
from ..field import DEFAULT_FIELD, FieldConfig
from ..model import ModelGraph, ModelNode, infer_shapes
from ..quantize import ACCUMULATE, QuantConfig, QuantizedModel, quantize_model
from . import gadgets
from .system import CircuitBuilder, ConstraintSystem, CostConfig

log = logging.getLogger(__name__)


def _bits(n: int) -> float:
    return float(np.log2(n)) if n > 0 else 0.0


class _Lowering:
    def __init__(self, qm: QuantizedModel, fcfg: FieldConfig):
        self.qm = qm
        self.cfg: QuantConfig = qm.qcfg
        self.fcfg = fcfg
        self.bld = CircuitBuilder(fcfg)
        self.wires: dict[str, np.ndarray] = {}
        self.bound: dict[str, int] = {}

    # -- audit helpers -----------------------------------------------------

    def _need(self, node: ModelNode, magnitude: int, what: str) -> None:
        if magnitude > self.fcfg.half:
            raise OverflowAuditError(
                f"{node.label}: {what} may reach 2^{_bits(magnitude):.1f}, beyond (p-1)/2 = 2^{_bits(self.fcfg.half):.1f}"
            )

    def _audit_requant(self, node: ModelNode, acc_bound: int) -> None:
        cfg = self.cfg
        if acc_bound + (cfg.alpha << cfg.nu) > self.fcfg.half:
            honest_nu = max(1, int(np.ceil(_bits(max(acc_bound, 1) / cfg.alpha))) + 1)
            raise OverflowAuditError(
                f"{node.label}: accumulator bound 2^{_bits(acc_bound):.1f} plus the quotient window "
                f"alpha*2^nu exceeds (p-1)/2; covering it honestly needs nu >= {honest_nu}, "
                f"which this field cannot host"
            )

    def _audit_compare(self, node: ModelNode, bound: int) -> None:
        # Differences of two bounded values must not alias a kappa-bit residue.
        self._need(node, 2 * bound + (1 << self.cfg.kappa), "comparison difference")

    # -- op lowering ----------------------------------------------------------

    def lower_input(self, shape) -> None:
        name = self.qm.graph.graph_input.name
        n = int(np.prod(shape))
        x = self.bld.inputs(n)
        gadgets.range_check_signed(self.bld, x, self.cfg.kappa)
        self.wires[name] = x.reshape(shape)
        self.bound[name] = 1 << (self.cfg.kappa - 1)

    def _finish_linear(self, node: ModelNode, acc: np.ndarray, fuse: bool) -> np.ndarray:
        flat = acc.ravel()
        if fuse:
            out = gadgets.fused_requant_relu(self.bld, flat, self.cfg)
        else:
            out, _ = gadgets.requantize(self.bld, flat, self.cfg)
        return out.reshape(acc.shape)

    def _weights(self, node: ModelNode):
        w = self.qm.params[node.inputs[1]]
        b = self.qm.params[node.inputs[2]].ravel() if len(node.inputs) > 2 else None
        return w, b

    def lower_gemm(self, node: ModelNode, fuse: bool) -> None:
        cfg, bld = self.cfg, self.bld
        x = self.wires[node.inputs[0]]
        w, b = self._weights(node)
        if node.attributes.get("transA", 0):
            x = x.T
        if node.attributes.get("transB", 0):
            w = w.T
        m, k = x.shape
        n = w.shape[1]
        b_in = self.bound[node.inputs[0]]
        col_abs = np.abs(w).sum(axis=0).astype(object)
        bias_abs = np.abs(b).astype(object) if b is not None else np.zeros(n, dtype=object)

        wc = bld.consts(w).reshape(k, n)
        prods = bld.mul(np.broadcast_to(x[:, :, None], (m, k, n)), np.broadcast_to(wc[None], (m, k, n)))
        if cfg.mode == ACCUMULATE:
            acc_bound = max(int(c) * b_in + cfg.alpha * int(bb) for c, bb in zip(col_abs, bias_abs))
            self._audit_requant(node, acc_bound)
            acc = prods[:, 0, :]
            for l in range(1, k):
                acc = bld.add(acc, prods[:, l, :])
            if b is not None:
                acc = bld.add(acc, bld.consts(cfg.alpha * b.astype(object))[None, :])
            out = self._finish_linear(node, acc, fuse)
            self.bound[node.output] = 1 << (cfg.nu - 1)
        else:
            self._audit_requant(node, int(np.abs(w).max()) * b_in)
            q = self._finish_linear(node, prods, False)
            acc = q[:, 0, :]
            for l in range(1, k):
                acc = bld.add(acc, q[:, l, :])
            if b is not None:
                acc = bld.add(acc, bld.consts(b)[None, :])
            out = acc
            self.bound[node.output] = k * (1 << (cfg.nu - 1)) + int(max(bias_abs, default=0))
            self._need(node, self.bound[node.output], "sum of rescaled products")
        self.wires[node.output] = out

    def lower_conv2d(self, node: ModelNode, fuse: bool) -> None:
        cfg, bld = self.cfg, self.bld
        x = self.wires[node.inputs[0]]
        w, b = self._weights(node)
        nb, cin, h, wd = x.shape
        cout, _, kh, kw = w.shape
        (sh, sw), (ph, pw) = node.pair_attr("stride", 1), node.pair_attr("padding", 0)
        oh, ow = (h + 2 * ph - kh) // sh + 1, (wd + 2 * pw - kw) // sw + 1
        b_in = self.bound[node.inputs[0]]
        per_out = np.abs(w).reshape(cout, -1).sum(axis=1)

        if cfg.mode == ACCUMULATE:
            acc_bound = max(
                int(per_out[c]) * b_in + cfg.alpha * (abs(int(b[c])) if b is not None else 0) for c in range(cout)
            )
            self._audit_requant(node, acc_bound)
        else:
            self._audit_requant(node, int(np.abs(w).max()) * b_in)

        oy = np.arange(oh)[:, None]
        ox = np.arange(ow)[None, :]
        shape = (nb, cout, oh, ow)
        acc = np.full(shape, -1, dtype=np.int64)
        n_terms = 0
        for ci in range(cin):
            for ky in range(kh):
                for kx in range(kw):
                    iy = oy * sh + ky - ph
                    ix = ox * sw + kx - pw
                    valid = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < wd)
                    if not valid.any():
                        continue
                    src = np.where(valid, x[:, ci, np.clip(iy, 0, h - 1), np.clip(ix, 0, wd - 1)], -1)
                    xs = np.broadcast_to(src[:, None, :, :], shape)
                    ws = np.broadcast_to(bld.consts(w[:, ci, ky, kx])[None, :, None, None], shape)
                    sel = xs >= 0
                    term = np.full(shape, -1, dtype=np.int64)
                    term[sel] = bld.mul(xs[sel], ws[sel])
                    if cfg.mode != ACCUMULATE:
                        term[sel] = self._finish_linear(node, term[sel], False)
                    first = sel & (acc < 0)
                    rest = sel & (acc >= 0)
                    acc[first] = term[first]
                    acc[rest] = bld.add(acc[rest], term[rest])
                    n_terms += 1
        acc[acc < 0] = bld.const(0)
        if cfg.mode == ACCUMULATE:
            if b is not None:
                bias = bld.consts(cfg.alpha * b.astype(object))[None, :, None, None]
                acc = bld.add(acc, np.broadcast_to(bias, shape))
            out = self._finish_linear(node, acc, fuse)
            self.bound[node.output] = 1 << (cfg.nu - 1)
        else:
            if b is not None:
                acc = bld.add(acc, np.broadcast_to(bld.consts(b)[None, :, None, None], shape))
            out = acc
            self.bound[node.output] = n_terms * (1 << (cfg.nu - 1)) + (int(np.abs(b).max()) if b is not None else 0)
            self._need(node, self.bound[node.output], "sum of rescaled products")
        self.wires[node.output] = out

    def lower_maxpool(self, node: ModelNode) -> None:
        x = self.wires[node.inputs[0]]
        bound = self.bound[node.inputs[0]]
        self._audit_compare(node, bound)
        (kh, kw), (sh, sw) = node.pair_attr("kernel_shape", 1), node.pair_attr("stride", 1)
        oh, ow = (x.shape[2] - kh) // sh + 1, (x.shape[3] - kw) // sw + 1
        level = [
            x[:, :, i : i + sh * (oh - 1) + 1 : sh, j : j + sw * (ow - 1) + 1 : sw]
            for i in range(kh)
            for j in range(kw)
        ]
        shape = level[0].shape
        while len(level) > 1:
            nxt = []
            for t in range(0, len(level) - 1, 2):
                m = gadgets.max_of(self.bld, level[t].ravel(), level[t + 1].ravel(), self.cfg.kappa)
                nxt.append(m.reshape(shape))
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        self.wires[node.output] = level[0]
        self.bound[node.output] = bound

    def lower_relu(self, node: ModelNode) -> None:
        c = self.wires[node.inputs[0]]
        bound = self.bound[node.inputs[0]]
        self._audit_compare(node, bound)
        self.wires[node.output] = gadgets.relu(self.bld, c.ravel(), self.cfg.kappa).reshape(c.shape)
        self.bound[node.output] = bound


def fusion_plan(graph: ModelGraph, qcfg: QuantConfig) -> dict[str, str]:
    """Map each fusable Gemm/Conv2D output to the ReLU that consumes it."""
    if not qcfg.fuse_relu or qcfg.mode != ACCUMULATE:
        return {}
    plan = {}
    for node in graph.ordered():
        if node.op_kind not in ("Gemm", "Conv2D") or node.output == graph.output_name:
            continue
        users = graph.consumers(node.output)
        if len(users) == 1 and users[0].op_kind == "ReLU":
            plan[node.output] = users[0].output
    return plan


def lower(qm: QuantizedModel, fcfg: FieldConfig = DEFAULT_FIELD, ccfg: CostConfig | None = None) -> ConstraintSystem:
    ccfg = ccfg or CostConfig()
    qm.qcfg.check_field(fcfg)
    graph = qm.graph
    shapes = infer_shapes(graph)
    lw = _Lowering(qm, fcfg)
    lw.lower_input(graph.graph_input.shape)
    plan = fusion_plan(graph, qm.qcfg)
    fused_relus = set(plan.values())
    for node in graph.ordered():
        if node.op_kind == "Gemm":
            lw.lower_gemm(node, node.output in plan)
        elif node.op_kind == "Conv2D":
            lw.lower_conv2d(node, node.output in plan)
        elif node.op_kind == "ReLU":
            if node.output in fused_relus:
                lw.wires[node.output] = lw.wires[node.inputs[0]]
                lw.bound[node.output] = lw.bound[node.inputs[0]]
            else:
                lw.lower_relu(node)
        elif node.op_kind == "MaxPool2D":
            lw.lower_maxpool(node)
        elif node.op_kind == "Reshape":
            lw.wires[node.output] = lw.wires[node.inputs[0]].reshape(shapes[node.output].shape)
            lw.bound[node.output] = lw.bound[node.inputs[0]]
        got = lw.wires[node.output].shape
        if got != shapes[node.output].shape:
            raise ShapeError(f"{node.label}: lowered shape {got} != inferred {shapes[node.output].shape}")
        log.debug("lowered %s: %d wires so far", node.label, lw.bld.n_wires)
    out_name = graph.output_name
    return lw.bld.finish(qm.qcfg, ccfg, lw.wires[out_name], graph.graph_input.shape, shapes[out_name].shape)


def compile_model(
    graph: ModelGraph,
    qcfg: QuantConfig | None = None,
    fcfg: FieldConfig = DEFAULT_FIELD,
    ccfg: CostConfig | None = None,
) -> ConstraintSystem:
    """Quantize ``graph`` and lower it; deterministic for identical inputs."""
    qcfg = qcfg or QuantConfig()
    qcfg.check_field(fcfg)
    return lower(quantize_model(graph, qcfg), fcfg, ccfg)
