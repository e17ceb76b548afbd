"""Depth/breadth sweep generators and the benchmark harness.

Generator convention: 3x3 convolutions with padding 1 and stride 1 keep the
spatial size; the first ``min(d, 2)`` convolutions are each followed by a
2x2 stride-2 max-pool. A ReLU follows every convolution and the first
fully-connected layer. The tail is Reshape -> Gemm(hidden) -> ReLU ->
Gemm(classes) when ``hidden`` is set, else Reshape -> Gemm(classes) -> ReLU.
"""

from __future__ import annotations

import csv
import gc
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import psutil

from .circuit import CostConfig, compile_model, serialize_circuit
from .errors import ShapeError
from .field import DEFAULT_FIELD, FieldConfig
from .model import ModelGraph, ModelNode, TensorSpec, infer_shapes, layer_counts
from .proof import PublicIO, prove, verify
from .quantize import QuantConfig, quantize
from .witness import generate_witness

log = logging.getLogger(__name__)

PHASES = ("compile", "witness", "prove", "verify")
MAD_CONSTANT = 0.6745
MAD_THRESHOLD = 3.5


# -- model generators -------------------------------------------------------


def _lecun(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    lim = math.sqrt(3.0 / fan_in)
    return rng.uniform(-lim, lim, size=shape)


def make_depth_model(
    d: int,
    h: int = 16,
    in_channels: int = 1,
    channels: int = 4,
    hidden: int | None = None,
    classes: int = 10,
    seed: int = 0,
    head_relu: bool = True,
) -> ModelGraph:
    """Conv stack of depth ``d`` on an ``h x h`` input.

    ``head_relu=False`` drops the ReLU after a bare classifier head.
    """
    if d < 1:
        raise ShapeError(f"depth must be >= 1, got {d}")
    n_pool = min(d, 2)
    if h < 2**n_pool or h % 2**n_pool:
        raise ShapeError(f"input side {h} must be a positive multiple of {2**n_pool} for {n_pool} pooling stages")
    rng = np.random.default_rng(seed)
    nodes: list[ModelNode] = []
    inits: dict[str, np.ndarray] = {}
    cur, cin, side = "x", in_channels, h
    for i in range(d):
        w, b = f"conv{i}.w", f"conv{i}.b"
        inits[w] = _lecun(rng, (channels, cin, 3, 3), cin * 9)
        inits[b] = _lecun(rng, (channels,), cin * 9) * 0.1
        nodes.append(ModelNode("Conv2D", (cur, w, b), f"conv{i}", {"stride": 1, "padding": 1}))
        nodes.append(ModelNode("ReLU", (f"conv{i}",), f"relu{i}"))
        cur, cin = f"relu{i}", channels
        if i < n_pool:
            nodes.append(ModelNode("MaxPool2D", (cur,), f"pool{i}", {"kernel_shape": 2, "stride": 2}))
            cur = f"pool{i}"
            side //= 2
    flat = channels * side * side
    nodes.append(ModelNode("Reshape", (cur,), "flat", {"shape": [1, flat]}))
    cur = "flat"
    if hidden:
        inits["fc0.w"] = _lecun(rng, (flat, hidden), flat)
        inits["fc0.b"] = _lecun(rng, (hidden,), flat) * 0.1
        nodes.append(ModelNode("Gemm", (cur, "fc0.w", "fc0.b"), "fc0"))
        nodes.append(ModelNode("ReLU", ("fc0",), "fc0.relu"))
        inits["fc1.w"] = _lecun(rng, (hidden, classes), hidden)
        inits["fc1.b"] = _lecun(rng, (classes,), hidden) * 0.1
        nodes.append(ModelNode("Gemm", ("fc0.relu", "fc1.w", "fc1.b"), "y"))
        out = "y"
    else:
        inits["fc.w"] = _lecun(rng, (flat, classes), flat)
        inits["fc.b"] = _lecun(rng, (classes,), flat) * 0.1
        if head_relu:
            nodes.append(ModelNode("Gemm", (cur, "fc.w", "fc.b"), "logits"))
            nodes.append(ModelNode("ReLU", ("logits",), "y"))
        else:
            nodes.append(ModelNode("Gemm", (cur, "fc.w", "fc.b"), "y"))
        out = "y"
    graph = ModelGraph(nodes, inits, TensorSpec("x", (1, in_channels, h, h)), out)
    infer_shapes(graph)
    return graph


def make_breadth_model(h: int, seed: int = 0, **kw) -> ModelGraph:
    """Fixed five-conv architecture at input side ``h``."""
    return make_depth_model(5, h, seed=seed, **kw)


# Presets matching the published sweep architectures (parameter counts agree).
PUBLISHED_DEPTH = {"h": 56, "in_channels": 4, "channels": 16, "hidden": 128}
PUBLISHED_BREADTH = {"in_channels": 4, "channels": 16, "hidden": 256}


# -- measurement ------------------------------------------------------------


class PeakRSS:
    """High-water mark of resident memory, sampled from a background thread.

    Approximate: allocations that come and go between samples are missed.
    """

    def __init__(self, interval: float = 0.002):
        self.interval = interval
        self._proc = psutil.Process(os.getpid())
        self._stop = threading.Event()
        self.peak = 0

    def _run(self):
        while not self._stop.is_set():
            self.peak = max(self.peak, self._proc.memory_info().rss)
            self._stop.wait(self.interval)

    def __enter__(self):
        self.peak = self._proc.memory_info().rss
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        self._thread.join()
        self.peak = max(self.peak, self._proc.memory_info().rss)
        return False


@dataclass
class SweepSpec:
    kind: str = "depth"
    sizes: list[int] = field(default_factory=lambda: [2, 3, 4, 5, 6])
    h: int = 16  # depth sweeps only
    in_channels: int = 1
    channels: int = 4
    hidden: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("depth", "breadth"):
            raise ValueError(f"sweep kind must be 'depth' or 'breadth', got {self.kind!r}")
        if not self.sizes:
            raise ValueError("sweep needs at least one size")

    def model(self, size: int) -> ModelGraph:
        kw = dict(in_channels=self.in_channels, channels=self.channels, hidden=self.hidden, seed=self.seed)
        if self.kind == "depth":
            return make_depth_model(size, self.h, **kw)
        return make_breadth_model(size, **kw)


@dataclass
class SweepRecord:
    kind: str
    size: int
    d: int = 0
    c: int = 0
    p: int = 0
    f: int = 0
    r: int = 0
    parameters: int = 0
    constraints: int | None = None
    total_cost: int | None = None
    time_s: dict = field(default_factory=dict)  # phase -> mean seconds or None
    mem_bytes: dict = field(default_factory=dict)  # phase -> peak RSS or None
    circuit_bytes: int | None = None
    witness_bytes: int | None = None
    proof_bytes: int | None = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def _measure(fn, iterations: int, sample_memory: bool = True):
    """Mean wall time over ``iterations`` runs, then peak RSS from one extra run.

    Timed runs go without the sampler thread (it competes for the GIL and,
    on one core, for the CPU) and with the cyclic GC paused.
    """
    times, result = [], None
    for _ in range(iterations):
        gc.collect()
        gc.disable()
        try:
            t0 = time.perf_counter()
            result = fn()
            times.append(time.perf_counter() - t0)
        finally:
            gc.enable()
    peak = None
    if sample_memory:
        gc.collect()
        with PeakRSS() as mem:
            fn()
        peak = mem.peak
    return result, sum(times) / len(times), peak


def run_one(graph: ModelGraph, record: SweepRecord, iterations: int, qcfg: QuantConfig,
            fcfg: FieldConfig, ccfg: CostConfig, seed: int, sample_memory: bool = True) -> SweepRecord:
    for ph in PHASES:
        record.time_s[ph] = None
        record.mem_bytes[ph] = None
    phase = "compile"
    try:
        cs, t, m = _measure(lambda: compile_model(graph, qcfg, fcfg, ccfg), iterations, sample_memory)
        record.time_s[phase], record.mem_bytes[phase] = t, m
        record.constraints, record.total_cost = cs.n_constraints, cs.total_cost()
        record.circuit_bytes = len(serialize_circuit(cs))

        phase = "witness"
        rng = np.random.default_rng(seed)
        x = quantize(rng.uniform(-1, 1, graph.graph_input.shape), qcfg).data
        w, t, m = _measure(lambda: generate_witness(cs, x), iterations, sample_memory)
        record.time_s[phase], record.mem_bytes[phase] = t, m
        record.witness_bytes = len(w.to_bytes())

        phase = "prove"
        pa, t, m = _measure(lambda: prove(cs, w), iterations, sample_memory)
        record.time_s[phase], record.mem_bytes[phase] = t, m
        record.proof_bytes = len(pa.to_bytes())

        phase = "verify"
        io = PublicIO.from_witness(cs, w)
        verdict, t, m = _measure(lambda: verify(cs, io, w, pa), iterations, sample_memory)
        record.time_s[phase], record.mem_bytes[phase] = t, m
        if not verdict:
            raise RuntimeError(f"verify rejected: {verdict.reason}")
    except (Exception, MemoryError) as exc:  # recorded, the sweep goes on
        record.error = f"{phase}: {type(exc).__name__}: {exc}"
        log.warning("%s=%d failed in %s", record.kind, record.size, record.error)
    return record


def run_sweep(spec: SweepSpec, iterations: int = 1, qcfg: QuantConfig | None = None,
              fcfg: FieldConfig = DEFAULT_FIELD, ccfg: CostConfig | None = None,
              sample_memory: bool = True, interleave: bool = True) -> list[SweepRecord]:
    """Run every size of ``spec``; runtimes are means over ``iterations``.

    With ``interleave`` the iterations are taken in rounds over all sizes
    (one run of each size per round) so that slow phases of the machine
    spread across sizes instead of landing on one of them. Peak memory is
    sampled in the first round only.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    qcfg, ccfg = qcfg or QuantConfig(), ccfg or CostConfig()
    records, live = [], []
    for size in spec.sizes:
        rec = SweepRecord(spec.kind, size)
        records.append(rec)
        try:
            graph = spec.model(size)
        except Exception as exc:
            rec.error = f"model: {type(exc).__name__}: {exc}"
            for ph in PHASES:
                rec.time_s[ph] = rec.mem_bytes[ph] = None
            continue
        counts = layer_counts(graph)
        rec.d = counts["c"]
        rec.c, rec.p, rec.f, rec.r = counts["c"], counts["p"], counts["f"], counts["r"]
        rec.parameters = graph.parameter_count()
        live.append((rec, graph, {ph: [] for ph in PHASES}))

    rounds, per_round = (iterations, 1) if interleave else (1, iterations)
    for rnd in range(rounds):
        for rec, graph, times in live:
            if not rec.ok:
                continue
            mem = dict(rec.mem_bytes)
            run_one(graph, rec, per_round, qcfg, fcfg, ccfg, spec.seed, sample_memory and rnd == 0)
            if rnd:
                rec.mem_bytes = mem
            for ph, t in rec.time_s.items():
                if t is not None:
                    times[ph].append(t)
    for rec, _, times in live:
        for ph in PHASES:
            done = rec.time_s[ph] is not None and times[ph]
            rec.time_s[ph] = sum(times[ph]) / len(times[ph]) if done else None
            if not done:
                rec.mem_bytes[ph] = None
    return records


# -- statistics ---------------------------------------------------------------


def mad_zscores(xs) -> np.ndarray:
    """Modified z-scores ``0.6745 |x - median| / MAD`` (inf/0 when MAD is 0)."""
    x = np.asarray(xs, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two values")
    med = np.median(x)
    dev = np.abs(x - med)
    mad = np.median(dev)
    if mad == 0:
        return np.where(dev > 0, np.inf, 0.0)
    return MAD_CONSTANT * dev / mad


def mad_outliers(xs) -> list[bool]:
    """Flag z > 3.5. With MAD = 0 every point off the median is flagged."""
    return [bool(z > MAD_THRESHOLD) for z in mad_zscores(xs)]


@dataclass
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    excluded: list[bool]
    n: int


def linear_fit(x, y, exclude=None) -> RegressionResult:
    """Ordinary least squares on the points not flagged in ``exclude``.

    If y has zero variance, R^2 is reported as 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("x and y differ in length")
    excl = [False] * x.size if exclude is None else [bool(e) for e in exclude]
    keep = ~np.asarray(excl, dtype=bool)
    xs, ys = x[keep], y[keep]
    if xs.size < 2:
        raise ValueError("need at least two points to fit")
    dx = xs - xs.mean()
    sxx = float(dx @ dx)
    if sxx == 0:
        raise ValueError("degenerate fit: all x values are equal")
    slope = float(dx @ (ys - ys.mean())) / sxx
    intercept = float(ys.mean() - slope * xs.mean())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    if ss_tot == 0:
        r2 = 0.0
    else:
        ss_res = float(((ys - (slope * xs + intercept)) ** 2).sum())
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RegressionResult(slope, intercept, r2, excl, int(xs.size))


# -- reports ------------------------------------------------------------------

_BASE_COLS = ["kind", "size", "d", "c", "p", "f", "r", "parameters", "constraints", "total_cost"]
_SIZE_COLS = ["circuit_bytes", "witness_bytes", "proof_bytes"]
CSV_COLUMNS = (
    _BASE_COLS
    + [f"time_{ph}_s" for ph in PHASES]
    + [f"mem_{ph}_bytes" for ph in PHASES]
    + _SIZE_COLS
    + ["error"]
)
MISSING = "--"


def _row(rec: SweepRecord) -> dict:
    row = {k: getattr(rec, k) for k in _BASE_COLS + _SIZE_COLS}
    for ph in PHASES:
        row[f"time_{ph}_s"] = rec.time_s.get(ph)
        row[f"mem_{ph}_bytes"] = rec.mem_bytes.get(ph)
    row["error"] = rec.error
    return {k: (MISSING if v is None else (repr(v) if isinstance(v, float) else v)) for k, v in row.items()}


def load_csv(path) -> list[SweepRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            def num(key, conv=int):
                v = row[key]
                return None if v == MISSING else conv(v)

            rec = SweepRecord(row["kind"], int(row["size"]))
            for k in ("d", "c", "p", "f", "r", "parameters"):
                setattr(rec, k, int(row[k]))
            for k in ("constraints", "total_cost", *_SIZE_COLS):
                setattr(rec, k, num(k))
            rec.time_s = {ph: num(f"time_{ph}_s", float) for ph in PHASES}
            rec.mem_bytes = {ph: num(f"mem_{ph}_bytes") for ph in PHASES}
            rec.error = row["error"]
            out.append(rec)
    return out


def _fmt_time(v):
    return MISSING if v is None else f"{v:.3f}"


def _fmt_mem(v):
    return MISSING if v is None else f"{v / 2**20:.1f}"


def _fmt(v):
    return MISSING if v is None else f"{v:,}" if isinstance(v, int) else str(v)


def emit_report(records: list[SweepRecord], fits: dict | None, out_dir) -> tuple[Path, Path]:
    """Write ``sweep.csv`` and ``report.md``; returns their paths."""
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, md_path = out / "sweep.csv", out / "report.md"
    with open(csv_path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        wr.writeheader()
        for rec in records:
            wr.writerow(_row(rec))

    key = "d" if records[0].kind == "depth" else "h"
    lines = [f"# {records[0].kind.capitalize()} sweep", ""]
    head = [key, "c", "p", "f", "r", "Parameters", "Total cost"]
    lines += ["## Model structure", "", "| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for rec in records:
        cells = [rec.size, rec.c, rec.p, rec.f, rec.r, _fmt(rec.parameters), _fmt(rec.total_cost)]
        lines.append("| " + " | ".join(str(c) for c in cells) + " |")
    for title, src, fmt in (("Runtime (s) by phase", "time_s", _fmt_time), ("Peak memory (MiB) by phase", "mem_bytes", _fmt_mem)):
        lines += ["", f"## {title}", "", f"| {key} | " + " | ".join(p.capitalize() for p in PHASES) + " |", "|---|" + "---|" * len(PHASES)]
        for rec in records:
            vals = getattr(rec, src)
            lines.append(f"| {rec.size} | " + " | ".join(fmt(vals.get(ph)) for ph in PHASES) + " |")
    lines += ["", "## Artifact sizes (bytes)", "", f"| {key} | Circuit | Witness | Proof |", "|---|---|---|---|"]
    for rec in records:
        lines.append(f"| {rec.size} | {_fmt(rec.circuit_bytes)} | {_fmt(rec.witness_bytes)} | {_fmt(rec.proof_bytes)} |")
    failed = [r for r in records if r.error]
    if failed:
        lines += ["", "## Failures", ""] + [f"- {key}={r.size}: {r.error}" for r in failed]
    if fits:
        lines += ["", "## Regressions", "", "| Fit | Slope | Intercept | R^2 | Excluded |", "|---|---|---|---|---|"]
        for name, fit in fits.items():
            lines.append(f"| {name} | {fit.slope:.6g} | {fit.intercept:.6g} | {fit.r_squared:.4f} | {sum(fit.excluded)} |")
    md_path.write_text("\n".join(lines) + "\n")
    return csv_path, md_path


def standard_fits(records: list[SweepRecord]) -> dict[str, RegressionResult]:
    """Cost against size, and each phase's runtime against cost, MAD-filtered."""
    ok = [r for r in records if r.ok]
    fits: dict[str, RegressionResult] = {}
    if len(ok) < 2:
        return fits
    size = [r.size for r in ok]
    cost = [r.total_cost for r in ok]
    try:
        fits["total_cost ~ size"] = linear_fit(size, cost)
    except ValueError:
        pass
    for ph in PHASES:
        t = [r.time_s[ph] for r in ok]
        try:
            fits[f"time_{ph} ~ total_cost"] = linear_fit(cost, t, exclude=mad_outliers(t))
        except ValueError:
            pass
    return fits
