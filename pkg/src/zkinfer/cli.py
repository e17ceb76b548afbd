"""Command-line pipeline: compile, witness, prove, verify and bench.

Exit codes::

    0 success            5 shape mismatch
    1 I/O error          6 artifact mismatch (stale or cross-wired files)
    2 malformed input    7 prover refusal (witness violates constraints)
    3 unsupported op     8 verifier rejected
    4 overflow / range
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import CostConfig, deserialize_circuit, lower, serialize_circuit
from .errors import (
    ArtifactMismatchError,
    ConfigError,
    ConstraintViolationError,
    FormatError,
    OutOfRangeError,
    OverflowAuditError,
    SchemaError,
    ShapeError,
    UnsupportedOperatorError,
    ZkInferError,
)
from .field import DEFAULT_FIELD, FieldConfig, decode_array, encode_array
from .model import layer_counts, load_input, parse_model
from .proof import ProofArtifact, PublicIO, prove, verify
from .quantize import QuantConfig, QuantizedModel, quantize, quantize_model
from .reference import run_integer_reference
from .witness import Witness, generate_witness, output_document

log = logging.getLogger("zkinfer")

EXIT_OK = 0
EXIT_IO = 1
EXIT_MALFORMED = 2
EXIT_UNSUPPORTED = 3
EXIT_OVERFLOW = 4
EXIT_SHAPE = 5
EXIT_MISMATCH = 6
EXIT_REFUSED = 7
EXIT_REJECTED = 8

# Most specific first.
EXIT_CODES: list[tuple[type, int]] = [
    (UnsupportedOperatorError, EXIT_UNSUPPORTED),
    (SchemaError, EXIT_MALFORMED),
    (FormatError, EXIT_MALFORMED),
    (ConfigError, EXIT_MALFORMED),
    (OverflowAuditError, EXIT_OVERFLOW),
    (OutOfRangeError, EXIT_OVERFLOW),
    (ShapeError, EXIT_SHAPE),
    (ArtifactMismatchError, EXIT_MISMATCH),
    (ConstraintViolationError, EXIT_REFUSED),
]

CONFIG_ENV = "ZKINFER_CONFIG"
SIDECAR_SUFFIX = ".quant.json"


class Rejected(Exception):
    pass


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, Rejected):
        return EXIT_REJECTED
    if isinstance(exc, OSError):
        return EXIT_IO
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_MALFORMED


@dataclass
class PipelineConfig:
    fcfg: FieldConfig = DEFAULT_FIELD
    quant: QuantConfig = dc_field(default_factory=QuantConfig)
    cost: CostConfig = dc_field(default_factory=CostConfig)
    paths: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.quant.check_field(self.fcfg)
        seen = {}
        for role, p in self.paths.items():
            if p is None:
                continue
            key = os.path.abspath(p)
            if key in seen:
                raise ConfigError(f"--{role} and --{seen[key]} point at the same file {p}")
            seen[key] = role

    @classmethod
    def from_args(cls, args, paths: dict) -> "PipelineConfig":
        doc = {}
        cfg_path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
        if cfg_path:
            text = Path(cfg_path).read_text()
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {cfg_path}: {exc}") from exc
            if not isinstance(doc, dict):
                raise ConfigError("config file must hold a JSON object")
        fdoc = dict(doc.get("field", {}))
        qdoc = dict(doc.get("quant", {}))
        if getattr(args, "prime", None) is not None:
            fdoc["p"] = args.prime
        for flag, key in (("scale_exponent", "s"), ("nu", "nu"), ("kappa", "kappa"), ("mode", "mode")):
            v = getattr(args, flag, None)
            if v is not None:
                qdoc[key] = v
        if getattr(args, "no_fuse", False):
            qdoc["fuse_relu"] = False
        fcfg = FieldConfig.from_dict(fdoc) if fdoc else DEFAULT_FIELD
        return cls(fcfg, QuantConfig.from_dict(qdoc), CostConfig.from_dict(doc.get("cost", {})), paths)


# -- helpers --------------------------------------------------------------------


def _read_bytes(path) -> bytes:
    return Path(path).read_bytes()


def _read_json(path, what: str):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{what} {path} is not valid JSON: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise SchemaError(f"{what} {path} is not text") from exc


def _write(path, data) -> None:
    p = Path(path)
    if isinstance(data, bytes):
        p.write_bytes(data)
    else:
        p.write_text(data)


def sidecar_path(circuit_path) -> Path:
    return Path(str(circuit_path) + SIDECAR_SUFFIX)


def _load_circuit(path):
    return deserialize_circuit(_read_bytes(path))


def _load_sidecar(circuit_path, cs) -> QuantizedModel:
    doc = _read_json(sidecar_path(circuit_path), "quantized-model sidecar")
    if not isinstance(doc, dict):
        raise SchemaError("sidecar must be a JSON object")
    if doc.get("circuit_digest") != cs.digest().hex():
        raise ArtifactMismatchError(
            f"sidecar {sidecar_path(circuit_path)} was written for a different circuit (stale compile?)"
        )
    qm = QuantizedModel.from_dict(doc)
    if qm.qcfg != cs.qcfg:
        raise ArtifactMismatchError("sidecar quantization config differs from the circuit header")
    return qm


def _quantized_input(path, cs):
    x = load_input(_read_bytes(path), cs.input_shape)
    if x.size != int(np.prod(cs.input_shape)):
        raise ShapeError(f"input has {x.size} values, circuit expects shape {list(cs.input_shape)}")
    return quantize(x.reshape(cs.input_shape), cs.qcfg, "input").data


class _Out:
    def __init__(self, as_json: bool):
        self.as_json = as_json
        self.doc: dict = {}

    def line(self, text: str) -> None:
        if not self.as_json:
            print(text)

    def flush(self) -> None:
        if self.as_json:
            print(json.dumps(self.doc, indent=2, sort_keys=True))


# -- commands -------------------------------------------------------------------


def cmd_compile(args, out: _Out) -> int:
    cfg = PipelineConfig.from_args(args, {"model": args.model, "circuit": args.circuit})
    t0 = time.perf_counter()
    graph = parse_model(_read_bytes(args.model))
    qm = quantize_model(graph, cfg.quant)
    cs = lower(qm, cfg.fcfg, cfg.cost)
    blob = serialize_circuit(cs)
    elapsed = time.perf_counter() - t0
    qm.meta = {"circuit_digest": cs.digest().hex(), "field": cfg.fcfg.to_dict()}
    _write(args.circuit, blob)
    _write(sidecar_path(args.circuit), json.dumps(qm.to_dict()))
    counts = cs.counts.to_dict()
    out.doc.update(
        command="compile", counts=counts, total_cost=cs.total_cost(), constraints=cs.n_constraints,
        layers=layer_counts(graph), parameters=graph.parameter_count(),
        circuit_digest=cs.digest().hex(), circuit_bytes=len(blob), seconds=elapsed,
    )
    out.line(f"compiled {args.model} -> {args.circuit} ({len(blob)} bytes) in {elapsed:.2f}s")
    for k, v in counts.items():
        out.line(f"  {k:<14} {v}")
    out.line(f"  total cost   {cs.total_cost()}")
    return EXIT_OK


def cmd_witness(args, out: _Out) -> int:
    PipelineConfig(paths={"circuit": args.circuit, "input": args.input, "output": args.output, "witness": args.witness})
    t0 = time.perf_counter()
    cs = _load_circuit(args.circuit)
    qm = _load_sidecar(args.circuit, cs)
    x = _quantized_input(args.input, cs)
    w = generate_witness(cs, x)
    doc = output_document(cs, w)
    ref = run_integer_reference(qm, x).ravel().tolist()
    if ref != doc["output"]:
        raise ArtifactMismatchError("circuit output disagrees with integer inference of the sidecar model")
    _write(args.witness, w.to_bytes())
    _write(args.output, json.dumps(doc))
    elapsed = time.perf_counter() - t0
    out.doc.update(command="witness", wires=cs.n_wires, output=doc["output"], seconds=elapsed,
                   circuit_digest=cs.digest().hex())
    out.line(f"witness: {cs.n_wires} wires -> {args.witness}; output -> {args.output} in {elapsed:.2f}s")
    return EXIT_OK


def cmd_prove(args, out: _Out) -> int:
    PipelineConfig(paths={"circuit": args.circuit, "witness": args.witness, "proof": args.proof})
    t0 = time.perf_counter()
    cs = _load_circuit(args.circuit)
    w = Witness.from_bytes(_read_bytes(args.witness))
    if w.values.size != cs.n_wires:
        raise ArtifactMismatchError(f"witness has {w.values.size} wires, circuit has {cs.n_wires}")
    pa = prove(cs, w)
    blob = pa.to_bytes()
    _write(args.proof, blob)
    elapsed = time.perf_counter() - t0
    out.doc.update(command="prove", proof_bytes=len(blob), seconds=elapsed, circuit_digest=pa.circuit_digest.hex(),
                   io_digest=pa.io_digest.hex(), witness_digest=pa.witness_digest.hex(), openings=len(pa.openings))
    out.line(f"proof: {len(blob)} bytes, {len(pa.openings)} openings -> {args.proof} in {elapsed:.2f}s")
    return EXIT_OK


def _presented_io(args, cs) -> PublicIO:
    try:
        x = _quantized_input(args.input, cs)
    except (OverflowAuditError, ShapeError) as exc:
        raise Rejected(f"presented input: {exc}") from exc
    doc = _read_json(args.output, "output file")
    if not isinstance(doc, dict) or not isinstance(doc.get("output"), list):
        raise SchemaError("output file needs an 'output' integer array")
    ys = doc["output"]
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in ys):
        raise SchemaError("'output' entries must be integers")
    fv = doc.get("float_view")
    if fv is not None:
        alpha = float(cs.qcfg.alpha)
        if not isinstance(fv, list) or len(fv) != len(ys) or any(
            not isinstance(f, (int, float)) or f != y / alpha for f, y in zip(fv, ys)
        ):
            raise Rejected("output float_view is inconsistent with the integer output")
    if doc.get("scale_exponent", cs.qcfg.s) != cs.qcfg.s:
        raise Rejected("output scale_exponent differs from the circuit")
    try:
        outs = encode_array(ys, cs.fcfg)
    except OutOfRangeError as exc:
        raise Rejected(f"presented output: {exc}") from exc
    return PublicIO(encode_array(x.ravel().tolist(), cs.fcfg), outs)


def cmd_verify(args, out: _Out) -> int:
    PipelineConfig(paths={"circuit": args.circuit, "input": args.input, "output": args.output,
                          "witness": args.witness, "proof": args.proof})
    t0 = time.perf_counter()
    cs = _load_circuit(args.circuit)
    w = Witness.from_bytes(_read_bytes(args.witness))
    pa = ProofArtifact.from_bytes(_read_bytes(args.proof))
    io = _presented_io(args, cs)
    verdict = verify(cs, io, w, pa)
    elapsed = time.perf_counter() - t0
    out.doc.update(command="verify", accepted=verdict.accepted, reason=verdict.reason, clause=verdict.clause,
                   seconds=elapsed)
    if not verdict:
        raise Rejected(f"{verdict.clause}: {verdict.reason}")
    out.line(f"OK: proof verified against {cs.n_constraints} constraints in {elapsed:.2f}s")
    out.line(f"  output {decode_array(io.outputs, cs.fcfg)}")
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def cmd_bench(args, out: _Out) -> int:
    from .bench import SweepSpec, emit_report, run_sweep, standard_fits

    cfg = PipelineConfig.from_args(args, {})
    default = [2, 3, 4, 5, 6] if args.kind == "depth" else [8, 16, 24, 32]
    spec = SweepSpec(args.kind, args.sizes or default, h=args.height, in_channels=args.in_channels,
                     channels=args.channels, hidden=args.hidden, seed=args.seed)
    records = run_sweep(spec, args.iterations, cfg.quant, cfg.fcfg, cfg.cost, interleave=not args.no_interleave)
    fits = standard_fits(records)
    csv_path, md_path = emit_report(records, fits, args.out)
    out.doc.update(command="bench", csv=str(csv_path), report=str(md_path),
                   failed=[r.size for r in records if not r.ok],
                   fits={k: {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}
                         for k, f in fits.items()})
    out.line(md_path.read_text())
    out.line(f"wrote {csv_path} and {md_path}")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------


def _config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help=f"JSON pipeline config (default: ${CONFIG_ENV})")
    g.add_argument("--scale-exponent", "-s", type=int, dest="scale_exponent", help="fixed-point scale 2^s")
    g.add_argument("--nu", type=int, help="requantization quotient width")
    g.add_argument("--kappa", type=int, help="range-check width")
    g.add_argument("--prime", type=int, help="field modulus")
    g.add_argument("--mode", choices=["accumulate", "per_product"])
    g.add_argument("--no-fuse", action="store_true", help="disable MatMul+ReLU fusion")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zkinfer", description="Verifiable quantized inference pipeline.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="import, quantize and compile a model into a circuit")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-c", "--circuit", required=True)
    _config_flags(p)

    p = sub.add_parser("witness", help="run the quantized model and write the witness")
    p.add_argument("-c", "--circuit", required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-w", "--witness", required=True)

    p = sub.add_parser("prove", help="produce a proof for a witness")
    p.add_argument("-c", "--circuit", required=True)
    p.add_argument("-w", "--witness", required=True)
    p.add_argument("-p", "--proof", required=True)

    p = sub.add_parser("verify", help="check a proof against all artifacts")
    p.add_argument("-c", "--circuit", required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-w", "--witness", required=True)
    p.add_argument("-p", "--proof", required=True)

    p = sub.add_parser("bench", help="run a depth or breadth sweep and write CSV + markdown")
    p.add_argument("--kind", choices=["depth", "breadth"], default="depth")
    p.add_argument("--sizes", type=_int_list, help="depths or input sides, comma separated")
    p.add_argument("--height", type=int, default=16, help="input side for depth sweeps")
    p.add_argument("--in-channels", type=int, default=1)
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--no-interleave", action="store_true", help="run each size's iterations back to back")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench_out")
    _config_flags(p)
    return ap


COMMANDS = {
    "compile": cmd_compile,
    "witness": cmd_witness,
    "prove": cmd_prove,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = _Out(args.json)
    try:
        code = COMMANDS[args.command](args, out)
    except (ZkInferError, OSError, Rejected) as exc:
        code = exit_code_for(exc)
        if isinstance(exc, OSError):
            msg = f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc)
        else:
            msg = str(exc)
        out.doc.update(command=args.command, error=msg, exit_code=code)
        label = "REJECTED" if code == EXIT_REJECTED else "error"
        print(f"{label}: {msg}", file=sys.stderr)
    out.doc.setdefault("exit_code", code)
    out.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
