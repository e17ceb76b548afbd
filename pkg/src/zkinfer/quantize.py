"""Fixed-point quantization at a power-of-two scale and integer requantization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OutOfRangeError, OverflowAuditError, SchemaError
from .field import FieldConfig
from .model import ModelGraph, TensorSpec, graph_from_dict, graph_to_dict

ACCUMULATE = "accumulate"
PER_PRODUCT = "per_product"


@dataclass(frozen=True)
class QuantConfig:
    """Scale ``alpha = 2**s``, quotient width ``nu`` and range-check width ``kappa``.

    ``mode`` selects where dot products are rescaled: once per accumulated
    sum (``accumulate``) or once per scalar product (``per_product``).
    """

    s: int = 16
    nu: int = 32
    kappa: int = 32
    mode: str = ACCUMULATE
    fuse_relu: bool = True

    def __post_init__(self):
        if self.s < 1:
            raise ConfigError("scale exponent s must be >= 1")
        if self.kappa < 1 or self.nu < 1:
            raise ConfigError("bit widths must be >= 1")
        if self.kappa > self.nu:
            raise ConfigError(f"kappa={self.kappa} must not exceed nu={self.nu}")
        if self.mode not in (ACCUMULATE, PER_PRODUCT):
            raise ConfigError(f"unknown requantization mode {self.mode!r}")

    @property
    def alpha(self) -> int:
        return 1 << self.s

    @property
    def offset(self) -> int:
        """Translation ``alpha * 2**(nu-1)`` applied before division."""
        return self.alpha << (self.nu - 1)

    @property
    def qmax(self) -> int:
        return (1 << (self.kappa - 1)) - 1

    def check_field(self, fcfg: FieldConfig) -> None:
        if self.alpha << self.nu >= fcfg.half:
            raise ConfigError(
                f"alpha*2^nu = 2^{self.s + self.nu} must stay below (p-1)/2 to avoid wraparound"
            )
        if 1 << self.kappa > fcfg.p:
            raise ConfigError(f"2^kappa exceeds p for kappa={self.kappa}")

    def to_dict(self) -> dict:
        return {"s": self.s, "nu": self.nu, "kappa": self.kappa, "mode": self.mode, "fuse_relu": self.fuse_relu}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantConfig":
        try:
            return cls(
                s=int(d.get("s", 16)),
                nu=int(d.get("nu", 32)),
                kappa=int(d.get("kappa", 32)),
                mode=str(d.get("mode", ACCUMULATE)),
                fuse_relu=bool(d.get("fuse_relu", True)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad quantization config: {exc}") from exc


@dataclass
class QuantizedTensor:
    data: np.ndarray
    spec: TensorSpec
    scale_exponent: int


def quantize(z, cfg: QuantConfig, name: str = "tensor") -> QuantizedTensor:
    """Map floats to ``floor(alpha * z)`` (true floor, also for negatives)."""
    arr = np.asarray(z, dtype=np.float64)
    scaled = np.floor(arr * cfg.alpha)
    bad = np.flatnonzero(np.abs(scaled) > cfg.qmax)
    if bad.size:
        idx = tuple(int(i) for i in np.unravel_index(bad[0], arr.shape)) if arr.ndim else ()
        raise OverflowAuditError(
            f"{name}{list(idx)}: value {float(arr[idx])!r} scales to {scaled[idx]:.0f}, "
            f"outside the {cfg.kappa}-bit signed budget"
        )
    data = scaled.astype(np.int64)
    spec = TensorSpec(name, arr.shape if arr.ndim else (1,))
    return QuantizedTensor(data.reshape(arr.shape), spec, cfg.s)


def dequantize(t: QuantizedTensor) -> np.ndarray:
    return np.asarray(t.data, dtype=np.float64) / float(1 << t.scale_exponent)


def requantize_int(ab: int, cfg: QuantConfig) -> tuple[int, int, int]:
    """Translate-and-divide: ``ab + alpha*2**(nu-1) = alpha*q_sharp + r``.

    Returns ``(q, q_sharp, r)`` with ``q = q_sharp - 2**(nu-1) = floor(ab / alpha)``.
    """
    half_window = cfg.offset
    if not -half_window <= ab <= half_window - 1:
        raise OutOfRangeError(f"product {ab} outside requantization window +-alpha*2^{cfg.nu - 1}")
    q_sharp, r = divmod(ab + half_window, cfg.alpha)
    return q_sharp - (1 << (cfg.nu - 1)), q_sharp, r


@dataclass
class QuantizedModel:
    """Graph structure plus integer parameters, all at scale alpha."""

    graph: ModelGraph
    params: dict[str, np.ndarray]
    qcfg: QuantConfig
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        structure = graph_to_dict(self.graph)
        structure["initializers"] = {}
        return {
            "graph": structure,
            "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in self.params.items()},
            "quant": self.qcfg.to_dict(),
            **self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizedModel":
        try:
            params = {
                k: np.array(v["data"], dtype=np.int64).reshape(v["shape"]) for k, v in d["params"].items()
            }
            structure = dict(d["graph"])
            structure["initializers"] = {k: np.zeros(v.shape).tolist() for k, v in params.items()}
            graph = graph_from_dict(structure)
            qcfg = QuantConfig.from_dict(d["quant"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed quantized model: {exc}") from exc
        graph.initializers = {k: v.astype(np.float64) / qcfg.alpha for k, v in params.items()}
        meta = {k: v for k, v in d.items() if k not in ("graph", "params", "quant")}
        return cls(graph, params, qcfg, meta)


def quantize_model(graph: ModelGraph, cfg: QuantConfig) -> QuantizedModel:
    params = {name: quantize(arr, cfg, name).data for name, arr in graph.initializers.items()}
    return QuantizedModel(graph, params, cfg)
