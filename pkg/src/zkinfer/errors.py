"""Exception hierarchy shared across the pipeline.

Each leaf maps to one CLI exit code (see ``zkinfer.cli.EXIT_CODES``).
"""


class ZkInferError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ZkInferError):
    pass


class FieldMismatchError(ConfigError):
    pass


class OutOfRangeError(ZkInferError):
    """A value falls outside the window an encoding or gadget supports."""


class SchemaError(ZkInferError):
    """Model or input document does not follow the JSON schema."""


class UnsupportedOperatorError(SchemaError):
    def __init__(self, op_kind: str, node: str | None = None):
        where = f" (node {node!r})" if node else ""
        super().__init__(f"unsupported operator {op_kind!r}{where}")
        self.op_kind = op_kind


class GraphStructureError(SchemaError):
    """Cycle, dangling tensor reference, or bad graph IO."""


class ShapeError(ZkInferError):
    pass


class OverflowAuditError(ZkInferError):
    """Compile-time magnitude audit or quantization budget failed."""


class WitnessRangeError(OverflowAuditError):
    """An intermediate left its audited window during witness generation."""


class FormatError(ZkInferError):
    """Malformed or truncated on-disk artifact."""


class ArtifactMismatchError(ZkInferError):
    """Artifacts from different pipeline runs were combined."""


class ConstraintViolationError(ZkInferError):
    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)
