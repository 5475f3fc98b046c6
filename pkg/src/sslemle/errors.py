"""Exception hierarchy shared by the library and the CLI."""

from typing import Any, Optional


class SSLEMLEError(Exception):
    """Base class for every error raised by sslemle.

    Each subclass carries a stable machine code and a process exit code so the
    CLI can report failures in a single parsable line.
    """

    code: str = "internal"
    exit_code: int = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def one_line(self) -> str:
        """Render as ``error=<code> exit=<int> message=<text>`` on a single line."""
        text = " ".join(self.message.split())
        return f"error={self.code} exit={self.exit_code} message={text}"


class ConfigError(SSLEMLEError):
    code = "config"
    exit_code = 2


class SchemaError(SSLEMLEError):
    """A named column is missing from a CSV file."""

    code = "schema"
    exit_code = 3

    def __init__(self, message: str, column: Optional[str] = None):
        super().__init__(message)
        self.column = column


class ParseError(SSLEMLEError):
    """A CSV cell does not parse as a decimal number."""

    code = "parse"
    exit_code = 4

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message)
        self.row = row


class DatasetMissingError(SSLEMLEError):
    code = "dataset-missing"
    exit_code = 5


class SizingError(SSLEMLEError):
    code = "sizing"
    exit_code = 6


class DegenerateColumnError(SSLEMLEError):
    code = "degenerate-column"
    exit_code = 7


class ShapeError(SSLEMLEError):
    code = "shape"
    exit_code = 8


class NonDifferentiableError(SSLEMLEError):
    """Derivative requested at the kink of the Laplace density."""

    code = "non-differentiable"
    exit_code = 9


class UnsupportedOrderError(SSLEMLEError):
    code = "unsupported-order"
    exit_code = 10


class DomainError(SSLEMLEError):
    code = "domain"
    exit_code = 11


class RankDeficientError(SSLEMLEError):
    """The matched design does not have full column rank."""

    code = "rank-deficient"
    exit_code = 12


class UnsupportedModelError(SSLEMLEError):
    code = "unsupported-model"
    exit_code = 13


class BadStartError(SSLEMLEError):
    code = "bad-start"
    exit_code = 14


class DimensionError(SSLEMLEError):
    code = "dimension"
    exit_code = 15


class EstimationError(SSLEMLEError):
    """No restart produced a converged maximizer."""

    code = "estimation"
    exit_code = 16

    def __init__(self, message: str, diagnostics: Any = None):
        super().__init__(message)
        self.diagnostics = diagnostics


class SingularMatrixError(SSLEMLEError):
    code = "singular-matrix"
    exit_code = 17


class SimulationError(SSLEMLEError):
    code = "simulation"
    exit_code = 18
