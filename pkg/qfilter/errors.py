"""
Error types raised by the qfilter library.

Every error carries a stable `code` so the CLI can print a one-line,
machine-parsable failure (`error code=<CODE> message=<text>`).
"""

from typing import Optional


class QFilterError(Exception):
    """Base class for all library errors."""

    code: str = "QFILTER_ERROR"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_line(self) -> str:
        return f"error code={self.code} message={self.message}"


class InvalidParameter(QFilterError):
    code = "INVALID_PARAMETER"

    def __init__(self, field: str, detail: str = ""):
        self.field = field
        super().__init__(f"invalid {field}" + (f": {detail}" if detail else ""))


class NonNormalizable(QFilterError):
    """Re(omega) <= 0: the Gaussian cannot be normalized."""

    code = "NON_NORMALIZABLE"


class DegenerateCase(QFilterError):
    """Quantity undefined for lambda = 0 (free spreading, no stationary width)."""

    code = "DEGENERATE_CASE"


class BlowUp(QFilterError):
    code = "BLOW_UP"

    def __init__(self, t: float, step: Optional[int] = None, trajectory: Optional[int] = None):
        self.t = t
        self.step = step
        self.trajectory = trajectory
        where = f"t={t:.6g}"
        if step is not None:
            where += f" step={step}"
        if trajectory is not None:
            where += f" trajectory={trajectory}"
        super().__init__(f"Re(omega) <= 0 encountered at {where}")

    def tagged(self, trajectory: int) -> "BlowUp":
        """Return a copy tagged with the trajectory index it occurred in."""
        return BlowUp(self.t, step=self.step, trajectory=trajectory)


class ShapeMismatch(QFilterError):
    code = "SHAPE_MISMATCH"


class PacketOutOfDomain(QFilterError):
    code = "PACKET_OUT_OF_DOMAIN"


class NotNormalized(QFilterError):
    code = "NOT_NORMALIZED"


class BoundaryMassExceeded(QFilterError):
    code = "BOUNDARY_MASS_EXCEEDED"


class ParseError(QFilterError):
    code = "PARSE_ERROR"

    def __init__(self, line: int, detail: str):
        self.line = line
        super().__init__(f"line {line}: {detail}")


class UnknownKey(QFilterError):
    code = "UNKNOWN_KEY"

    def __init__(self, name: str, line: Optional[int] = None):
        self.name = name
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"unknown key {name}{where}")


class ToleranceFailed(QFilterError):
    """An in-run tolerance summary did not pass."""

    code = "TOLERANCE_FAILED"


class IOFailure(QFilterError):
    """A config or output file could not be read or written."""

    code = "IO_ERROR"
