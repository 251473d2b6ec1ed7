"""Exception types shared across the package."""


class DiffGTError(Exception):
    """Base class for all package errors."""


class ShapeError(DiffGTError, ValueError):
    """Operands have incompatible or invalid shapes."""


class ConfigError(DiffGTError, ValueError):
    """A configuration value or document is invalid."""


class ParseError(DiffGTError, ValueError):
    """An input file failed to parse; message carries the line number."""


class EmptyDatasetError(DiffGTError, ValueError):
    """The interaction file contained no usable rows."""


class StepError(DiffGTError, ValueError):
    """A diffusion step index is outside the schedule."""


class MissingHandleError(DiffGTError, KeyError):
    """A gradient was requested for a parameter never watched on the tape."""


class DegenerateInputError(DiffGTError, ValueError):
    """Numerically degenerate input (e.g. rank-0 matrix for an SVD projection)."""


class DivergenceError(DiffGTError, ArithmeticError):
    """Training produced a non-finite loss; carries the last finite state."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class IntegrityError(DiffGTError, ValueError):
    """Artifacts do not belong together (e.g. checkpoint/dataset hash mismatch)."""
