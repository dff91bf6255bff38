"""
Exception hierarchy for the JOFC toolkit.

Every error carries the process exit code the CLI maps it to, so that
``main.py`` can translate failures without inspecting messages.
"""


class JofcError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1


class InputValidationError(JofcError, ValueError):
    """Raised when inputs (files, shapes, weights, options) are invalid."""

    exit_code = 1


class SizeCapExceededError(InputValidationError):
    """Raised when a dense mn x mn materialization would exceed the configured cap."""

    def __init__(self, size: int, cap: int, what: str = "dense matrix"):
        self.size = size
        self.cap = cap
        super().__init__(
            f"Refusing to materialize {what} of order {size}: exceeds JOFC_MAX_DENSE_SIZE={cap}"
        )


class NumericalError(JofcError, ArithmeticError):
    """Raised on numerical failure: non-finite stress, singular systems, eigensolver failure."""

    exit_code = 2
