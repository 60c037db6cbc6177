"""Exception hierarchy shared by all gripsim modules.

Exit-code mapping used by the CLI: SpecError -> 2, DataError -> 3,
InvariantError -> 4.
"""


class GripError(Exception):
    """Base class for all gripsim errors."""


class SpecError(GripError):
    """Invalid user-supplied parameters (bad model id, bad sweep axis, ...)."""


class DataError(GripError):
    """Malformed or inconsistent input data (files, shapes, ids)."""


class ParseError(DataError):
    """Text input failed to parse. Carries a line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CapacityError(DataError):
    """A value exceeds a representable range (e.g. vertex id over u32)."""


class ShapeError(DataError):
    """Operand dimensions do not match."""


class SchedulingError(SpecError):
    """A command stream cannot be built for the given architecture config."""


class InvariantError(GripError):
    """An internal invariant was violated; indicates a bug."""
