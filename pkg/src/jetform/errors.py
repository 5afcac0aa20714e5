"""Exception types raised across the package.

Every error that a caller might want to catch programmatically gets its own
class here; the CLI maps these onto exit codes.
"""


class JetformError(Exception):
    """Base class for all package errors."""


class ExprParseError(JetformError):
    """Syntax error while parsing an expression or form string."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class UnknownSymbolError(JetformError):
    """An identifier in an expression string is not a known symbol or function."""

    def __init__(self, name, offset):
        super().__init__(f"unknown identifier '{name}' at byte {offset}")
        self.name = name
        self.offset = offset


class ChartError(JetformError):
    """Malformed chart: duplicate coordinates, bad base block, name clashes."""


class ChartMismatchError(JetformError):
    """An operation combined objects attached to different charts."""


class NonAffineError(JetformError):
    """An equation handed to the affine solver is not affine in the unknowns."""

    def __init__(self, message, equation=None):
        super().__init__(message)
        self.equation = equation


class OrderOverflowError(JetformError):
    """A total derivative would need jet coordinates beyond the chart's order."""


class NotBasicError(JetformError):
    """A form expected to factor through a projection fails to do so."""


class IncompatibleError(JetformError):
    """The vertical compatibility conditions fail, so no projected form exists."""

    def __init__(self, message, witnesses=()):
        super().__init__(message)
        self.witnesses = list(witnesses)


class InconsistentError(JetformError):
    """The constraint algorithm produced a condition with no solutions."""


class SingularSystemError(JetformError):
    """The evolution equations do not determine the coordinate velocities."""


class NumericError(JetformError):
    """A numeric evaluation produced a non-finite value."""


class ProblemFormatError(JetformError):
    """A problem description file violates the input schema."""
