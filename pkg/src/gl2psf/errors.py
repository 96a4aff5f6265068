"""Exception taxonomy shared by every module.

Two families matter operationally. Resource errors mean a computation was
refused or abandoned because it would exceed a configured budget; they map
to CLI exit code 2. Mathematical errors mean two routes that must agree did
not, or a numeric refinement stalled above tolerance; they map to exit code
3 (a mismatch is a finding, not a crash). Everything else (bad inputs,
unsupported settings) exits 1.
"""


class Gl2PsfError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ResourceError(Gl2PsfError):
    """A budget or guardrail was hit before the value could be computed."""

    exit_code = 2


class BudgetExceeded(ResourceError):
    """An operation's estimated cell count exceeds the configured cap."""


class ConductorTooLarge(ResourceError):
    """A cyclotomic level with degree beyond the supported bound was requested."""


class InsufficientPrecision(ResourceError):
    """A point was supplied at a coarser level than the evaluation needs."""


class MathematicalError(Gl2PsfError):
    """Two independently computed routes to the same value disagree."""

    exit_code = 3


class MismatchDetected(MathematicalError):
    """Exact self-check failure between two routes that must agree."""


class ToleranceNotMet(MathematicalError):
    """Numeric refinement stalled above the requested tolerance."""


class SingularMatrix(Gl2PsfError):
    """A linear map that must be invertible is not."""


class Unsupported(Gl2PsfError):
    """The requested setting is outside the supported theory."""
