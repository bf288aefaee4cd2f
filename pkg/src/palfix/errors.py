"""Shared exception types for the palfix toolkit."""


class PalfixError(Exception):
    """Base class for all toolkit errors."""


class ParseError(PalfixError):
    """Syntax error in the concrete formula language, with a position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"syntax error at position {position}: {message}")
        self.position = position


class UnknownAtomError(PalfixError):
    pass


class UnknownAgentError(PalfixError):
    pass


class SizeGuardError(PalfixError):
    """A model or enumeration exceeded an explicit size guard."""


class UnsupportedConstructError(PalfixError):
    """Operation applied to a formula outside its supported fragment."""


class AnnouncementFalseError(PalfixError):
    """The announced formula is false at the evaluation point.

    This is a signal, not a failure: protocol code catches it to detect
    impossible branches.
    """


class NonMonotoneIterationError(PalfixError):
    """The Kleene chain guard observed a non-monotone step."""

    def __init__(self, step: int, before, after):
        super().__init__(
            f"non-monotone iteration at step {step}: "
            f"previous stage is not contained in the next"
        )
        self.step = step
        self.before = before
        self.after = after


class ModelFormatError(PalfixError):
    """A model file violates the partition or valuation invariants."""
