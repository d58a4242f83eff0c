"""Exception hierarchy shared by all kerrcat modules."""


class KerrCatError(Exception):
    """Base class for all library errors."""


class DomainError(KerrCatError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class TruncationError(KerrCatError):
    """The truncated Fock space is too small for the requested state."""


class IntegrationError(KerrCatError, ArithmeticError):
    """A time-stepping scheme failed its accuracy or positivity checks."""


class StepSizeError(IntegrationError):
    """Krotov functional increased despite step-size adaptation."""


class ResonanceError(DomainError):
    """Parameters sit inside the guard band of a multiphoton resonance."""
