"""Exception hierarchy shared by every module of the package."""


class ModelError(Exception):
    """Base class for all errors raised by dissipative_modes."""


class ParameterError(ModelError, ValueError):
    """Invalid model parameters or mode specification."""


class DomainError(ModelError, ValueError):
    """Argument outside the domain where a quantity is defined."""


class NotRecordableError(DomainError):
    """The mode has no recording window (2*omega0/L <= 1)."""


class PastDeadlineError(DomainError):
    """Evaluation time at or beyond the recording deadline T_{k,n}."""


class CapabilityError(ModelError, ValueError):
    """Request beyond what the implementation supports (e.g. Bessel order)."""


class IntegrationError(ModelError, ArithmeticError):
    """Numerical integration aborted; carries the last accepted state."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class RegistryError(ModelError):
    """Base class for memory registry failures."""


class ClockError(RegistryError, ValueError):
    """An event was submitted with a time earlier than the registry clock."""


class UnknownRecordError(RegistryError, KeyError):
    """Lookup of a record id that is not in the registry."""


class UsageError(ModelError, ValueError):
    """An operation was applied to an object of the wrong kind."""
