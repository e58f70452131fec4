"""Exception hierarchy shared across the package."""


class ResgridError(Exception):
    """Base class for all package errors."""


class DomainError(ResgridError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(ResgridError, ValueError):
    """A scenario or model configuration is malformed."""


class InfeasibleDemandError(ResgridError):
    """Essential demand exceeds renewable supply plus grid capacity."""

    def __init__(self, message: str, slot: int | None = None):
        super().__init__(message if slot is None else f"slot {slot}: {message}")
        self.slot = slot


class RationalPricingError(ResgridError):
    """A decision branch that requires p(t) < gamma(t) was reached."""


class InstanceTooLargeError(ResgridError):
    """Brute-force enumeration was requested on an instance that is too big."""


class ComparisonError(ResgridError):
    """Run summaries that do not share a scenario were compared."""
