"""Exception types raised across the package."""


class SPDCError(Exception):
    """Base class for all package errors."""


class DomainError(SPDCError, ValueError):
    """An input lies outside the domain where a formula is valid."""


class PhaseMatchingError(SPDCError):
    """No phase-matching angle exists for the requested configuration."""


class ContractError(SPDCError, ValueError):
    """A precondition on a matrix or mode set does not hold."""


class ConfigError(SPDCError, ValueError):
    """A run configuration is malformed or incomplete."""


class DegenerateShaperError(SPDCError, ValueError):
    """The shaper transfer function vanishes everywhere."""


class NoGainError(SPDCError, ValueError):
    """The coupling matrix produces no parametric gain."""
