"""Exception types raised across the package."""


class CapoError(ValueError):
    """Base class for all package errors."""


class InvalidEnvironmentError(CapoError):
    pass


class InvalidPolicyError(CapoError):
    pass


class InvalidParameterError(CapoError):
    pass


class DomainError(CapoError):
    """An argument lies outside the domain of a step-size rule."""


class ContractError(CapoError):
    """A caller violated an operation's precondition."""


class NumericalError(CapoError):
    pass


class ConfigError(CapoError):
    pass
