"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a routine."""


class DegenerateStateError(ValueError):
    """Adiabatic state is undefined (zero coupling at a crossing)."""


class RegimeMismatchError(ValueError):
    """Closed form requested for coefficients belonging to another regime."""


class BoundaryError(ValueError):
    """Coefficients sit on a regime boundary where no closed form applies."""


class SingularConfigurationError(ValueError):
    """A rate or denominator that must be finite vanishes."""


class ConvergenceError(RuntimeError):
    """Iterative scheme or step refinement failed to converge."""


class ConfigError(ValueError):
    """Malformed experiment configuration."""


class ModelValidityWarning(UserWarning):
    """Parameters violate the large-detuning assumptions of the model."""
