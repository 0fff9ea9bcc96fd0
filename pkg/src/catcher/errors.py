"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a run configuration file fails to parse or validate."""


class InfeasibleDesignError(ValueError):
    """Raised when no mirror protocol can satisfy the requested bounds."""


class UncertaintyViolationError(ValueError):
    """Raised when a wave-packet spec violates dx*dv >= 1/(2*mu)."""


class LeakageError(RuntimeError):
    """Raised when the wavefunction reaches a grid edge above tolerance."""
