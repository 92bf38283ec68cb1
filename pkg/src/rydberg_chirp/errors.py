"""Shared exception and warning types."""


class RydbergChirpError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RydbergChirpError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class InvalidParameterError(RydbergChirpError, ValueError):
    """A physical or dimensionless parameter violates its constraints."""


class ConfigError(RydbergChirpError, ValueError):
    """A flat key-value configuration is malformed or inconsistent."""


class TruncationError(RydbergChirpError, RuntimeError):
    """Population reached a numerical basis boundary during integration.

    ``boundary`` names the offending edge (``"n_max"``, ``"shell"`` or
    ``"chain_end"``).
    """

    def __init__(self, boundary: str, population: float, threshold: float):
        self.boundary = boundary
        self.population = population
        self.threshold = threshold
        super().__init__(
            f"population {population:.3e} at basis boundary '{boundary}' "
            f"exceeds threshold {threshold:.3e}; enlarge the basis"
        )


class ChainTooShortError(TruncationError):
    """The resonant chain ended before the population stopped climbing."""

    def __init__(self, population: float, threshold: float):
        super().__init__("chain_end", population, threshold)


class ConvergenceError(RydbergChirpError, RuntimeError):
    """An iterative or windowed computation failed its convergence check."""


class IntegrationError(RydbergChirpError, RuntimeError):
    """An ODE integration failed (step underflow or non-finite state)."""


class BracketError(RydbergChirpError, RuntimeError):
    """A root bracket does not contain a sign change."""


class CacheCorruptionWarning(UserWarning):
    """A persisted coupling table failed its content hash and was rebuilt."""
