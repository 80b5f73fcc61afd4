"""Exception types raised by the simulator and optimizers."""


class SimulationError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(SimulationError):
    """Malformed or inconsistent scenario configuration."""


class NumericalConsistencyError(SimulationError):
    """A quantity left its mathematically valid range by more than round-off."""


class IllConditionedMatrixError(SimulationError):
    """A Hermitian solve was requested on a matrix with condition number > 1e12."""


class DegenerateSindrError(SimulationError):
    """SINDR denominator is non-positive; the receiver captured all received energy."""


class DerivativeSingularityError(SimulationError):
    """An arcsine-law derivative was requested at the branch edge |argument| >= 1."""


class DegenerateGainError(SimulationError):
    """Soft-symbol rescaling gain is numerically zero."""


class NonFiniteGradientError(SimulationError):
    """A gradient update produced NaN or infinity; the run is aborted."""
