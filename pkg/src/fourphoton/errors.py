"""Error types shared across the package."""


class InvalidStateError(ValueError):
    """State vector fails a structural requirement (shape, norm, finiteness)."""


class EmptyFrameError(ValueError):
    """A coincidence frame with zero total counts was given to an estimator."""


class UnderdeterminedFitError(ValueError):
    """Scan data cannot pin down the three fit parameters."""


class CannotCorrectError(ValueError):
    """Efficiency correction is impossible for the given detector bank."""


class InsufficientDataError(RuntimeError):
    """Not enough rounds or frames to evaluate the requested statistic."""


class ConfigError(ValueError):
    """Bad command-line or config-file input."""
