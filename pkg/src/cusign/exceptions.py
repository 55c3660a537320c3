"""Exception types raised by the detectors and the simulation core."""


class RiccatiDivergenceError(RuntimeError):
    """The Riccati fixed-point iteration hit its iteration cap."""


class ConditioningError(ValueError):
    """A matrix that must be inverted is singular or not positive definite."""


class NotPSDError(ValueError):
    """A covariance matrix has an eigenvalue below the PSD tolerance."""


class DegenerateProbabilityError(ValueError):
    """Sign probabilities at 0 or 1 make the absorbing chain singular."""


class UnsupportedThresholdError(ValueError):
    """No tabulated scaling value exists for the requested threshold."""


class TuningError(RuntimeError):
    """Threshold tuning could not reach the requested alarm rate."""


class ConfigError(ValueError):
    """A scenario configuration file could not be parsed or validated."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
