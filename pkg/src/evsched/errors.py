"""Exception types shared across the package."""


class EvschedError(Exception):
    """Base class for all package-specific errors."""


class PriceDataError(EvschedError, ValueError):
    """Malformed price data (bad CSV row, gap, unit, or shape)."""


class EnvError(EvschedError, RuntimeError):
    """Invalid environment usage, e.g. stepping a finished episode."""


class LpInfeasibleError(EvschedError, RuntimeError):
    """The linear program has no feasible point.

    ``constraint`` names a binding constraint when one can be identified.
    """

    def __init__(self, message: str, constraint: str | None = None):
        super().__init__(message)
        self.constraint = constraint


class LpUnboundedError(EvschedError, RuntimeError):
    """The linear program is unbounded below."""


class CheckpointError(EvschedError, ValueError):
    """Unreadable or version-incompatible checkpoint file."""


class ConfigError(EvschedError, ValueError):
    """One or more invalid experiment-config entries.

    ``problems`` lists every offending key, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
