"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Incompatible or invalid strategy / experiment configuration."""


class TranscriptError(ValueError):
    """A transcript violates its contract (off-grid forecast, bad row, ...)."""


class StrategyError(ValueError):
    """A strategy table is missing a reachable state or is malformed."""


class HorizonError(ValueError):
    """A playback source was exhausted before the horizon was reached."""


class ResourceLimitError(RuntimeError):
    """A computation would exceed the configured state/memory budget."""
