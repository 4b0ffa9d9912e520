"""Exception types that the CLI maps onto distinct exit codes."""


class FormatError(ValueError):
    """A binary container (IDX, checkpoint, trace, raw dataset) is malformed."""


class ConfigError(ValueError):
    """A run-config file failed to parse or validate."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""
