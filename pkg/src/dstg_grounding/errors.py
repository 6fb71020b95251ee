"""Exception hierarchy and command-line exit codes."""

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2


class GroundingError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = EXIT_VALIDATION


class ConfigError(GroundingError, ValueError):
    """A configuration value is out of range or inconsistent."""


class DatasetError(GroundingError, ValueError):
    """A dataset, prediction file or checkpoint is malformed."""


class GraphError(GroundingError, ValueError):
    """A sample cannot be turned into a graph (empty, over budget)."""


class DivergenceError(GroundingError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, breakdown=None):
        super().__init__(f"Non-finite loss at step {step}")
        self.step = step
        self.breakdown = breakdown


class UsageError(GroundingError):
    """Command-line misuse: unknown flags, missing arguments."""

    exit_code = EXIT_USAGE
