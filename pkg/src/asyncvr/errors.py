"""Exception types raised across the package."""


class AsyncVRError(ValueError):
    """Base class for all package errors."""


class InvalidPartitionError(AsyncVRError):
    pass


class InvalidStepError(AsyncVRError):
    pass


class DimensionError(AsyncVRError):
    pass


class BlockIndexError(AsyncVRError, IndexError):
    pass


class BudgetExceededError(AsyncVRError):
    """A batch-size schedule saturated before the run budget was exhausted."""


class DivergenceError(AsyncVRError):
    """An iterate became non-finite."""


class ConfigError(AsyncVRError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ParseError(AsyncVRError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class TrajectoryError(AsyncVRError):
    """A solver error raised inside one trajectory of an experiment."""

    def __init__(self, index, arm, cause):
        self.index = index
        self.arm = arm
        self.cause = cause
        where = f"trajectory {index}" if arm is None else f"arm {arm!r}, trajectory {index}"
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
