"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`LocalGCLError`.
The three intermediate classes map onto the CLI exit codes (config, data,
numerical divergence).
"""

from __future__ import annotations


class LocalGCLError(Exception):
    """Base class for all package errors."""


class ConfigError(LocalGCLError, ValueError):
    """Invalid or unknown configuration value."""


class DataError(LocalGCLError):
    """Problem with an input dataset or on-disk artifact."""


class NumericalError(LocalGCLError, ArithmeticError):
    """Numerical failure during optimization."""


class MissingFileError(DataError, FileNotFoundError):
    pass


class MalformedDatasetError(DataError, ValueError):
    def __init__(self, message: str, *, file: str | None = None, line: int | None = None):
        self.file = file
        self.line = line
        where = ""
        if file is not None:
            where = f"{file}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class EmptyBatchError(DataError, ValueError):
    pass


class DimensionMismatchError(DataError, ValueError):
    pass


class InvalidFoldCountError(DataError, ValueError):
    pass


class ShapeError(LocalGCLError, ValueError):
    pass


class NotScalarError(ShapeError):
    pass


class NeedsNegativesError(LocalGCLError, ValueError):
    pass


class InvalidLambdaError(ConfigError):
    pass


class DivergedError(NumericalError):
    def __init__(self, epoch: int, message: str = "loss is not finite"):
        self.epoch = epoch
        super().__init__(f"diverged at epoch {epoch}: {message}")


class UnsupportedVersionError(DataError):
    pass


class CorruptCheckpointError(DataError):
    pass
