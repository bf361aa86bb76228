"""Exception hierarchy.

The CLI maps these onto distinct exit codes: ConfigError -> 2,
DataError -> 3, anything else under DiscoverError -> 4.
"""


class DiscoverError(Exception):
    """Base class for all package errors."""


class ConfigError(DiscoverError):
    """Invalid or unknown configuration."""


class DataError(DiscoverError):
    """Unusable input data (missing file, ragged rows, empty table, ...)."""


class SchemaError(DiscoverError):
    """Column/table structure does not match what an operation requires."""


class PipelineError(DiscoverError):
    """A pipeline stage failed (no trainable candidates, search collapse)."""


class DegenerateTargetError(DiscoverError):
    """Target unusable for the requested task (single class, zero variance)."""

    def __init__(self, message: str, *, kind: str):
        super().__init__(message)
        self.kind = kind
