"""Exception hierarchy shared across the package."""


class StmError(Exception):
    """Base class for all library errors."""


class ConfigError(StmError):
    """Invalid hyperparameter or structural configuration."""


class DataFormatError(StmError):
    """Malformed dataset, corpus, or sparse file content."""


class ModelFormatError(StmError):
    """Unreadable, truncated, or version-incompatible model file."""


class InvariantError(StmError):
    """A debug-mode structural invariant was violated."""
