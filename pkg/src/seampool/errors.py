"""Exception types shared across the package.

The CLI maps these onto process exit codes (config 2, data 3, checkpoint 4).
"""


class SeamPoolError(Exception):
    """Base class for all package errors."""


class ShapeError(SeamPoolError, ValueError):
    """An array does not have the shape an operation requires."""


class StateError(SeamPoolError, RuntimeError):
    """A layer was used out of order, e.g. backward before forward."""


class ConfigError(SeamPoolError, ValueError):
    """An invalid hyperparameter, split, or command-line setting."""


class DataError(SeamPoolError, OSError):
    """An input image or dataset directory could not be read."""


class CheckpointError(SeamPoolError, OSError):
    """A checkpoint file is unreadable or incompatible with the model."""
