"""Seam carving as a feature-pooling layer in a small numpy CNN."""

__version__ = "0.1.0"

from .errors import CheckpointError, ConfigError, DataError, SeamPoolError, ShapeError, StateError
from .model import Model, build_model
from .pooling import MaxPool2d, PoolSpec, SeamPool
from .seam import IndexMap, Seam, carve, energy_map, retarget_image

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataError",
    "IndexMap",
    "MaxPool2d",
    "Model",
    "PoolSpec",
    "Seam",
    "SeamPool",
    "SeamPoolError",
    "ShapeError",
    "StateError",
    "build_model",
    "carve",
    "energy_map",
    "retarget_image",
]
