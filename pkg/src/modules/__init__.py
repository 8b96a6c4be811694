"""
Sparse2Dense - Modules Package
Codec stages, networks and their shared plumbing.
"""

from .logger import Logger, LogLevel
from .errors import (
    CodecError,
    ConfigError,
    TopologyError,
    WeightFileError,
    ShapeError,
    MalformedInputError,
    BitstreamError,
    TruncatedPayloadError,
    ContainerError,
    FrameError,
    TransformError,
)

__all__ = [
    'Logger',
    'LogLevel',
    'CodecError',
    'ConfigError',
    'TopologyError',
    'WeightFileError',
    'ShapeError',
    'MalformedInputError',
    'BitstreamError',
    'TruncatedPayloadError',
    'ContainerError',
    'FrameError',
    'TransformError',
]
