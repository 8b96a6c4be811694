"""
Sparse2Dense - Errors Module
Structured error hierarchy shared by every codec stage.
Each error carries the CLI exit code it maps to.
"""

from typing import Any, Dict, Optional


class CodecError(Exception):
    """Base class for all codec errors."""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error': type(self).__name__,
            'message': self.message,
            'exit_code': self.exit_code,
            'details': {k: str(v) for k, v in self.details.items()},
        }

    def __str__(self) -> str:
        if not self.details:
            return self.message
        extra = ', '.join(f"{k}={v}" for k, v in self.details.items())
        return f"{self.message} ({extra})"


# ==================== CONFIGURATION ====================

class ConfigError(CodecError):
    """Configuration, topology or weight mismatch."""
    exit_code = 3


class TopologyError(ConfigError):
    """A named weight tensor is missing or has the wrong shape."""

    def __init__(self, message: str, tensor: str = '', **details: Any):
        super().__init__(message, tensor=tensor, **details)
        self.tensor = tensor


class WeightFileError(ConfigError):
    """The weight file itself is malformed."""


class ShapeError(CodecError):
    """Tensor shapes are incompatible for an operation."""
    exit_code = 3

    def __init__(self, message: str, axis: str = '',
                 expected: Optional[Any] = None, actual: Optional[Any] = None,
                 **details: Any):
        super().__init__(message, axis=axis, expected=expected, actual=actual, **details)
        self.axis = axis
        self.expected = expected
        self.actual = actual


# ==================== MALFORMED INPUT ====================

class MalformedInputError(CodecError):
    """Input data (container, bitstream, frames) cannot be decoded."""
    exit_code = 2


class BitstreamError(MalformedInputError):
    """Arithmetic-coded keypoint payload is corrupt."""


class TruncatedPayloadError(BitstreamError):
    """Payload is shorter than its declared bit length."""


class ContainerError(MalformedInputError):
    """Container framing or header is invalid."""


class FrameError(MalformedInputError):
    """An input frame is unreadable or inconsistent with the sequence."""

    def __init__(self, message: str, frame_index: int = -1, **details: Any):
        super().__init__(message, frame_index=frame_index, **details)
        self.frame_index = frame_index


# ==================== EVALUATION ====================

class TransformError(CodecError):
    """A geometric transform is degenerate on [-1, 1]^2."""
