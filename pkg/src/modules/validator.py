"""
Sparse2Dense - Validator Module
Validates weight bundles against the tensor specs a topology requires.
"""

from typing import Dict, Any, List, Iterable
from dataclasses import dataclass, field
from enum import Enum, auto

import numpy as np

from .logger import Logger


class ValidationLevel(Enum):
    """Validation issue severity levels."""
    INFO = auto()
    WARNING = auto()
    ERROR = auto()


@dataclass(frozen=True)
class TensorSpec:
    """Name and exact shape of one required weight tensor."""
    name: str
    shape: tuple


@dataclass
class ValidationIssue:
    """Represents a single validation issue."""
    level: ValidationLevel
    message: str
    tensor: str = ''
    suggestion: str = ''

    def to_dict(self) -> Dict[str, str]:
        return {
            'level': self.level.name,
            'message': self.message,
            'tensor': self.tensor,
            'suggestion': self.suggestion,
        }


@dataclass
class ValidationResult:
    """Result of validation operation."""
    is_valid: bool = True
    issues: List[ValidationIssue] = field(default_factory=list)
    stats: Dict[str, int] = field(default_factory=lambda: {
        'required': 0,
        'present': 0,
        'parameters': 0,
        'errors': 0,
        'warnings': 0,
    })

    @property
    def errors(self) -> List[ValidationIssue]:
        return [i for i in self.issues if i.level == ValidationLevel.ERROR]

    @property
    def warnings(self) -> List[ValidationIssue]:
        return [i for i in self.issues if i.level == ValidationLevel.WARNING]

    def add_issue(self, level: ValidationLevel, message: str,
                  tensor: str = '', suggestion: str = '') -> None:
        """Add a validation issue."""
        self.issues.append(ValidationIssue(level, message, tensor, suggestion))
        if level == ValidationLevel.ERROR:
            self.stats['errors'] += 1
            self.is_valid = False
        elif level == ValidationLevel.WARNING:
            self.stats['warnings'] += 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            'is_valid': self.is_valid,
            'issues': [i.to_dict() for i in self.issues],
            'stats': dict(self.stats),
        }


class WeightValidator:
    """
    Checks a name -> array mapping for:
    - missing tensors
    - shape mismatches
    - non-finite values
    - tensors no TensorSpec asks for (warning only)
    """

    def __init__(self, strict: bool = False):
        """
        Args:
            strict: Treat unexpected tensors as errors instead of warnings
        """
        self.logger = Logger.get_instance()
        self.strict = strict

    def validate(self, tensors: Dict[str, np.ndarray],
                 specs: Iterable[TensorSpec],
                 scope: str = '') -> ValidationResult:
        result = ValidationResult()
        specs = list(specs)
        result.stats['required'] = len(specs)

        for spec in specs:
            array = tensors.get(spec.name)
            if array is None:
                result.add_issue(ValidationLevel.ERROR, "Missing tensor", spec.name,
                                 f"expected shape {spec.shape}")
                continue
            result.stats['present'] += 1
            if tuple(array.shape) != tuple(spec.shape):
                result.add_issue(ValidationLevel.ERROR,
                                 f"Shape {tuple(array.shape)} does not match {spec.shape}",
                                 spec.name)
                continue
            if not np.all(np.isfinite(array)):
                result.add_issue(ValidationLevel.ERROR, "Non-finite values", spec.name)
                continue
            result.stats['parameters'] += int(array.size)

        if scope:
            wanted = {s.name for s in specs}
            for name in sorted(tensors):
                if name.startswith(scope) and name not in wanted:
                    level = ValidationLevel.ERROR if self.strict else ValidationLevel.WARNING
                    result.add_issue(level, "Tensor not used by this topology", name)

        if not result.is_valid:
            self.logger.debug("Weight validation failed", scope=scope or '*',
                              errors=result.stats['errors'])
        return result
