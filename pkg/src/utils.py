"""
Sparse2Dense - Utility Functions Module
Contains common utility functions used across the application.
"""

import os
import json
import math
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence, Tuple, TypeVar, Union
from concurrent.futures import ThreadPoolExecutor

from .modules.errors import ConfigError

T = TypeVar('T')
R = TypeVar('R')


class Utils:
    """Collection of utility functions for Sparse2Dense."""

    # =========================================================================
    # File System Utilities
    # =========================================================================

    @staticmethod
    def ensure_directory(path: Union[str, Path]) -> Path:
        """Create directory if it doesn't exist."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def get_bits_human(bits: int) -> str:
        """Convert a bit count to a human-readable string."""
        if bits < 8 * 1024:
            return f"{bits} bits"
        size = bits / 8.0
        for unit in ['B', 'KB', 'MB', 'GB']:
            if size < 1024.0:
                return f"{size:.2f} {unit}"
            size /= 1024.0
        return f"{size:.2f} TB"

    # =========================================================================
    # JSON Utilities
    # =========================================================================

    @staticmethod
    def json_safe(data: Any) -> Any:
        """Replace non-finite floats with string sentinels ("inf", "-inf", "nan")."""
        if isinstance(data, float) and not math.isfinite(data):
            if math.isnan(data):
                return 'nan'
            return 'inf' if data > 0 else '-inf'
        if isinstance(data, dict):
            return {k: Utils.json_safe(v) for k, v in data.items()}
        if isinstance(data, (list, tuple)):
            return [Utils.json_safe(v) for v in data]
        return data

    @staticmethod
    def to_json(data: Any, indent: int = 2) -> str:
        return json.dumps(Utils.json_safe(data), indent=indent, ensure_ascii=False)

    @staticmethod
    def save_json(filepath: Union[str, Path], data: Any, indent: int = 2) -> Path:
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        filepath.write_text(Utils.to_json(data, indent), encoding='utf-8')
        return filepath

    # =========================================================================
    # Parsing Utilities
    # =========================================================================

    @staticmethod
    def parse_fps(text: str) -> Tuple[int, int]:
        """Parse "A/B" or "A" into a (num, den) pair of 16-bit positive ints."""
        parts = text.strip().split('/')
        try:
            if len(parts) == 1:
                num, den = int(parts[0]), 1
            elif len(parts) == 2:
                num, den = int(parts[0]), int(parts[1])
            else:
                raise ValueError(text)
        except ValueError as e:
            raise ConfigError("fps must look like 25 or 30000/1001", fps=text) from e
        if not (0 < num <= 0xFFFF and 0 < den <= 0xFFFF):
            raise ConfigError("fps terms must be in [1, 65535]", fps=text)
        return num, den

    # =========================================================================
    # Threading Utilities
    # =========================================================================

    @staticmethod
    def parallel_map(func: Callable[[T], R], items: Sequence[T],
                     max_workers: Optional[int] = None) -> List[R]:
        """
        Apply func to items on a thread pool.

        Results come back in input order. If any call fails, the exception
        of the earliest failing item is re-raised.
        """
        items = list(items)
        if not items:
            return []
        max_workers = max_workers or os.cpu_count() or 4
        if max_workers == 1 or len(items) == 1:
            return [func(item) for item in items]

        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            futures = [executor.submit(func, item) for item in items]
            return [future.result() for future in futures]
