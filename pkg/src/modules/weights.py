"""
Sparse2Dense - Weights Module
Reads and writes the "S2DW" weight bundle shared by every network.

Layout: magic "S2DW", version u8, then records until end of file. Each
record is name length (u16 LE), UTF-8 name, rank (u8), dims (u32 LE each)
and a little-endian float32 payload. Records are written sorted by name.
"""

import struct
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Union

import numpy as np

from ..config import Config
from .errors import TopologyError, WeightFileError
from .logger import Logger
from .tensor_core import Tensor, as_tensor
from .validator import TensorSpec, ValidationResult, WeightValidator


class WeightBundle:
    """Immutable mapping of tensor names to read-only float32 arrays."""

    def __init__(self, tensors: Optional[Dict[str, np.ndarray]] = None):
        self._tensors: Dict[str, Tensor] = {
            name: as_tensor(values) for name, values in (tensors or {}).items()
        }

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._tensors))

    def names(self) -> List[str]:
        return sorted(self._tensors)

    def get(self, name: str, shape: Optional[tuple] = None) -> Tensor:
        """Fetch a tensor, optionally checking its exact shape."""
        tensor = self._tensors.get(name)
        if tensor is None:
            raise TopologyError("Weight tensor missing", tensor=name)
        if shape is not None and tuple(tensor.shape) != tuple(shape):
            raise TopologyError("Weight tensor has the wrong shape", tensor=name,
                                expected=tuple(shape), actual=tuple(tensor.shape))
        return tensor

    def require(self, specs: Iterable[TensorSpec], scope: str = '') -> ValidationResult:
        """Validate against specs; raise TopologyError naming the first bad tensor."""
        result = WeightValidator().validate(self._tensors, specs, scope)
        if not result.is_valid:
            first = result.errors[0]
            raise TopologyError(first.message, tensor=first.tensor,
                                errors=result.stats['errors'])
        return result

    @property
    def parameter_count(self) -> int:
        return sum(int(t.size) for t in self._tensors.values())

    # ==================== SERIALIZATION ====================

    def to_bytes(self) -> bytes:
        out = bytearray(Config.WEIGHTS_MAGIC)
        out += struct.pack('<B', Config.WEIGHTS_VERSION)
        for name in self.names():
            tensor = self._tensors[name]
            encoded = name.encode('utf-8')
            if len(encoded) > 0xFFFF or tensor.ndim > 0xFF:
                raise WeightFileError("Tensor name or rank too large to store", tensor=name)
            out += struct.pack('<H', len(encoded)) + encoded
            out += struct.pack('<B', tensor.ndim)
            out += struct.pack(f'<{tensor.ndim}I', *tensor.shape)
            out += tensor.astype('<f4').tobytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> 'WeightBundle':
        reader = _Reader(data)
        if reader.take(4, 'magic') != Config.WEIGHTS_MAGIC:
            raise WeightFileError("Not an S2DW weight file")
        version = reader.unpack('<B', 'version')[0]
        if version != Config.WEIGHTS_VERSION:
            raise WeightFileError("Unsupported weight file version", version=version)

        tensors: Dict[str, np.ndarray] = {}
        while not reader.done:
            name_len = reader.unpack('<H', 'name length')[0]
            try:
                name = reader.take(name_len, 'name').decode('utf-8')
            except UnicodeDecodeError as e:
                raise WeightFileError("Tensor name is not UTF-8", offset=reader.offset) from e
            if name in tensors:
                raise WeightFileError("Duplicate tensor name", tensor=name)
            rank = reader.unpack('<B', 'rank')[0]
            if rank == 0:
                raise WeightFileError("Tensor rank must be positive", tensor=name)
            dims = reader.unpack(f'<{rank}I', 'dims')
            if 0 in dims:
                raise WeightFileError("Tensor dims must be positive", tensor=name, dims=dims)
            count = int(np.prod(dims, dtype=np.int64))
            payload = reader.take(4 * count, f"payload of {name}")
            values = np.frombuffer(payload, dtype='<f4').astype(np.float32).reshape(dims)
            if not np.all(np.isfinite(values)):
                raise WeightFileError("Tensor holds non-finite values", tensor=name)
            tensors[name] = values
        return cls(tensors)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        Logger.get_instance().info("Wrote weights", path=str(path), tensors=len(self),
                                   parameters=self.parameter_count)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'WeightBundle':
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise WeightFileError("Cannot read weight file", path=str(path)) from e
        bundle = cls.from_bytes(data)
        Logger.get_instance().debug("Loaded weights", path=str(path), tensors=len(bundle))
        return bundle


class _Reader:
    """Bounds-checked cursor over the raw file bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    @property
    def done(self) -> bool:
        return self.offset >= len(self.data)

    def take(self, count: int, what: str) -> bytes:
        end = self.offset + count
        if end > len(self.data):
            raise WeightFileError(f"Weight file truncated in {what}",
                                  offset=self.offset, needed=count,
                                  available=len(self.data) - self.offset)
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


# ==================== INITIALIZATION ====================

def init_weights(specs: Iterable[TensorSpec], seed: int = 0) -> WeightBundle:
    """He-normal weights and zero biases, drawn in name order from one seed."""
    rng = np.random.default_rng(seed)
    tensors: Dict[str, np.ndarray] = {}
    for spec in sorted(specs, key=lambda s: s.name):
        if spec.name.endswith('.bias') or len(spec.shape) < 2:
            tensors[spec.name] = np.zeros(spec.shape, dtype=np.float32)
            continue
        fan_in = int(np.prod(spec.shape[1:]))
        std = np.sqrt(2.0 / fan_in)
        tensors[spec.name] = rng.standard_normal(spec.shape) * std
    return WeightBundle(tensors)


def zero_weights(specs: Iterable[TensorSpec]) -> WeightBundle:
    return WeightBundle({s.name: np.zeros(s.shape, dtype=np.float32) for s in specs})
