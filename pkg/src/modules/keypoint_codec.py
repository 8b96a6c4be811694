"""
Sparse2Dense - Keypoint Codec Module
Codes per-frame keypoints as quantized residuals against the previously
coded frame.

Each residual is zigzag-mapped (0, -1, 1, -2, ... -> 0, 1, 2, 3, ...) and
written as order-0 Exp-Golomb: a run of zero prefix bins closed by a one,
context-coded per (axis, bin position), followed by bypass suffix bits.
Positions 16 and above share one context. Contexts persist across inter
frames and reset at the key-reference frame; each frame's payload is
terminated on its own.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import Config
from .arithmetic_coder import AdaptiveBitModel, BinaryArithmeticDecoder, BinaryArithmeticEncoder
from .errors import BitstreamError, CodecError, ConfigError, ShapeError, TruncatedPayloadError
from .keypoint_extractor import KeypointSet
from .logger import Logger

AXES = 3
MAX_PREFIX = 21  # zigzag(+-2**20) + 1 needs at most 22 bits


# ==================== TYPES ====================

def _frozen_int_array(values, what: str) -> np.ndarray:
    array = np.array(values, dtype=np.int64, copy=True)
    if array.ndim != 2 or array.shape[1] != AXES:
        raise ShapeError(f"{what} must be an (N, 3) integer array", axis='coordinate',
                         expected='(N, 3)', actual=array.shape)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class QuantizedKeypointSet:
    """Quantization indices (K, 3); value = index * 2**-q_log2."""
    indices: np.ndarray
    q_log2: int

    def __post_init__(self):
        object.__setattr__(self, 'indices', _frozen_int_array(self.indices, "Quantized keypoints"))

    @property
    def num_keypoints(self) -> int:
        return self.indices.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuantizedKeypointSet):
            return NotImplemented
        return self.q_log2 == other.q_log2 and np.array_equal(self.indices, other.indices)

    def __hash__(self) -> int:
        return hash((self.q_log2, self.indices.tobytes()))


@dataclass(frozen=True, eq=False)
class ResidualSet:
    """Integer residuals (N, 3), coded row by row in x, y, z order."""
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen_int_array(self.values, "Residuals"))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResidualSet):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())


@dataclass(frozen=True)
class KeypointBitstream:
    """One frame's arithmetic-coded payload and its exact coded length."""
    payload: bytes
    bit_count: int

    @property
    def expected_length(self) -> int:
        return (self.bit_count + 7) // 8

    def validate(self) -> None:
        if self.bit_count < 0:
            raise BitstreamError("Negative bit count", bit_count=self.bit_count)
        if len(self.payload) < self.expected_length:
            raise TruncatedPayloadError("Payload shorter than its bit count",
                                        bit_count=self.bit_count,
                                        expected=self.expected_length,
                                        actual=len(self.payload))
        if len(self.payload) > self.expected_length:
            raise BitstreamError("Payload longer than its bit count",
                                 expected=self.expected_length, actual=len(self.payload))
        spare = 8 * len(self.payload) - self.bit_count
        if spare and self.payload[-1] & ((1 << spare) - 1):
            raise BitstreamError("Nonzero padding bits", bit_count=self.bit_count)


class CoderState:
    """Per-axis prefix contexts shared by encoder and decoder of one stream."""

    def __init__(self, contexts: int = Config.PREFIX_CONTEXTS):
        self.contexts = contexts
        self.poisoned = False
        self.models: List[List[AdaptiveBitModel]] = []
        self.reset()

    def reset(self) -> None:
        self.models = [[AdaptiveBitModel() for _ in range(self.contexts)] for _ in range(AXES)]
        self.poisoned = False

    def model(self, axis: int, position: int) -> AdaptiveBitModel:
        return self.models[axis][min(position, self.contexts - 1)]

    def snapshot(self) -> Tuple[Tuple[Tuple[int, int], ...], ...]:
        return tuple(tuple(m.snapshot() for m in axis) for axis in self.models)

    def ensure_usable(self) -> None:
        if self.poisoned:
            raise BitstreamError("Coder state is poisoned by an earlier decode error")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoderState):
            return NotImplemented
        return self.poisoned == other.poisoned and self.snapshot() == other.snapshot()

    __hash__ = None


@dataclass
class BitReport:
    """Exact keypoint-stream bit counts; frame 0 is the key-reference frame."""
    q_log2: int
    frame_bits: List[int] = field(default_factory=list)

    @property
    def total_bits(self) -> int:
        return sum(self.frame_bits)

    @property
    def frames(self) -> int:
        return len(self.frame_bits)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'q_log2': self.q_log2,
            'frames': self.frames,
            'total_bits': self.total_bits,
            'frame_bits': list(self.frame_bits),
        }


# ==================== QUANTIZATION ====================

def _check_q(q_log2: int) -> None:
    if not Config.MIN_Q_LOG2 <= q_log2 <= Config.MAX_Q_LOG2:
        raise ConfigError(f"q_log2 must be in [{Config.MIN_Q_LOG2}, {Config.MAX_Q_LOG2}]",
                          q_log2=q_log2)


def quantize(kps: KeypointSet, q_log2: int) -> QuantizedKeypointSet:
    """index = coord / 2**-q_log2 rounded half away from zero."""
    _check_q(q_log2)
    scaled = kps.points.astype(np.float64) * float(1 << q_log2)
    indices = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return QuantizedKeypointSet(indices.astype(np.int64), q_log2)


def dequantize(q: QuantizedKeypointSet) -> KeypointSet:
    return KeypointSet(q.indices.astype(np.float64) / float(1 << q.q_log2))


def predict_residual(current: QuantizedKeypointSet,
                     previous_coded: QuantizedKeypointSet) -> ResidualSet:
    if current.num_keypoints != previous_coded.num_keypoints:
        raise ShapeError("Keypoint counts differ", axis='keypoints',
                         expected=previous_coded.num_keypoints, actual=current.num_keypoints)
    if current.q_log2 != previous_coded.q_log2:
        raise ConfigError("Quantization steps differ", expected=previous_coded.q_log2,
                          actual=current.q_log2)
    return ResidualSet(current.indices - previous_coded.indices)


def reconstruct(residuals: ResidualSet, previous_coded: QuantizedKeypointSet) -> QuantizedKeypointSet:
    if residuals.values.shape != previous_coded.indices.shape:
        raise ShapeError("Residuals do not match the predictor", axis='keypoints',
                         expected=previous_coded.indices.shape, actual=residuals.values.shape)
    return QuantizedKeypointSet(previous_coded.indices + residuals.values, previous_coded.q_log2)


# ==================== BINARIZATION ====================

def zigzag(value: int) -> int:
    return 2 * value if value >= 0 else -2 * value - 1


def unzigzag(code: int) -> int:
    return code >> 1 if code % 2 == 0 else -((code + 1) >> 1)


def _encode_symbol(encoder: BinaryArithmeticEncoder, state: CoderState, axis: int, value: int) -> None:
    v = zigzag(value) + 1
    n = v.bit_length() - 1
    for position in range(n):
        encoder.encode_bit(0, state.model(axis, position))
    encoder.encode_bit(1, state.model(axis, n))
    for i in reversed(range(n)):
        encoder.encode_bypass((v >> i) & 1)


def _decode_symbol(decoder: BinaryArithmeticDecoder, state: CoderState, axis: int) -> int:
    n = 0
    while not decoder.decode_bit(state.model(axis, n)):
        n += 1
        if n > MAX_PREFIX:
            raise BitstreamError("Exp-Golomb prefix too long", axis=axis, prefix=n)
    v = 1
    for _ in range(n):
        v = (v << 1) | decoder.decode_bypass()
    value = unzigzag(v - 1)
    if abs(value) > Config.MAX_RESIDUAL:
        raise BitstreamError("Residual magnitude out of range", axis=axis, value=value)
    return value


# ==================== FRAME CODING ====================

def encode_frame(residuals: ResidualSet, state: CoderState) -> KeypointBitstream:
    state.ensure_usable()
    values = residuals.values
    if values.size and int(np.abs(values).max()) > Config.MAX_RESIDUAL:
        raise BitstreamError("Residual magnitude exceeds 2**20",
                             max_abs=int(np.abs(values).max()))
    encoder = BinaryArithmeticEncoder()
    for row in values.tolist():
        for axis, value in enumerate(row):
            _encode_symbol(encoder, state, axis, value)
    payload, bit_count = encoder.finish()
    return KeypointBitstream(payload, bit_count)


def decode_frame(bits: KeypointBitstream, state: CoderState,
                 num_keypoints: int = Config.DEFAULT_NUM_KEYPOINTS) -> ResidualSet:
    """Recover one frame of residuals; any failure poisons the state."""
    state.ensure_usable()
    try:
        bits.validate()
        decoder = BinaryArithmeticDecoder(bits.payload, bits.bit_count)
        rows = [[_decode_symbol(decoder, state, axis) for axis in range(AXES)]
                for _ in range(num_keypoints)]
    except CodecError:
        state.poisoned = True
        raise
    return ResidualSet(np.array(rows, dtype=np.int64).reshape(num_keypoints, AXES))


def measure_bits(frames: Sequence[KeypointSet], q_log2: int) -> BitReport:
    """Bits per frame for the keypoint stream alone; the key frame costs nothing."""
    report = BitReport(q_log2)
    if not frames:
        return report
    encoder = KeypointStreamEncoder(q_log2)
    encoder.start(frames[0])
    report.frame_bits.append(0)
    for kps in frames[1:]:
        bitstream, _ = encoder.push(kps)
        report.frame_bits.append(bitstream.bit_count)
    return report


# ==================== STREAMS ====================

class KeypointStreamEncoder:
    """Predictor plus contexts for one sequence, encoder side."""

    def __init__(self, q_log2: int):
        _check_q(q_log2)
        self.logger = Logger.get_instance()
        self.q_log2 = q_log2
        self.state = CoderState()
        self.previous: Optional[QuantizedKeypointSet] = None

    def start(self, key_keypoints: KeypointSet) -> QuantizedKeypointSet:
        self.state.reset()
        self.previous = quantize(key_keypoints, self.q_log2)
        return self.previous

    def push(self, kps: KeypointSet) -> Tuple[KeypointBitstream, QuantizedKeypointSet]:
        if self.previous is None:
            raise ConfigError("Stream encoder used before start()")
        current = quantize(kps, self.q_log2)
        bitstream = encode_frame(predict_residual(current, self.previous), self.state)
        self.previous = current
        self.logger.trace("Coded keypoint frame", bits=bitstream.bit_count)
        return bitstream, current


class KeypointStreamDecoder:
    """Predictor plus contexts for one sequence, decoder side."""

    def __init__(self, q_log2: int, num_keypoints: int = Config.DEFAULT_NUM_KEYPOINTS):
        _check_q(q_log2)
        self.q_log2 = q_log2
        self.num_keypoints = num_keypoints
        self.state = CoderState()
        self.previous: Optional[QuantizedKeypointSet] = None

    def start(self, key_keypoints: KeypointSet) -> QuantizedKeypointSet:
        self.state.reset()
        self.previous = quantize(key_keypoints, self.q_log2)
        return self.previous

    def pull(self, bitstream: KeypointBitstream) -> QuantizedKeypointSet:
        if self.previous is None:
            raise ConfigError("Stream decoder used before start()")
        residuals = decode_frame(bitstream, self.state, self.num_keypoints)
        current = reconstruct(residuals, self.previous)
        limit = 1 << self.q_log2
        if int(np.abs(current.indices).max()) > limit:
            self.state.poisoned = True
            raise BitstreamError("Decoded keypoint outside the coordinate range",
                                 limit=limit, actual=int(np.abs(current.indices).max()))
        self.previous = current
        return current
