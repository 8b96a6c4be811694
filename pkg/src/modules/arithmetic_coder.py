"""
Sparse2Dense - Arithmetic Coder Module
Integer binary arithmetic coder with adaptive and bypass bins.

The coder keeps a 32-bit [low, high] interval, resolves carries with
pending (follow) bits and writes MSB-first. Probabilities are 16-bit fixed
point estimates of P(bit == 0). Each payload is terminated with the
shortest suffix that identifies a value inside the final interval; bits
read past the coded length are zero.
"""

from typing import List, Optional, Tuple

MAX_CODE = 0xFFFFFFFF
HALF = 0x80000000
QUARTER = 0x40000000
THREE_QUARTER = 0xC0000000

PROB_BITS = 16
PROB_ONE = 1 << PROB_BITS
PROB_MIN = PROB_ONE // 64
PROB_MAX = PROB_ONE - PROB_MIN
BYPASS_P0 = PROB_ONE // 2
RESCALE_LIMIT = 1024


class BitWriter:
    """MSB-first bit sink that counts every bit written."""

    def __init__(self) -> None:
        self._buf = bytearray()
        self._acc = 0
        self._nbits = 0
        self.bit_count = 0

    def write_bit(self, bit: int) -> None:
        self._acc = (self._acc << 1) | (bit & 1)
        self._nbits += 1
        self.bit_count += 1
        if self._nbits == 8:
            self._buf.append(self._acc)
            self._acc = 0
            self._nbits = 0

    def finish(self) -> bytes:
        """Pad the last byte with zero bits."""
        if self._nbits:
            self._buf.append((self._acc << (8 - self._nbits)) & 0xFF)
            self._acc = 0
            self._nbits = 0
        return bytes(self._buf)


class BitReader:
    """MSB-first bit source returning 0 past `bit_count` or past the data."""

    def __init__(self, data: bytes, bit_count: Optional[int] = None) -> None:
        self._data = data
        self._limit = len(data) * 8 if bit_count is None else min(bit_count, len(data) * 8)
        self.position = 0

    def read_bit(self) -> int:
        pos = self.position
        self.position += 1
        if pos >= self._limit:
            return 0
        return (self._data[pos >> 3] >> (7 - (pos & 7))) & 1


class AdaptiveBitModel:
    """Count-pair estimator; counts are halved once their total exceeds 1024."""

    __slots__ = ('count0', 'count1')

    def __init__(self, count0: int = 1, count1: int = 1) -> None:
        self.count0 = count0
        self.count1 = count1

    @property
    def p0(self) -> int:
        p = (self.count0 << PROB_BITS) // (self.count0 + self.count1)
        return min(max(p, PROB_MIN), PROB_MAX)

    def update(self, bit: int) -> None:
        if bit:
            self.count1 += 1
        else:
            self.count0 += 1
        if self.count0 + self.count1 > RESCALE_LIMIT:
            self.count0 = (self.count0 + 1) >> 1
            self.count1 = (self.count1 + 1) >> 1

    def snapshot(self) -> Tuple[int, int]:
        return self.count0, self.count1


def _split(low: int, high: int, p0: int) -> int:
    return low + (((high - low + 1) * p0) >> PROB_BITS) - 1


class BinaryArithmeticEncoder:

    def __init__(self) -> None:
        self.low = 0
        self.high = MAX_CODE
        self.pending = 0
        self.writer = BitWriter()

    def _output_with_pending(self, bit: int) -> None:
        self.writer.write_bit(bit)
        inv = 1 - bit
        while self.pending > 0:
            self.writer.write_bit(inv)
            self.pending -= 1

    def encode(self, bit: int, p0: int) -> None:
        split = _split(self.low, self.high, p0)
        if bit == 0:
            self.high = split
        else:
            self.low = split + 1

        while True:
            if self.high < HALF:
                self._output_with_pending(0)
            elif self.low >= HALF:
                self._output_with_pending(1)
                self.low -= HALF
                self.high -= HALF
            elif self.low >= QUARTER and self.high < THREE_QUARTER:
                self.pending += 1
                self.low -= QUARTER
                self.high -= QUARTER
            else:
                break
            self.low = (self.low << 1) & MAX_CODE
            self.high = ((self.high << 1) & MAX_CODE) | 1

    def encode_bit(self, bit: int, model: AdaptiveBitModel) -> None:
        self.encode(bit, model.p0)
        model.update(bit)

    def encode_bypass(self, bit: int) -> None:
        self.encode(bit, BYPASS_P0)

    def finish(self) -> Tuple[bytes, int]:
        """Flush the shortest codeword inside [low, high]; returns (payload, bit_count)."""
        if self.low != 0 or self.pending != 0:
            for n in range(1, 33):
                shift = 32 - n
                value = ((self.low + (1 << shift) - 1) >> shift) << shift
                if value <= self.high:
                    break
            self._output_with_pending((value >> 31) & 1)
            for i in range(1, n):
                self.writer.write_bit((value >> (31 - i)) & 1)
        bit_count = self.writer.bit_count
        return self.writer.finish(), bit_count


class BinaryArithmeticDecoder:

    def __init__(self, data: bytes, bit_count: Optional[int] = None) -> None:
        self.low = 0
        self.high = MAX_CODE
        self.reader = BitReader(data, bit_count)
        self.value = 0
        for _ in range(32):
            self.value = (self.value << 1) | self.reader.read_bit()

    def decode(self, p0: int) -> int:
        split = _split(self.low, self.high, p0)
        if self.value <= split:
            bit = 0
            self.high = split
        else:
            bit = 1
            self.low = split + 1

        while True:
            if self.high < HALF:
                pass
            elif self.low >= HALF:
                self.low -= HALF
                self.high -= HALF
                self.value -= HALF
            elif self.low >= QUARTER and self.high < THREE_QUARTER:
                self.low -= QUARTER
                self.high -= QUARTER
                self.value -= QUARTER
            else:
                break
            self.low = (self.low << 1) & MAX_CODE
            self.high = ((self.high << 1) & MAX_CODE) | 1
            self.value = ((self.value << 1) & MAX_CODE) | self.reader.read_bit()
        return bit

    def decode_bit(self, model: AdaptiveBitModel) -> int:
        bit = self.decode(model.p0)
        model.update(bit)
        return bit

    def decode_bypass(self) -> int:
        return self.decode(BYPASS_P0)


def encode_bypass_bits(bits: List[int]) -> Tuple[bytes, int]:
    """Code a bit list entirely in bypass mode."""
    encoder = BinaryArithmeticEncoder()
    for bit in bits:
        encoder.encode_bypass(bit)
    return encoder.finish()
