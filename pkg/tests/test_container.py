"""
Sparse2Dense - Container Tests
Unit tests for the S2DC container layout.
"""

import dataclasses
import pytest
from pathlib import Path
import sys

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from src.config import KeyframeCodec
from src.modules.container import HEADER_SIZE, Container, ContainerHeader
from src.modules.errors import BitstreamError, ContainerError, MalformedInputError
from src.modules.keypoint_codec import KeypointBitstream

GOLDEN_HEADER = bytes.fromhex(
    "53324443" "01" "4000" "4000" "0f" "06" "04" "1900" "0100" "00" "03000000"
)


@pytest.fixture
def header():
    return ContainerHeader(width=64, height=64, num_keypoints=15, q_log2=6, depth=4,
                           fps_num=25, fps_den=1, keyframe_codec=KeyframeCodec.PNG,
                           keyframe_payload_len=3)


@pytest.fixture
def container(header):
    records = [KeypointBitstream(b'\xb2\x80', 9), KeypointBitstream(b'', 0),
               KeypointBitstream(b'\xff', 8)]
    return Container(header, b'abc', records)


class TestHeader:
    """Tests for the fixed header."""

    def test_header_size(self):
        assert HEADER_SIZE == 21

    def test_golden_bytes(self, header):
        """64x64, K 15, q 6, D 4, 25/1 fps, PNG, 3 payload bytes."""
        assert header.pack() == GOLDEN_HEADER

    def test_unpack_golden(self, header):
        assert ContainerHeader.unpack(GOLDEN_HEADER) == header

    def test_bad_magic(self):
        with pytest.raises(ContainerError):
            ContainerHeader.unpack(b"XXXX" + GOLDEN_HEADER[4:])

    def test_bad_version(self):
        with pytest.raises(ContainerError):
            ContainerHeader.unpack(GOLDEN_HEADER[:4] + b'\x02' + GOLDEN_HEADER[5:])

    def test_unknown_codec_tag(self):
        data = bytearray(GOLDEN_HEADER)
        data[16] = 7
        with pytest.raises(ContainerError):
            ContainerHeader.unpack(bytes(data))

    def test_zero_width(self):
        data = bytearray(GOLDEN_HEADER)
        data[5:7] = b'\x00\x00'
        with pytest.raises(ContainerError):
            ContainerHeader.unpack(bytes(data))

    def test_q_out_of_range(self):
        data = bytearray(GOLDEN_HEADER)
        data[10] = 13
        with pytest.raises(ContainerError):
            ContainerHeader.unpack(bytes(data))

    def test_short_header(self):
        with pytest.raises(ContainerError):
            ContainerHeader.unpack(GOLDEN_HEADER[:20])

    def test_field_overflow(self, header):
        """Widths beyond u16 cannot be packed."""
        with pytest.raises(ContainerError):
            dataclasses.replace(header, width=70000).pack()

    def test_to_dict(self, header):
        data = header.to_dict()
        assert data['fps'] == '25/1'
        assert data['keyframe_codec'] == 'png'


class TestContainer:
    """Tests for whole-container serialization."""

    def test_round_trip(self, container):
        """Bytes parse back to the same header, payload and records."""
        data = container.to_bytes()
        parsed = Container.from_bytes(data)
        assert parsed.header == container.header
        assert parsed.keyframe_payload == b'abc'
        assert parsed.records == container.records
        assert parsed.frames == 4

    def test_layout(self, container):
        """Header, payload, then a u32 bit length + bytes per record."""
        data = container.to_bytes()
        assert data[:21] == GOLDEN_HEADER
        assert data[21:24] == b'abc'
        assert data[24:28] == (9).to_bytes(4, 'little')
        assert data[28:30] == b'\xb2\x80'
        assert data[30:34] == bytes(4)
        assert len(data) == 21 + 3 + (4 + 2) + 4 + (4 + 1)

    def test_record_length_counts_bits(self, header):
        """The record prefix is the coded length in bits; the byte count follows from it."""
        record = KeypointBitstream(b'\xa5\x5a\xc0', 18)
        data = Container(header, b'abc', [record]).to_bytes()
        assert data[24:28] == (18).to_bytes(4, 'little')
        assert data[28:] == b'\xa5\x5a\xc0'
        assert Container.from_bytes(data).records[0].bit_count == 18

    def test_single_frame(self, header):
        """A key frame alone has no records."""
        parsed = Container.from_bytes(Container(header, b'abc').to_bytes())
        assert parsed.records == []
        assert parsed.frames == 1

    def test_payload_length_must_match(self, header):
        with pytest.raises(ContainerError):
            Container(header, b'abcd').to_bytes()

    def test_truncated_keyframe_payload(self, container):
        data = container.to_bytes()
        with pytest.raises(ContainerError):
            Container.from_bytes(data[:23])

    def test_partial_record_header(self, container):
        """One to three stray bytes after a record are rejected."""
        data = container.to_bytes()
        for extra in (b'\x00', b'\x00\x00', b'\x00\x00\x00'):
            with pytest.raises(ContainerError):
                Container.from_bytes(data + extra)

    def test_truncated_record(self, container):
        data = container.to_bytes()
        with pytest.raises(ContainerError):
            Container.from_bytes(data[:-1])

    def test_nonzero_record_padding(self, header):
        """Padding bits after a record's coded length must be zero."""
        data = Container(header, b'abc').to_bytes() + (9).to_bytes(4, 'little') + b'\xb2\x81'
        with pytest.raises(BitstreamError):
            Container.from_bytes(data)

    def test_every_prefix_is_handled(self, container):
        """Each prefix parses to fewer frames or raises a structured error."""
        data = container.to_bytes()
        for cut in range(len(data)):
            try:
                parsed = Container.from_bytes(data[:cut])
            except MalformedInputError:
                continue
            assert parsed.frames < container.frames


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
