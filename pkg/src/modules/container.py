"""
Sparse2Dense - Container Module
The "S2DC" sequence container.

Layout, all integers little-endian:
  header   magic "S2DC", version u8, width u16, height u16, K u8, q_log2 u8,
           depth u8, fps_num u16, fps_den u16, keyframe codec tag u8,
           keyframe payload length u32
  payload  keyframe payload bytes
  records  per inter frame: payload length in bits u32, then ceil(bits / 8)
           payload bytes
Records run to the end of the data; nothing may follow the last record.
"""

import struct
from dataclasses import dataclass, field
from typing import Any, Dict, List

from ..config import Config, KeyframeCodec
from .errors import CodecError, ContainerError
from .keypoint_codec import KeypointBitstream

HEADER_FORMAT = '<4sBHHBBBHHBI'
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
RECORD_FORMAT = '<I'
RECORD_SIZE = struct.calcsize(RECORD_FORMAT)


@dataclass(frozen=True)
class ContainerHeader:
    width: int
    height: int
    num_keypoints: int
    q_log2: int
    depth: int
    fps_num: int
    fps_den: int
    keyframe_codec: KeyframeCodec
    keyframe_payload_len: int
    version: int = Config.CONTAINER_VERSION

    @property
    def fps(self) -> float:
        return self.fps_num / self.fps_den

    def pack(self) -> bytes:
        try:
            return struct.pack(HEADER_FORMAT, Config.CONTAINER_MAGIC, self.version,
                               self.width, self.height, self.num_keypoints, self.q_log2,
                               self.depth, self.fps_num, self.fps_den,
                               self.keyframe_codec.value, self.keyframe_payload_len)
        except struct.error as e:
            raise ContainerError("Header field out of range", reason=str(e)) from e

    @classmethod
    def unpack(cls, data: bytes) -> 'ContainerHeader':
        if len(data) < HEADER_SIZE:
            raise ContainerError("Container shorter than its header",
                                 expected=HEADER_SIZE, actual=len(data))
        (magic, version, width, height, k, q_log2, depth,
         fps_num, fps_den, tag, payload_len) = struct.unpack_from(HEADER_FORMAT, data)
        if magic != Config.CONTAINER_MAGIC:
            raise ContainerError("Bad container magic", expected=Config.CONTAINER_MAGIC, actual=magic)
        if version != Config.CONTAINER_VERSION:
            raise ContainerError("Unsupported container version",
                                 expected=Config.CONTAINER_VERSION, actual=version)
        try:
            codec = KeyframeCodec.from_tag(tag)
        except CodecError as e:
            raise ContainerError("Unknown keyframe codec tag", tag=tag) from e

        header = cls(width, height, k, q_log2, depth, fps_num, fps_den, codec, payload_len, version)
        header.check()
        return header

    def check(self) -> None:
        for name in ('width', 'height', 'num_keypoints', 'depth', 'fps_num', 'fps_den'):
            if getattr(self, name) <= 0:
                raise ContainerError(f"Header field {name} must be positive",
                                     field=name, actual=getattr(self, name))
        if not Config.MIN_Q_LOG2 <= self.q_log2 <= Config.MAX_Q_LOG2:
            raise ContainerError("Header q_log2 out of range", actual=self.q_log2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': self.version,
            'width': self.width,
            'height': self.height,
            'num_keypoints': self.num_keypoints,
            'q_log2': self.q_log2,
            'depth': self.depth,
            'fps': f"{self.fps_num}/{self.fps_den}",
            'keyframe_codec': self.keyframe_codec.name.lower(),
            'keyframe_payload_len': self.keyframe_payload_len,
        }


@dataclass
class Container:
    header: ContainerHeader
    keyframe_payload: bytes
    records: List[KeypointBitstream] = field(default_factory=list)

    @property
    def frames(self) -> int:
        """Key-reference frame plus one per record."""
        return 1 + len(self.records)

    def to_bytes(self) -> bytes:
        if len(self.keyframe_payload) != self.header.keyframe_payload_len:
            raise ContainerError("Keyframe payload length disagrees with header",
                                 expected=self.header.keyframe_payload_len,
                                 actual=len(self.keyframe_payload))
        parts = [self.header.pack(), self.keyframe_payload]
        for record in self.records:
            record.validate()
            parts.append(struct.pack(RECORD_FORMAT, record.bit_count))
            parts.append(record.payload)
        return b''.join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> 'Container':
        header = ContainerHeader.unpack(data)
        offset = HEADER_SIZE
        end = offset + header.keyframe_payload_len
        if end > len(data):
            raise ContainerError("Keyframe payload truncated",
                                 expected=header.keyframe_payload_len, actual=len(data) - offset)
        payload = bytes(data[offset:end])
        offset = end

        records: List[KeypointBitstream] = []
        while offset < len(data):
            index = len(records) + 1
            if offset + RECORD_SIZE > len(data):
                raise ContainerError("Trailing bytes after last record", frame=index,
                                     trailing=len(data) - offset)
            (bit_count,) = struct.unpack_from(RECORD_FORMAT, data, offset)
            offset += RECORD_SIZE
            size = (bit_count + 7) // 8
            if offset + size > len(data):
                raise ContainerError("Keypoint record truncated", frame=index,
                                     expected=size, actual=len(data) - offset)
            record = KeypointBitstream(bytes(data[offset:offset + size]), bit_count)
            record.validate()
            records.append(record)
            offset += size
        return cls(header, payload, records)
