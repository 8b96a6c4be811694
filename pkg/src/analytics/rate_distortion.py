"""
Sparse2Dense - Rate-Distortion Module
Exact bit accounting for coded sequences, kbps, a PSNR sanity metric and
Bjontegaard delta rate between two RD curves.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..modules.container import HEADER_SIZE, RECORD_SIZE, Container
from ..modules.errors import ConfigError, ShapeError
from ..modules.tensor_core import Tensor

RDPoint = Tuple[float, float]


@dataclass
class RDReport:
    """
    Bit accounting for one container.

    keypoint_bits holds one entry per frame; entry 0 is the key-reference
    frame and is always 0. header_bits covers the fixed header, the record
    length fields and the padding that closes each record.
    """
    keypoint_bits: List[int] = field(default_factory=list)
    keyframe_bits: int = 0
    header_bits: int = 0
    fps_num: int = 25
    fps_den: int = 1
    psnr: List[Optional[float]] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)

    @property
    def frames(self) -> int:
        return len(self.keypoint_bits)

    @property
    def total_keypoint_bits(self) -> int:
        return sum(self.keypoint_bits)

    @property
    def total_bits(self) -> int:
        return self.header_bits + self.keyframe_bits + self.total_keypoint_bits

    @property
    def kbps(self) -> float:
        return bitrate_kbps(self)

    @property
    def keypoint_kbps(self) -> float:
        return bitrate_kbps(self, keypoints_only=True)

    @property
    def stats(self) -> Dict[str, Any]:
        inter = self.keypoint_bits[1:]
        return {
            'frames': self.frames,
            'total_bits': self.total_bits,
            'mean_inter_bits': (sum(inter) / len(inter)) if inter else 0.0,
            'max_inter_bits': max(inter) if inter else 0,
        }

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'frames': self.frames,
            'fps': f"{self.fps_num}/{self.fps_den}",
            'total_bits': self.total_bits,
            'header_bits': self.header_bits,
            'keyframe_bits': self.keyframe_bits,
            'keypoint_bits': self.total_keypoint_bits,
            'frame_bits': list(self.keypoint_bits),
            'kbps': self.kbps if self.frames else None,
            'keypoint_kbps': self.keypoint_kbps if self.frames else None,
            'stats': self.stats,
        }
        if self.psnr:
            data['psnr'] = list(self.psnr)
        if self.errors:
            data['errors'] = list(self.errors)
        return data


def bitrate_kbps(report: RDReport, keypoints_only: bool = False) -> float:
    """bits * fps_num / (fps_den * frames * 1000)."""
    if report.frames == 0:
        raise ConfigError("Bitrate needs at least one frame")
    bits = report.total_keypoint_bits if keypoints_only else report.total_bits
    return bits * report.fps_num / (report.fps_den * report.frames * 1000.0)


def analyze_container(data: bytes) -> RDReport:
    """Per-frame bits straight from container bytes; no weights needed."""
    container = Container.from_bytes(data)
    header = container.header
    record_bits = [record.bit_count for record in container.records]
    padding = sum(8 * record.expected_length - record.bit_count for record in container.records)
    report = RDReport(
        keypoint_bits=[0] + record_bits,
        keyframe_bits=8 * header.keyframe_payload_len,
        header_bits=8 * HEADER_SIZE + 8 * RECORD_SIZE * len(record_bits) + padding,
        fps_num=header.fps_num,
        fps_den=header.fps_den,
    )
    return report


# ==================== DISTORTION ====================

def psnr_sanity(a: Tensor, b: Tensor) -> float:
    """10 log10(1 / MSE) for [0, 1] pixels; +inf when the frames are identical."""
    if a.shape != b.shape:
        raise ShapeError("Frames must share a shape", axis='frame', expected=a.shape, actual=b.shape)
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


# ==================== BD-RATE ====================

def _curve(points: Sequence[RDPoint], what: str) -> Tuple[np.ndarray, np.ndarray]:
    if len(points) < 4:
        raise ConfigError(f"{what} curve needs at least 4 points", points=len(points))
    rates = np.array([p[0] for p in points], dtype=np.float64)
    quality = np.array([p[1] for p in points], dtype=np.float64)
    if np.any(rates <= 0):
        raise ConfigError(f"{what} curve rates must be positive")
    if len(np.unique(quality)) != len(quality):
        raise ConfigError(f"{what} curve repeats a quality value")
    return np.log10(rates), quality


def bd_rate(anchor: Sequence[RDPoint], test: Sequence[RDPoint]) -> float:
    """
    Average rate difference in percent at equal quality.

    Each curve is a cubic fit of log10(rate) against quality, integrated
    over the shared quality interval. Negative values mean `test` saves bits.
    """
    log_a, q_a = _curve(anchor, 'Anchor')
    log_t, q_t = _curve(test, 'Test')
    low = max(q_a.min(), q_t.min())
    high = min(q_a.max(), q_t.max())
    if high <= low:
        raise ConfigError("RD curves do not overlap in quality", low=low, high=high)

    fit_a = np.polyint(np.polyfit(q_a, log_a, 3))
    fit_t = np.polyint(np.polyfit(q_t, log_t, 3))
    area_a = np.polyval(fit_a, high) - np.polyval(fit_a, low)
    area_t = np.polyval(fit_t, high) - np.polyval(fit_t, low)
    mean_diff = (area_t - area_a) / (high - low)
    return float((10.0 ** mean_diff - 1.0) * 100.0)


def sequence_psnr(decoded: Sequence[Tensor], reference: Sequence[Tensor]) -> List[float]:
    """PSNR per frame over the common prefix of two sequences."""
    return [psnr_sanity(a, b) for a, b in zip(decoded, reference)]
