"""
Sparse2Dense - Rate-Distortion Tests
Unit tests for bit accounting, PSNR and BD-rate.
"""

import math
import pytest
from pathlib import Path
import sys

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from src.analytics.charts import ChartGenerator
from src.analytics.rate_distortion import (
    RDReport, analyze_container, bd_rate, bitrate_kbps, psnr_sanity, sequence_psnr,
)
from src.config import KeyframeCodec
from src.modules.container import Container, ContainerHeader
from src.modules.errors import ConfigError, ContainerError, ShapeError
from src.modules.keypoint_codec import KeypointBitstream
from src.modules.tensor_core import full, zeros

ANCHOR = [(100.0, 30.0), (200.0, 33.0), (400.0, 36.0), (800.0, 39.0)]


def sample_container(fps_num=25):
    header = ContainerHeader(32, 32, 15, 6, 4, fps_num, 1, KeyframeCodec.PNG, 10)
    records = [KeypointBitstream(b'\xb2\x80', 9), KeypointBitstream(b'\x40', 3)]
    return Container(header, bytes(10), records).to_bytes()


class TestBitrate:
    """Tests for kbps arithmetic."""

    def test_reference_rate(self):
        """150 frames of 1000 bits at 25 fps is 25 kbps."""
        report = RDReport(keypoint_bits=[1000] * 150, fps_num=25, fps_den=1)
        assert bitrate_kbps(report) == pytest.approx(25.0)
        assert report.keypoint_kbps == pytest.approx(25.0)

    def test_rate_is_linear_in_fps(self):
        """Doubling the frame rate doubles kbps."""
        slow = RDReport(keypoint_bits=[0, 500, 500], header_bits=168, fps_num=25)
        fast = RDReport(keypoint_bits=[0, 500, 500], header_bits=168, fps_num=50)
        assert fast.kbps == pytest.approx(2 * slow.kbps)

    def test_header_only(self):
        """With no keypoint bits the rate is header plus keyframe."""
        report = RDReport(keypoint_bits=[0], keyframe_bits=800, header_bits=168, fps_num=1)
        assert report.kbps == pytest.approx(0.968)
        assert report.keypoint_kbps == 0.0

    def test_fractional_fps(self):
        """30000/1001 fps scales as a ratio."""
        report = RDReport(keypoint_bits=[1000] * 10, fps_num=30000, fps_den=1001)
        assert report.kbps == pytest.approx(1000 * 30000 / 1001 / 1000)

    def test_zero_frames(self):
        with pytest.raises(ConfigError):
            bitrate_kbps(RDReport())


class TestAnalyzeContainer:
    """Tests for container bit accounting."""

    def test_accounts_for_every_bit(self):
        """header + keyframe + keypoint bits == container size in bits."""
        data = sample_container()
        report = analyze_container(data)
        assert report.total_bits == 8 * len(data)
        assert report.keypoint_bits == [0, 9, 3]
        assert report.keyframe_bits == 80
        assert report.header_bits == 168 + 2 * 32 + (16 - 9) + (8 - 3)

    def test_fps_from_header(self):
        report = analyze_container(sample_container(fps_num=50))
        assert (report.fps_num, report.fps_den) == (50, 1)

    def test_malformed(self):
        with pytest.raises(ContainerError):
            analyze_container(b'S2DC')

    def test_to_dict(self):
        """The dict carries totals, per-frame bits and rates."""
        data = analyze_container(sample_container()).to_dict()
        assert data['frames'] == 3
        assert data['frame_bits'] == [0, 9, 3]
        assert data['fps'] == '25/1'
        assert data['stats']['max_inter_bits'] == 9
        assert 'psnr' not in data


class TestPsnr:
    """Tests for the PSNR sanity metric."""

    def test_identical_frames(self):
        assert psnr_sanity(zeros((3, 4, 4)), zeros((3, 4, 4))) == math.inf

    def test_known_mse(self):
        """MSE 0.01 is 20 dB."""
        assert psnr_sanity(zeros((3, 4, 4)), full((3, 4, 4), 0.1)) == pytest.approx(20.0, abs=1e-4)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            psnr_sanity(zeros((3, 4, 4)), zeros((3, 4, 8)))

    def test_sequence_uses_common_prefix(self):
        """Lists of different length compare their shared frames."""
        a = [zeros((3, 4, 4))] * 3
        b = [zeros((3, 4, 4))] * 2
        assert sequence_psnr(a, b) == [math.inf, math.inf]


class TestBdRate:
    """Tests for Bjontegaard delta rate."""

    def test_identical_curves(self):
        assert bd_rate(ANCHOR, ANCHOR) == pytest.approx(0.0, abs=1e-9)

    def test_half_rate(self):
        """Halving every rate at equal quality saves 50 %."""
        test = [(rate / 2, quality) for rate, quality in ANCHOR]
        assert bd_rate(ANCHOR, test) == pytest.approx(-50.0, abs=1e-6)

    def test_double_rate(self):
        test = [(rate * 2, quality) for rate, quality in ANCHOR]
        assert bd_rate(ANCHOR, test) == pytest.approx(100.0, abs=1e-6)

    def test_too_few_points(self):
        with pytest.raises(ConfigError):
            bd_rate(ANCHOR[:3], ANCHOR)

    def test_non_positive_rate(self):
        with pytest.raises(ConfigError):
            bd_rate([(0.0, 30.0)] + ANCHOR[1:], ANCHOR)

    def test_repeated_quality(self):
        with pytest.raises(ConfigError):
            bd_rate(ANCHOR, [(50.0, 30.0), (60.0, 30.0), (70.0, 33.0), (80.0, 36.0)])

    def test_no_overlap(self):
        """Disjoint quality ranges have no common interval."""
        high = [(rate, quality + 20.0) for rate, quality in ANCHOR]
        with pytest.raises(ConfigError):
            bd_rate(ANCHOR, high)


class TestCharts:
    """Tests for PNG chart output."""

    @pytest.fixture
    def charts(self):
        generator = ChartGenerator()
        if not generator.available:
            pytest.skip("matplotlib not installed")
        return generator

    def test_frame_bits(self, charts, tmp_path):
        path = charts.plot_frame_bits(analyze_container(sample_container()), tmp_path / 'bits.png')
        assert path.read_bytes()[:4] == b'\x89PNG'

    def test_rd_curves(self, charts, tmp_path):
        half = [(rate / 2, quality) for rate, quality in ANCHOR]
        path = charts.plot_rd_curves({'anchor': ANCHOR, 'test': half}, tmp_path / 'rd.png')
        assert path.exists() and path.stat().st_size > 0


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
