"""
Sparse2Dense - Configuration Module
Contains all configuration settings, constants, and default values.
"""

import os
import math
from pathlib import Path
from typing import Dict, Any, Optional, Tuple
from dataclasses import dataclass, field, asdict, fields
from enum import Enum

from .modules.errors import ConfigError, ShapeError


class KeyframeCodec(Enum):
    """How the key-reference frame is carried in the container."""
    PNG = 0
    EXTERNAL = 1

    @classmethod
    def from_tag(cls, tag: int) -> 'KeyframeCodec':
        for member in cls:
            if member.value == tag:
                return member
        raise ConfigError(f"Unknown keyframe codec tag {tag}", tag=tag)


class FrameFormat(Enum):
    """Raster formats for reconstructed frames."""
    PNG = "png"
    PPM = "ppm"


@dataclass
class AppPaths:
    """Application paths configuration."""
    root: Path = field(default_factory=lambda: Path.cwd())
    logs: Path = field(default_factory=lambda: Path.cwd() / "logs")
    profiles: Path = field(default_factory=lambda: Path.cwd() / "profiles")


# ==================== NETWORK TOPOLOGIES ====================

@dataclass(frozen=True)
class UNetTopology:
    """Encoder/decoder with skip connections; level i has base * 2**i channels."""
    in_channels: int
    base_channels: int = 16
    levels: int = 3

    def channels(self, level: int) -> int:
        return self.base_channels * (2 ** level)

    @property
    def out_channels(self) -> int:
        return self.base_channels


@dataclass(frozen=True)
class ExtractorTopology:
    unet: UNetTopology
    num_keypoints: int
    depth: int


@dataclass(frozen=True)
class TextureTopology:
    hidden_channels: int
    out_channels: int
    depth: int
    levels: int


@dataclass(frozen=True)
class MotionTopology:
    unet: UNetTopology
    num_keypoints: int
    texture_channels: int
    depth: int


@dataclass(frozen=True)
class GeneratorTopology:
    in_channels: int
    hidden_channels: int
    levels: int


@dataclass(frozen=True)
class VertexHeadTopology:
    channels: int
    res_blocks: int = 3
    kernel_size: int = 1
    bottleneck_channels: int = 16
    num_vertices: int = 10475

    @property
    def fc_out(self) -> int:
        return 2 * self.num_vertices


class Config:
    """Main configuration class for Sparse2Dense."""

    # Application Info
    APP_NAME = "Sparse2Dense"
    APP_VERSION = "1.0.0"
    APP_DESCRIPTION = "Keypoint-driven human video codec with dense motion synthesis"

    # Wire formats
    CONTAINER_MAGIC = b"S2DC"
    CONTAINER_VERSION = 1
    WEIGHTS_MAGIC = b"S2DW"
    WEIGHTS_VERSION = 1
    VERTICES_MAGIC = b"S2DV"

    # Keypoint codec
    DEFAULT_NUM_KEYPOINTS = 15
    DEFAULT_Q_LOG2 = 6
    MIN_Q_LOG2 = 2
    MAX_Q_LOG2 = 12
    MAX_RESIDUAL = 1 << 20
    PREFIX_CONTEXTS = 17

    # Motion / synthesis
    DEFAULT_DEPTH = 4
    DEFAULT_DOWNSAMPLE = 2
    DEFAULT_SIGMA2 = 0.01
    NUM_VERTICES = 10475

    # Rate reporting
    DEFAULT_FPS = (25, 1)

    # Loss weights: equ, kp, per, adv, ver
    LOSS_WEIGHTS: Tuple[float, float, float, float, float] = (10.0, 10.0, 10.0, 1.0, 100.0)
    KEYPOINT_PRIOR_TAU = 0.1

    # Threading Configuration
    MAX_WORKERS = os.cpu_count() or 4

    # Application instance paths
    _paths: Optional[AppPaths] = None

    @classmethod
    def get_paths(cls) -> AppPaths:
        """Get application paths, creating default if not set."""
        if cls._paths is None:
            cls._paths = AppPaths()
        return cls._paths


@dataclass
class CodecConfig:
    """Every knob of the codec in one place."""
    num_keypoints: int = Config.DEFAULT_NUM_KEYPOINTS
    q_log2: int = Config.DEFAULT_Q_LOG2
    depth: int = Config.DEFAULT_DEPTH
    downsample: int = Config.DEFAULT_DOWNSAMPLE
    sigma2: float = Config.DEFAULT_SIGMA2
    fps_num: int = Config.DEFAULT_FPS[0]
    fps_den: int = Config.DEFAULT_FPS[1]

    # Network widths
    extractor_base: int = 16
    extractor_levels: int = 3
    texture_hidden: int = 16
    texture_channels: int = 8
    feature_levels: int = 2
    motion_base: int = 16
    motion_levels: int = 2
    generator_hidden: int = 16
    res_blocks: int = 3
    res_kernel: int = 1
    res_bottleneck: int = 16

    # Runtime
    workers: int = 0
    keyframe_codec: str = 'png'

    # ==================== TOPOLOGIES ====================

    @property
    def extractor(self) -> ExtractorTopology:
        return ExtractorTopology(
            unet=UNetTopology(3, self.extractor_base, self.extractor_levels),
            num_keypoints=self.num_keypoints,
            depth=self.depth,
        )

    @property
    def texture(self) -> TextureTopology:
        return TextureTopology(
            hidden_channels=self.texture_hidden,
            out_channels=self.texture_channels,
            depth=self.depth,
            levels=self.feature_levels,
        )

    @property
    def motion(self) -> MotionTopology:
        k = self.num_keypoints
        in_channels = (k + (k + 1) * self.texture_channels) * self.depth
        return MotionTopology(
            unet=UNetTopology(in_channels, self.motion_base, self.motion_levels),
            num_keypoints=k,
            texture_channels=self.texture_channels,
            depth=self.depth,
        )

    @property
    def generator(self) -> GeneratorTopology:
        return GeneratorTopology(self.texture_channels, self.generator_hidden,
                                 self.feature_levels)

    @property
    def vertex_head(self) -> VertexHeadTopology:
        return VertexHeadTopology(
            channels=self.texture_channels,
            res_blocks=self.res_blocks,
            kernel_size=self.res_kernel,
            bottleneck_channels=self.res_bottleneck,
            num_vertices=Config.NUM_VERTICES,
        )

    @property
    def fps(self) -> Tuple[int, int]:
        return self.fps_num, self.fps_den

    @property
    def max_workers(self) -> int:
        return self.workers if self.workers > 0 else Config.MAX_WORKERS

    # ==================== VALIDATION ====================

    def validate(self) -> 'CodecConfig':
        """Raise ConfigError on the first out-of-range setting."""
        if not Config.MIN_Q_LOG2 <= self.q_log2 <= Config.MAX_Q_LOG2:
            raise ConfigError(
                f"q_log2 must be in [{Config.MIN_Q_LOG2}, {Config.MAX_Q_LOG2}]",
                q_log2=self.q_log2)
        for name in ('num_keypoints', 'depth'):
            value = getattr(self, name)
            if not 1 <= value <= 255:
                raise ConfigError(f"{name} must fit in one byte", **{name: value})
        if not 1 <= self.fps_num <= 0xFFFF or not 1 <= self.fps_den <= 0xFFFF:
            raise ConfigError("fps terms must be in [1, 65535]",
                              fps=f"{self.fps_num}/{self.fps_den}")
        if self.sigma2 <= 0:
            raise ConfigError("sigma2 must be positive", sigma2=self.sigma2)
        positive = ('downsample', 'extractor_base', 'extractor_levels', 'texture_hidden',
                    'texture_channels', 'feature_levels', 'motion_base', 'motion_levels',
                    'generator_hidden', 'res_kernel', 'res_bottleneck')
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive", **{name: getattr(self, name)})
        if self.res_blocks < 0:
            raise ConfigError("res_blocks must be non-negative", res_blocks=self.res_blocks)
        if self.res_kernel % 2 == 0:
            raise ConfigError("res_kernel must be odd", res_kernel=self.res_kernel)
        if self.keyframe_codec not in ('png', 'external'):
            raise ConfigError("keyframe_codec must be 'png' or 'external'",
                              keyframe_codec=self.keyframe_codec)
        return self

    def check_frame_size(self, width: int, height: int) -> None:
        """Frame sizes must survive every pooling level."""
        extractor_step = self.downsample * (2 ** self.extractor_levels)
        feature_step = 2 ** (self.feature_levels + self.motion_levels)
        step = math.lcm(extractor_step, feature_step)
        for axis, size in (('width', width), ('height', height)):
            if size <= 0 or size % step != 0:
                raise ShapeError(f"Frame {axis} must be a positive multiple of {step}",
                                 axis=axis, expected=f"k*{step}", actual=size)
        if width > 0xFFFF or height > 0xFFFF:
            raise ShapeError("Frame size must fit in 16 bits", axis='width',
                             expected='<= 65535', actual=max(width, height))

    # ==================== SERIALIZATION ====================

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CodecConfig':
        valid_fields = {f.name for f in fields(cls)}
        filtered = {k: v for k, v in data.items() if k in valid_fields}
        return cls(**filtered)

    @classmethod
    def from_profile(cls, name: str, profiles_dir: Optional[Path] = None) -> 'CodecConfig':
        from .modules.profile_manager import ProfileManager
        return ProfileManager(profiles_dir).config_for(name)

    def replace(self, **changes: Any) -> 'CodecConfig':
        data = self.to_dict()
        data.update({k: v for k, v in changes.items() if v is not None})
        return CodecConfig.from_dict(data)


# Default configuration instance
DEFAULT_CONFIG = CodecConfig()
