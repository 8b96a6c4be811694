"""
Sparse2Dense - Keypoint Extractor Module
Downsamples a frame, runs a U-Net to per-keypoint heatmap logits over a
[D, h, w] grid and turns each heatmap into a 3D keypoint by taking the
softmax-weighted mean of the grid cell centers.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..config import ExtractorTopology
from ..utils import Utils
from .errors import ShapeError
from .logger import Logger
from .networks import conv_specs, unet_forward as _unet, unet_specs
from .tensor_core import (
    Tensor, as_tensor, avg_pool, cell_centers, check_finite, conv2d, reshape, softmax_axis,
)
from .validator import TensorSpec
from .weights import WeightBundle

PREFIX = 'extractor'


@dataclass(frozen=True, eq=False)
class KeypointSet:
    """K keypoints as a read-only (K, 3) float32 array of (x, y, z)."""
    points: Tensor

    def __post_init__(self):
        points = as_tensor(self.points)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ShapeError("Keypoints must be a (K, 3) array", axis='coordinate',
                             expected='(K, 3)', actual=points.shape)
        object.__setattr__(self, 'points', points)

    @property
    def num_keypoints(self) -> int:
        return self.points.shape[0]

    def equals(self, other: 'KeypointSet') -> bool:
        return np.array_equal(self.points, other.points)

    def to_list(self) -> List[List[float]]:
        return self.points.tolist()


@dataclass(frozen=True, eq=False)
class HeatmapVolume:
    """Normalized heatmaps [K, D, H, W]; every keypoint's volume sums to 1."""
    values: Tensor


@dataclass(frozen=True)
class ExtractorWeights:
    bundle: WeightBundle
    topology: ExtractorTopology

    @staticmethod
    def specs(topology: ExtractorTopology) -> List[TensorSpec]:
        head_out = topology.num_keypoints * topology.depth
        return (unet_specs(f"{PREFIX}.unet", topology.unet)
                + conv_specs(f"{PREFIX}.head", head_out, topology.unet.out_channels, 1))

    @classmethod
    def from_bundle(cls, bundle: WeightBundle, topology: ExtractorTopology) -> 'ExtractorWeights':
        bundle.require(cls.specs(topology), scope=f"{PREFIX}.")
        return cls(bundle, topology)


# ==================== OPERATIONS ====================

def downsample_frame(frame: Tensor, s: int) -> Tensor:
    """s x s block average per channel."""
    if s < 1:
        raise ShapeError("Downsample factor must be positive", axis='factor', expected='>= 1', actual=s)
    return avg_pool(frame, s)


def unet_forward(frame: Tensor, weights: ExtractorWeights) -> Tensor:
    """Raw heatmap logits [K, D, h, w] for a downsampled [3, h, w] frame."""
    topology = weights.topology
    features = _unet(frame, weights.bundle, f"{PREFIX}.unet", topology.unet)
    logits = conv2d(features, weights.bundle.get(f"{PREFIX}.head.weight"),
                    weights.bundle.get(f"{PREFIX}.head.bias"))
    _, height, width = logits.shape
    return reshape(logits, (topology.num_keypoints, topology.depth, height, width))


def normalize_heatmaps(logits: Tensor) -> HeatmapVolume:
    num_keypoints = logits.shape[0]
    flat = reshape(logits, (num_keypoints, int(np.prod(logits.shape[1:]))))
    return HeatmapVolume(reshape(softmax_axis(flat, axis=1), logits.shape))


def heatmaps_to_keypoints(logits: Tensor) -> KeypointSet:
    """Softmax over all D*H*W cells, then the expected cell-center coordinate."""
    if logits.ndim != 4:
        raise ShapeError("Heatmap logits must be [K, D, H, W]", axis='rank',
                         expected=4, actual=logits.ndim)
    check_finite(logits, "Heatmap logits")
    num_keypoints, depth, height, width = logits.shape

    heatmaps = normalize_heatmaps(logits).values
    weights = heatmaps.astype(np.float64).reshape(num_keypoints, -1)

    zz, yy, xx = np.meshgrid(cell_centers(depth), cell_centers(height), cell_centers(width),
                             indexing='ij')
    coords = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    points = np.clip(weights @ coords, -1.0, 1.0)
    return KeypointSet(points)


def extract_keypoints(frame: Tensor, s: int, weights: ExtractorWeights) -> KeypointSet:
    return heatmaps_to_keypoints(unet_forward(downsample_frame(frame, s), weights))


class KeypointExtractor:
    """Frame-parallel keypoint extraction over immutable weights."""

    def __init__(self, weights: ExtractorWeights, downsample: int,
                 max_workers: Optional[int] = None):
        self.logger = Logger.get_instance()
        self.weights = weights
        self.downsample = downsample
        self.max_workers = max_workers

    def extract(self, frame: Tensor) -> KeypointSet:
        return extract_keypoints(frame, self.downsample, self.weights)

    def extract_many(self, frames: Sequence[Tensor]) -> List[KeypointSet]:
        """Keypoints for every frame, in input order."""
        self.logger.debug("Extracting keypoints", frames=len(frames))
        return Utils.parallel_map(self.extract, frames, self.max_workers)
