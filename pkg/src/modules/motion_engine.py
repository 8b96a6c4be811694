"""
Sparse2Dense - Motion Engine Module
Turns a (reference, inter) keypoint pair into dense backward motion.

Candidate 0 is the identity (background) grid; candidate k shifts the
identity grid by kp_ref[k] - kp_inter[k]. A U-Net over heatmap differences
and candidate-warped texture predicts a per-cell softmax mask over the
candidates and a planar sigmoid occlusion map. The flow is the
mask-weighted sum of the candidates.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from ..config import MotionTopology
from ..utils import Utils
from .errors import ShapeError
from .keypoint_extractor import KeypointSet
from .networks import conv_specs, unet_forward, unet_specs
from .tensor_core import (
    Tensor, ElementwiseKind, as_tensor, cell_centers, conv2d, elementwise, grid_sample,
    identity_grid, reshape, sigmoid, softmax_axis,
)
from .validator import TensorSpec
from .weights import WeightBundle

PREFIX = 'motion'


@dataclass(frozen=True, eq=False)
class SparseMotionField:
    """Warp candidates [K+1, D, H, W, 3]; index 0 is the identity grid."""
    candidates: Tensor

    @property
    def grid_shape(self) -> tuple:
        return tuple(self.candidates.shape[1:4])


@dataclass(frozen=True, eq=False)
class HeatmapDiff:
    """H(kp_inter) - H(kp_ref), [K, D, H, W], values in [-1, 1]."""
    values: Tensor


@dataclass(frozen=True, eq=False)
class DenseMotion:
    mask: Tensor
    occlusion: Tensor
    flow: Optional[Tensor] = None


@dataclass(frozen=True)
class DenseMotionWeights:
    bundle: WeightBundle
    topology: MotionTopology

    @staticmethod
    def specs(topology: MotionTopology) -> List[TensorSpec]:
        base = topology.unet.out_channels
        candidates = topology.num_keypoints + 1
        return (unet_specs(f"{PREFIX}.unet", topology.unet)
                + conv_specs(f"{PREFIX}.mask", candidates * topology.depth, base, 1)
                + conv_specs(f"{PREFIX}.occlusion", 1, base, 1))

    @classmethod
    def from_bundle(cls, bundle: WeightBundle, topology: MotionTopology) -> 'DenseMotionWeights':
        bundle.require(cls.specs(topology), scope=f"{PREFIX}.")
        return cls(bundle, topology)


def _check_pair(kp_ref: KeypointSet, kp_inter: KeypointSet) -> None:
    if kp_ref.num_keypoints != kp_inter.num_keypoints:
        raise ShapeError("Keypoint counts differ", axis='keypoints',
                         expected=kp_ref.num_keypoints, actual=kp_inter.num_keypoints)


# ==================== HEATMAPS ====================

def gaussian_heatmap(kps: KeypointSet, grid_shape: Sequence[int], sigma2: float) -> Tensor:
    """exp(-|grid(p) - kp_k|^2 / (2 sigma2)) per keypoint, [K, D, H, W]."""
    if sigma2 <= 0:
        raise ShapeError("sigma2 must be positive", axis='sigma2', expected='> 0', actual=sigma2)
    depth, height, width = grid_shape
    points = kps.points.astype(np.float64)
    dx = cell_centers(width)[None, :] - points[:, 0:1]
    dy = cell_centers(height)[None, :] - points[:, 1:2]
    dz = cell_centers(depth)[None, :] - points[:, 2:3]
    dist2 = (dz[:, :, None, None] ** 2 + dy[:, None, :, None] ** 2
             + dx[:, None, None, :] ** 2)
    return as_tensor(np.exp(-dist2 / (2.0 * sigma2)))


def heatmap_difference(kp_ref: KeypointSet, kp_inter: KeypointSet,
                       grid_shape: Sequence[int], sigma2: float) -> HeatmapDiff:
    _check_pair(kp_ref, kp_inter)
    inter = gaussian_heatmap(kp_inter, grid_shape, sigma2)
    ref = gaussian_heatmap(kp_ref, grid_shape, sigma2)
    return HeatmapDiff(as_tensor(inter.astype(np.float64) - ref))


# ==================== SPARSE MOTION ====================

def sparse_motion(kp_ref: KeypointSet, kp_inter: KeypointSet,
                  grid_shape: Sequence[int]) -> SparseMotionField:
    _check_pair(kp_ref, kp_inter)
    identity = identity_grid(*grid_shape)
    shifts = (kp_ref.points - kp_inter.points).astype(np.float32)
    shifted = identity[None] + shifts[:, None, None, None, :]
    return SparseMotionField(as_tensor(np.concatenate([identity[None], shifted], axis=0)))


def coarse_deform(texture: Tensor, sparse: SparseMotionField) -> Tensor:
    """grid_sample with every candidate, concatenated on channels in candidate order."""
    if tuple(texture.shape[1:]) != sparse.grid_shape:
        raise ShapeError("Texture and motion grid differ", axis='spatial',
                         expected=sparse.grid_shape, actual=tuple(texture.shape[1:]))
    warped = [grid_sample(texture, candidate) for candidate in sparse.candidates]
    return as_tensor(np.concatenate(warped, axis=0))


# ==================== DENSE MOTION ====================

def dense_motion(diff: HeatmapDiff, coarse: Tensor, weights: DenseMotionWeights) -> DenseMotion:
    topology = weights.topology
    if diff.values.shape[1:] != coarse.shape[1:]:
        raise ShapeError("Heatmap difference and coarse feature differ", axis='spatial',
                         expected=diff.values.shape[1:], actual=coarse.shape[1:])
    _, depth, height, width = coarse.shape
    stacked = elementwise(diff.values, coarse, ElementwiseKind.CONCAT_CHANNELS)
    planar = reshape(stacked, (stacked.shape[0] * depth, height, width))

    features = unet_forward(planar, weights.bundle, f"{PREFIX}.unet", topology.unet)
    mask_logits = conv2d(features, weights.bundle.get(f"{PREFIX}.mask.weight"),
                         weights.bundle.get(f"{PREFIX}.mask.bias"))
    mask = softmax_axis(reshape(mask_logits, (topology.num_keypoints + 1, depth, height, width)),
                        axis=0)
    occlusion = sigmoid(conv2d(features, weights.bundle.get(f"{PREFIX}.occlusion.weight"),
                               weights.bundle.get(f"{PREFIX}.occlusion.bias")))
    return DenseMotion(mask=mask, occlusion=occlusion)


def compose_flow(mask: Tensor, sparse: SparseMotionField) -> Tensor:
    """flow(p) = sum_k mask[k](p) * candidates[k](p), [D, H, W, 3]."""
    if tuple(mask.shape) != tuple(sparse.candidates.shape[:4]):
        raise ShapeError("Mask does not match motion candidates", axis='candidates',
                         expected=tuple(sparse.candidates.shape[:4]), actual=tuple(mask.shape))
    products = mask.astype(np.float64)[..., None] * sparse.candidates.astype(np.float64)
    # summing in sorted order makes the result independent of candidate order
    return as_tensor(np.sort(products, axis=0).sum(axis=0))


def estimate_motion(texture: Tensor, kp_ref: KeypointSet, kp_inter: KeypointSet,
                    weights: DenseMotionWeights, sigma2: float) -> DenseMotion:
    grid_shape = tuple(texture.shape[1:])
    sparse = sparse_motion(kp_ref, kp_inter, grid_shape)
    coarse = coarse_deform(texture, sparse)
    diff = heatmap_difference(kp_ref, kp_inter, grid_shape, sigma2)
    motion = dense_motion(diff, coarse, weights)
    return DenseMotion(mask=motion.mask, occlusion=motion.occlusion,
                       flow=compose_flow(motion.mask, sparse))


def dump_motion(motion: DenseMotion, out_dir: Union[str, Path], stem: str) -> List[Path]:
    """Raw little-endian f32 planes plus a JSON shape sidecar."""
    out_dir = Utils.ensure_directory(out_dir)
    written: List[Path] = []
    shapes = {}
    planes = {'flow': motion.flow, 'occlusion': motion.occlusion, 'mask': motion.mask}
    for name, tensor in planes.items():
        if tensor is None:
            continue
        path = out_dir / f"{stem}.{name}.f32"
        path.write_bytes(np.ascontiguousarray(tensor, dtype='<f4').tobytes())
        shapes[name] = list(tensor.shape)
        written.append(path)
    written.append(Utils.save_json(out_dir / f"{stem}.json",
                                   {'dtype': 'float32', 'byte_order': 'little', 'shapes': shapes}))
    return written
