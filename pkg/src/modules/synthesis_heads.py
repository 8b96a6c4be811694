"""
Sparse2Dense - Synthesis Heads Module
Texture encoding, occlusion-gated feature refinement, frame generation
and vertex regression over the refined feature.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..config import GeneratorTopology, TextureTopology, VertexHeadTopology, Config
from .errors import ConfigError, ShapeError
from .logger import Logger
from .networks import conv_layer, conv_specs
from .tensor_core import (
    Tensor, ElementwiseKind, as_tensor, avg_pool, elementwise, grid_sample, linear,
    reduce_pool_adaptive, relu, reshape, sigmoid, upsample_nearest,
)
from .validator import TensorSpec
from .weights import WeightBundle


@dataclass(frozen=True, eq=False)
class VertexSet:
    """[10475, 2] vertex (x, y) coordinates in [0, 1], row i is vertex i."""
    coords: Tensor

    def __post_init__(self):
        coords = as_tensor(self.coords)
        if coords.shape != (Config.NUM_VERTICES, 2):
            raise ShapeError("Vertex sets are [10475, 2]", axis='vertices',
                             expected=(Config.NUM_VERTICES, 2), actual=coords.shape)
        object.__setattr__(self, 'coords', coords)

    def equals(self, other: 'VertexSet') -> bool:
        return np.array_equal(self.coords, other.coords)


# ==================== WEIGHTS ====================

@dataclass(frozen=True)
class TextureEncoderWeights:
    bundle: WeightBundle
    topology: TextureTopology

    @staticmethod
    def specs(topology: TextureTopology) -> List[TensorSpec]:
        specs: List[TensorSpec] = []
        for i in range(topology.levels):
            in_channels = 3 if i == 0 else topology.hidden_channels
            specs += conv_specs(f"texture.conv{i}", topology.hidden_channels, in_channels, 3)
        specs += conv_specs("texture.project", topology.out_channels * topology.depth,
                            topology.hidden_channels, 1)
        return specs

    @classmethod
    def from_bundle(cls, bundle: WeightBundle, topology: TextureTopology) -> 'TextureEncoderWeights':
        bundle.require(cls.specs(topology), scope="texture.")
        return cls(bundle, topology)


@dataclass(frozen=True)
class GeneratorWeights:
    bundle: WeightBundle
    topology: GeneratorTopology

    @staticmethod
    def specs(topology: GeneratorTopology) -> List[TensorSpec]:
        specs: List[TensorSpec] = []
        for i in range(topology.levels):
            in_channels = topology.in_channels if i == 0 else topology.hidden_channels
            specs += conv_specs(f"generator.up{i}", topology.hidden_channels, in_channels, 3)
        specs += conv_specs("generator.out", 3, topology.hidden_channels, 3)
        return specs

    @classmethod
    def from_bundle(cls, bundle: WeightBundle, topology: GeneratorTopology) -> 'GeneratorWeights':
        bundle.require(cls.specs(topology), scope="generator.")
        return cls(bundle, topology)


@dataclass(frozen=True)
class VertexHeadWeights:
    bundle: WeightBundle
    topology: VertexHeadTopology
    fc_weight: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # float64 copy made once so each forward pass skips the widening
        object.__setattr__(self, 'fc_weight',
                           self.bundle.get("vertex.fc.weight").astype(np.float64))

    @staticmethod
    def specs(topology: VertexHeadTopology) -> List[TensorSpec]:
        specs: List[TensorSpec] = []
        k = topology.kernel_size
        for b in range(topology.res_blocks):
            specs += conv_specs(f"vertex.res{b}.conv1", topology.bottleneck_channels,
                                topology.channels, k)
            specs += conv_specs(f"vertex.res{b}.conv2", topology.channels,
                                topology.bottleneck_channels, k)
        specs += [TensorSpec("vertex.fc.weight", (topology.fc_out, topology.channels)),
                  TensorSpec("vertex.fc.bias", (topology.fc_out,))]
        return specs

    @classmethod
    def from_bundle(cls, bundle: WeightBundle, topology: VertexHeadTopology) -> 'VertexHeadWeights':
        if topology.fc_out != 2 * Config.NUM_VERTICES:
            raise ConfigError("Vertex head must regress a 20950-vector",
                              expected=2 * Config.NUM_VERTICES, actual=topology.fc_out)
        bundle.require(cls.specs(topology), scope="vertex.")
        return cls(bundle, topology)


# ==================== OPERATIONS ====================

def encode_texture(frame: Tensor, weights: TextureEncoderWeights) -> Tensor:
    """[3, H, W] -> [C, D, H / 2**L, W / 2**L] texture volume."""
    topology = weights.topology
    step = 2 ** topology.levels
    for axis, size in (('height', frame.shape[1]), ('width', frame.shape[2])):
        if size % step != 0:
            raise ShapeError(f"Frame {axis} must be divisible by {step}", axis=axis,
                             expected=f"multiple of {step}", actual=size)
    h = frame
    for i in range(topology.levels):
        h = avg_pool(relu(conv_layer(h, weights.bundle, f"texture.conv{i}")), 2)
    projected = conv_layer(h, weights.bundle, "texture.project")
    return reshape(projected, (topology.out_channels, topology.depth) + projected.shape[1:])


def refine_feature(texture: Tensor, flow: Tensor, occlusion: Tensor) -> Tensor:
    """Warp by the flow, average over depth, gate by the occlusion map."""
    channels, depth, height, width = texture.shape
    if occlusion.shape != (1, height, width):
        raise ShapeError("Occlusion map must be [1, H, W]", axis='occlusion',
                         expected=(1, height, width), actual=occlusion.shape)
    warped = grid_sample(texture, flow)
    flattened = as_tensor(warped.astype(np.float64).mean(axis=1))
    return elementwise(flattened, occlusion, ElementwiseKind.HADAMARD)


def generate_frame(refined: Tensor, weights: GeneratorWeights) -> Tensor:
    """Upsampling conv stack ending in a sigmoid; output [3, H * 2**L, W * 2**L]."""
    h = refined
    for i in range(weights.topology.levels):
        h = relu(conv_layer(upsample_nearest(h, 2), weights.bundle, f"generator.up{i}"))
    return sigmoid(conv_layer(h, weights.bundle, "generator.out"))


def predict_vertices(refined: Tensor, weights: VertexHeadWeights) -> VertexSet:
    """ResBlocks -> adaptive average pool -> FC(20950) -> sigmoid -> [10475, 2]."""
    h = refined
    for b in range(weights.topology.res_blocks):
        branch = relu(conv_layer(h, weights.bundle, f"vertex.res{b}.conv1"))
        branch = conv_layer(branch, weights.bundle, f"vertex.res{b}.conv2")
        h = elementwise(h, branch, ElementwiseKind.ADD)
    pooled = reduce_pool_adaptive(h)
    flat = sigmoid(linear(pooled, weights.fc_weight, weights.bundle.get("vertex.fc.bias")))
    return VertexSet(reshape(flat, (weights.topology.num_vertices, 2)))


class SynthesisHeads:
    """The decoder-side heads bundled over one set of weights."""

    def __init__(self, texture: TextureEncoderWeights, generator: GeneratorWeights,
                 vertex_head: VertexHeadWeights):
        self.logger = Logger.get_instance()
        self.texture = texture
        self.generator = generator
        self.vertex_head = vertex_head

    def encode_texture(self, frame: Tensor) -> Tensor:
        return encode_texture(frame, self.texture)

    def synthesize(self, texture: Tensor, flow: Tensor, occlusion: Tensor,
                   with_vertices: bool = True):
        """Returns (frame, vertices or None) for one inter frame."""
        refined = refine_feature(texture, flow, occlusion)
        frame = generate_frame(refined, self.generator)
        vertices: Optional[VertexSet] = None
        if with_vertices:
            vertices = predict_vertices(refined, self.vertex_head)
        return frame, vertices
