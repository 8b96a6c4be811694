"""
Sparse2Dense - Networks Module
Shared building blocks: named convolution layers and the U-Net used by
the keypoint extractor and the dense motion estimator.

A U-Net with L levels owns tensors `{prefix}.down{i}`, `{prefix}.bottleneck`
and `{prefix}.up{i}`, each with `.weight` and `.bias`.
"""

from typing import List

from ..config import UNetTopology
from .errors import ShapeError
from .tensor_core import (
    Tensor, avg_pool, conv2d, elementwise, ElementwiseKind, relu, upsample_nearest,
)
from .validator import TensorSpec
from .weights import WeightBundle


def conv_specs(name: str, out_channels: int, in_channels: int, kernel: int) -> List[TensorSpec]:
    return [
        TensorSpec(f"{name}.weight", (out_channels, in_channels, kernel, kernel)),
        TensorSpec(f"{name}.bias", (out_channels,)),
    ]


def conv_layer(x: Tensor, bundle: WeightBundle, name: str) -> Tensor:
    """Same-size convolution with the named kernel (odd sizes only)."""
    weight = bundle.get(f"{name}.weight")
    padding = weight.shape[-1] // 2
    return conv2d(x, weight, bundle.get(f"{name}.bias"), stride=1, padding=padding)


def unet_specs(prefix: str, topology: UNetTopology) -> List[TensorSpec]:
    specs: List[TensorSpec] = []
    levels = topology.levels
    for i in range(levels):
        in_channels = topology.in_channels if i == 0 else topology.channels(i - 1)
        specs += conv_specs(f"{prefix}.down{i}", topology.channels(i), in_channels, 3)
    specs += conv_specs(f"{prefix}.bottleneck", topology.channels(levels),
                        topology.channels(levels - 1), 3)
    for i in range(levels):
        specs += conv_specs(f"{prefix}.up{i}", topology.channels(i),
                            topology.channels(i + 1) + topology.channels(i), 3)
    return specs


def unet_forward(x: Tensor, bundle: WeightBundle, prefix: str, topology: UNetTopology) -> Tensor:
    """[in, h, w] -> [base, h, w]; h and w must be divisible by 2**levels."""
    step = 2 ** topology.levels
    for axis, size in (('height', x.shape[1]), ('width', x.shape[2])):
        if size % step != 0:
            raise ShapeError(f"U-Net input {axis} must be divisible by {step}",
                             axis=axis, expected=f"multiple of {step}", actual=size)

    skips = []
    h = x
    for i in range(topology.levels):
        h = relu(conv_layer(h, bundle, f"{prefix}.down{i}"))
        skips.append(h)
        h = avg_pool(h, 2)

    h = relu(conv_layer(h, bundle, f"{prefix}.bottleneck"))

    for i in reversed(range(topology.levels)):
        h = upsample_nearest(h, 2)
        h = elementwise(h, skips[i], ElementwiseKind.CONCAT_CHANNELS)
        h = relu(conv_layer(h, bundle, f"{prefix}.up{i}"))
    return h
