"""
Sparse2Dense - Tensor Core Module
Dense float32 numerics for the forward-only networks: convolution,
pooling, fully-connected maps, axis softmax and grid-sample warping.

Tensors are read-only, C-contiguous float32 numpy arrays. Reductions and
products accumulate in float64 and round once on the way out. Normalized
coordinates place cell i of an axis of size S at (2i + 1) / S - 1.
"""

from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeError

Tensor = np.ndarray

# Unnormalized positions this close to an integer snap onto it, so grids
# built from float32 cell centers land exactly on cells.
_SNAP_EPS = 1e-4


class ElementwiseKind(Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    HADAMARD = "hadamard"
    ADD = "add"
    CONCAT_CHANNELS = "concat_channels"


# ==================== CONSTRUCTION ====================

def _freeze(values: np.ndarray) -> Tensor:
    out = np.ascontiguousarray(values, dtype=np.float32)
    out.setflags(write=False)
    return out


def as_tensor(values, shape: Optional[Sequence[int]] = None) -> Tensor:
    """Copy anything array-like into a read-only float32 tensor."""
    out = np.array(values, dtype=np.float32, order='C', copy=True)
    if shape is not None:
        return reshape(out, shape)
    out.setflags(write=False)
    return out


def zeros(shape: Sequence[int]) -> Tensor:
    return full(shape, 0.0)


def full(shape: Sequence[int], value: float) -> Tensor:
    _check_dims(shape)
    return _freeze(np.full(tuple(shape), value, dtype=np.float32))


def reshape(tensor: Tensor, shape: Sequence[int]) -> Tensor:
    """Reshape preserving data length; raises ShapeError otherwise."""
    shape = tuple(int(s) for s in shape)
    _check_dims(shape)
    if int(np.prod(shape)) != tensor.size:
        raise ShapeError("Reshape must preserve element count", axis='size',
                         expected=tensor.size, actual=int(np.prod(shape)))
    return _freeze(np.reshape(tensor, shape))


def check_finite(tensor: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(tensor)):
        raise ShapeError(f"{what} contains non-finite values", axis='value')


def _check_dims(shape: Sequence[int]) -> None:
    for size in shape:
        if int(size) <= 0:
            raise ShapeError("Dimensions must be positive", axis='size',
                             expected='> 0', actual=tuple(shape))


# ==================== GRIDS ====================

def cell_centers(size: int) -> np.ndarray:
    """Normalized centers of an axis of `size` cells, in float64."""
    if size <= 0:
        raise ShapeError("Axis size must be positive", axis='size', expected='> 0', actual=size)
    return (2.0 * np.arange(size, dtype=np.float64) + 1.0) / size - 1.0


def identity_grid(depth: int, height: int, width: int) -> Tensor:
    """[D, H, W, 3] grid holding each cell's own (x, y, z) center."""
    z = cell_centers(depth)
    y = cell_centers(height)
    x = cell_centers(width)
    zz, yy, xx = np.meshgrid(z, y, x, indexing='ij')
    return _freeze(np.stack([xx, yy, zz], axis=-1))


def planar_identity_grid(height: int, width: int) -> Tensor:
    """[H, W, 2] grid holding each cell's own (x, y) center."""
    yy, xx = np.meshgrid(cell_centers(height), cell_centers(width), indexing='ij')
    return _freeze(np.stack([xx, yy], axis=-1))


def _unnormalize(coords: np.ndarray, size: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    pos = ((coords.astype(np.float64) + 1.0) * size - 1.0) / 2.0
    nearest = np.rint(pos)
    pos = np.where(np.abs(pos - nearest) < _SNAP_EPS, nearest, pos)
    pos = np.clip(pos, 0.0, size - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, size - 1)
    return lo, hi, pos - lo


def grid_sample(tensor: Tensor, grid: Tensor) -> Tensor:
    """
    Trilinear sampling of a [C, D, H, W] tensor at normalized grid points.

    The grid is [D, H, W, 3] in (x, y, z) order, or [H, W, 2] when the
    input depth is 1. Out-of-range points read the border value.
    """
    if tensor.ndim != 4:
        raise ShapeError("grid_sample expects a [C, D, H, W] input", axis='rank',
                         expected=4, actual=tensor.ndim)
    _, depth, height, width = tensor.shape

    if grid.ndim == 3 and grid.shape[-1] == 2:
        if depth != 1:
            raise ShapeError("Planar grids need a depth-1 input", axis='depth',
                             expected=1, actual=depth)
        zero = np.zeros(grid.shape[:2] + (1,), dtype=np.float64)
        grid = np.concatenate([grid.astype(np.float64), zero], axis=-1)[None]
    elif grid.ndim != 4 or grid.shape[-1] != 3:
        raise ShapeError("Grid must be [D, H, W, 3] or [H, W, 2]", axis='coordinate',
                         expected=3, actual=grid.shape)

    for axis, expected, actual in zip(('depth', 'height', 'width'),
                                      (depth, height, width), grid.shape[:3]):
        if expected != actual:
            raise ShapeError("Grid does not match input spatial shape", axis=axis,
                             expected=expected, actual=actual)
    check_finite(grid, "Sampling grid")

    x0, x1, tx = _unnormalize(grid[..., 0], width)
    y0, y1, ty = _unnormalize(grid[..., 1], height)
    z0, z1, tz = _unnormalize(grid[..., 2], depth)

    source = tensor.astype(np.float64)
    out = np.zeros((tensor.shape[0],) + grid.shape[:3], dtype=np.float64)
    for zi, wz in ((z0, 1.0 - tz), (z1, tz)):
        for yi, wy in ((y0, 1.0 - ty), (y1, ty)):
            for xi, wx in ((x0, 1.0 - tx), (x1, tx)):
                out += source[:, zi, yi, xi] * (wz * wy * wx)
    return _freeze(out)


# ==================== LINEAR MAPS ====================

def conv2d(tensor: Tensor, weight: Tensor, bias: Tensor,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of a [C, H, W] input with [K, C, kh, kw] weights."""
    if tensor.ndim != 3 or weight.ndim != 4:
        raise ShapeError("conv2d expects [C, H, W] input and [K, C, kh, kw] weights",
                         axis='rank', expected=(3, 4), actual=(tensor.ndim, weight.ndim))
    if stride < 1:
        raise ShapeError("Stride must be at least 1", axis='stride', expected='>= 1', actual=stride)
    channels, height, width = tensor.shape
    out_channels, in_channels, kh, kw = weight.shape
    if in_channels != channels:
        raise ShapeError("Weight input channels do not match input", axis='channels',
                         expected=channels, actual=in_channels)
    if bias.shape != (out_channels,):
        raise ShapeError("Bias length must equal output channels", axis='bias',
                         expected=out_channels, actual=bias.shape)

    sizes = []
    for axis, size, k in (('height', height, kh), ('width', width, kw)):
        span = size + 2 * padding - k
        if span < 0 or span % stride != 0:
            raise ShapeError("Kernel does not tile the padded input", axis=axis,
                             expected=f"(size + 2p - k) % {stride} == 0", actual=size)
        sizes.append(span // stride + 1)
    out_h, out_w = sizes

    padded = tensor.astype(np.float64)
    if padding:
        padded = np.pad(padded, ((0, 0), (padding, padding), (padding, padding)))
    kernel = weight.astype(np.float64, copy=False)
    out = np.zeros((out_channels, out_h, out_w), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            patch = padded[:, i:i + stride * out_h:stride, j:j + stride * out_w:stride]
            out += np.tensordot(kernel[:, :, i, j], patch, axes=(1, 0))
    out += bias.astype(np.float64)[:, None, None]
    return _freeze(out)


def linear(tensor: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """output[m] = bias[m] + sum_n weight[m, n] * input[n]."""
    if tensor.ndim != 1 or weight.ndim != 2 or weight.shape[1] != tensor.shape[0]:
        raise ShapeError("Linear input does not match weight columns", axis='features',
                         expected=weight.shape[1] if weight.ndim == 2 else None,
                         actual=tensor.shape)
    if bias.shape != (weight.shape[0],):
        raise ShapeError("Bias length must equal output features", axis='bias',
                         expected=weight.shape[0], actual=bias.shape)
    out = weight.astype(np.float64, copy=False) @ tensor.astype(np.float64) + bias.astype(np.float64)
    return _freeze(out)


# ==================== REDUCTIONS ====================

def softmax_axis(tensor: Tensor, axis: int) -> Tensor:
    if not -tensor.ndim <= axis < tensor.ndim:
        raise ShapeError("Softmax axis out of range", axis='axis',
                         expected=f"< {tensor.ndim}", actual=axis)
    values = tensor.astype(np.float64)
    shifted = np.exp(values - np.max(values, axis=axis, keepdims=True))
    return _freeze(shifted / np.sum(shifted, axis=axis, keepdims=True))


def reduce_pool_adaptive(tensor: Tensor) -> Tensor:
    """Per-channel spatial mean of a [C, H, W] tensor."""
    if tensor.ndim != 3:
        raise ShapeError("Adaptive pooling expects [C, H, W]", axis='rank',
                         expected=3, actual=tensor.ndim)
    return _freeze(tensor.astype(np.float64).mean(axis=(1, 2)))


def avg_pool(tensor: Tensor, factor: int) -> Tensor:
    """factor x factor block mean over the last two axes."""
    if factor == 1:
        return tensor
    channels, height, width = tensor.shape
    for axis, size in (('height', height), ('width', width)):
        if size % factor != 0:
            raise ShapeError(f"{axis} not divisible by pooling factor", axis=axis,
                             expected=f"multiple of {factor}", actual=size)
    blocks = tensor.astype(np.float64).reshape(
        channels, height // factor, factor, width // factor, factor)
    return _freeze(blocks.mean(axis=(2, 4)))


def upsample_nearest(tensor: Tensor, factor: int) -> Tensor:
    if factor == 1:
        return tensor
    return _freeze(np.repeat(np.repeat(tensor, factor, axis=-2), factor, axis=-1))


# ==================== ELEMENTWISE ====================

def elementwise(a: Tensor, b: Optional[Tensor], kind: ElementwiseKind) -> Tensor:
    if kind is ElementwiseKind.RELU:
        return _freeze(np.maximum(a, 0.0))
    if kind is ElementwiseKind.SIGMOID:
        # tanh form stays inside [0, 1] for any finite input
        return _freeze(0.5 * (np.tanh(0.5 * a.astype(np.float64)) + 1.0))

    if b is None:
        raise ShapeError(f"{kind.value} needs two operands", axis='operand')

    if kind is ElementwiseKind.CONCAT_CHANNELS:
        if a.shape[1:] != b.shape[1:]:
            raise ShapeError("Concatenated tensors must share non-channel dims",
                             axis='spatial', expected=a.shape[1:], actual=b.shape[1:])
        return _freeze(np.concatenate([a, b], axis=0))

    if kind is ElementwiseKind.HADAMARD:
        if a.shape != b.shape:
            broadcastable = a.ndim == b.ndim and a.shape[1:] == b.shape[1:] and 1 in (a.shape[0], b.shape[0])
            if not broadcastable:
                raise ShapeError("Hadamard operands must match or broadcast over channels",
                                 axis='channels', expected=a.shape, actual=b.shape)
        return _freeze(a.astype(np.float64) * b.astype(np.float64))

    if a.shape != b.shape:
        raise ShapeError("Added tensors must have equal shapes", axis='shape',
                         expected=a.shape, actual=b.shape)
    return _freeze(a.astype(np.float64) + b.astype(np.float64))


def relu(tensor: Tensor) -> Tensor:
    return elementwise(tensor, None, ElementwiseKind.RELU)


def sigmoid(tensor: Tensor) -> Tensor:
    return elementwise(tensor, None, ElementwiseKind.SIGMOID)
