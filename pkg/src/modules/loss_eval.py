"""
Sparse2Dense - Loss Evaluation Module
Forward-only evaluation of the five training loss terms and their
weighted total.

The functional forms here are substitutes chosen for this codebase:
  equivariance  mean |extract(T(frame)) - T(extract(frame))| over x and y
  keypoint      sum over pairs of max(0, 2 tau - d)^2 plus (mean z)^2
  perceptual    mean |a - b| averaged over scales 1, 1/2 and 1/4
  adversarial   mean((logits - 1)^2), least-squares generator side
  vertex        mean |pred - ref| over all 20950 coordinates
"""

from dataclasses import dataclass, asdict
from itertools import combinations
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import Config
from .errors import ConfigError, ShapeError, TransformError
from .keypoint_extractor import ExtractorWeights, KeypointSet, extract_keypoints
from .synthesis_heads import VertexSet
from .tensor_core import Tensor, as_tensor, avg_pool, grid_sample, planar_identity_grid, reshape

FeatureHook = Callable[[Tensor], Tensor]

# Lattice on which thin-plate Jacobians must stay positive
_FOLD_GRID_SIZE = 9

_SINGULAR_DET = 1e-12

# Newton iterations for the thin-plate inverse
_INVERSE_ITERATIONS = 50
_INVERSE_TOLERANCE = 1e-12
_INVERSE_ACCEPT = 1e-9


# ==================== TRANSFORMS ====================

class AffineTransform:
    """p -> A p + t on normalized (x, y)."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (2, 3):
            raise ShapeError("Affine matrix must be 2x3", axis='matrix',
                             expected=(2, 3), actual=matrix.shape)
        self.matrix = matrix

    @classmethod
    def identity(cls) -> 'AffineTransform':
        return cls([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix[:, :2]))

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.matrix[:, :2].T + self.matrix[:, 2]

    def check(self) -> None:
        if not abs(self.determinant) > _SINGULAR_DET:
            raise TransformError("Affine transform is not invertible",
                                 determinant=self.determinant)

    def inverse(self) -> 'AffineTransform':
        self.check()
        linear = np.linalg.inv(self.matrix[:, :2])
        return AffineTransform(np.hstack([linear, -(linear @ self.matrix[:, 2])[:, None]]))


def _tps_kernel(r2: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(r2 > 0, r2 * np.log(r2), 0.0)


class ThinPlateTransform:
    """Thin-plate spline mapping `source` control points onto `target`."""

    def __init__(self, source, target):
        self.source = np.asarray(source, dtype=np.float64)
        self.target = np.asarray(target, dtype=np.float64)
        if self.source.ndim != 2 or self.source.shape[1] != 2 or self.source.shape != self.target.shape:
            raise ShapeError("Control points must be matching (N, 2) arrays", axis='control',
                             expected=self.source.shape, actual=self.target.shape)
        if self.source.shape[0] < 3:
            raise TransformError("Thin-plate spline needs at least 3 control points",
                                 points=self.source.shape[0])
        if np.unique(self.source, axis=0).shape[0] != self.source.shape[0]:
            raise TransformError("Thin-plate control points must be distinct")
        self.is_identity = bool(np.array_equal(self.source, self.target))
        self._fit()

    def _fit(self) -> None:
        n = self.source.shape[0]
        diff = self.source[:, None, :] - self.source[None, :, :]
        system = np.zeros((n + 3, n + 3))
        system[:n, :n] = _tps_kernel((diff ** 2).sum(axis=-1))
        system[:n, n] = 1.0
        system[:n, n + 1:] = self.source
        system[n, :n] = 1.0
        system[n + 1:, :n] = self.source.T
        rhs = np.zeros((n + 3, 2))
        rhs[:n] = self.target
        try:
            solution = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as e:
            raise TransformError("Thin-plate system is singular", reason=str(e)) from e
        self.radial = solution[:n]
        self.affine = solution[n:]

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if self.is_identity:
            return points.copy()
        diff = points[:, None, :] - self.source[None, :, :]
        basis = _tps_kernel((diff ** 2).sum(axis=-1))
        return self.affine[0] + points @ self.affine[1:] + basis @ self.radial

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        """d apply / d p per point, shape (N, 2 out, 2 in)."""
        points = np.asarray(points, dtype=np.float64)
        if self.is_identity:
            return np.broadcast_to(np.eye(2), (points.shape[0], 2, 2)).copy()
        linear = np.broadcast_to(self.affine[1:].T, (points.shape[0], 2, 2))
        diff = points[:, None, :] - self.source[None, :, :]
        r2 = (diff ** 2).sum(axis=-1)
        with np.errstate(divide='ignore', invalid='ignore'):
            slope = np.where(r2 > 0, 2.0 * (np.log(r2) + 1.0), 0.0)
        return linear + np.einsum('nmi,mo->noi', slope[..., None] * diff, self.radial)

    def check(self) -> None:
        if self.is_identity:
            return
        axis = np.linspace(-1.0, 1.0, _FOLD_GRID_SIZE)
        yy, xx = np.meshgrid(axis, axis, indexing='ij')
        lattice = np.stack([xx.ravel(), yy.ravel()], axis=1)
        det = np.linalg.det(self.jacobian(lattice))
        if not np.all(det > 0):
            raise TransformError("Thin-plate transform folds on the unit square",
                                 min_jacobian=float(det.min()))

    def inverse(self) -> 'ThinPlateInverse':
        self.check()
        return ThinPlateInverse(self)


class ThinPlateInverse:
    """
    Exact inverse of a non-folding thin-plate transform, solved per point
    with Newton steps seeded from the spline fitted target -> source.
    """

    def __init__(self, forward: ThinPlateTransform):
        self.forward = forward
        self.seed = ThinPlateTransform(forward.target, forward.source)

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if self.forward.is_identity:
            return points.copy()
        guess = self.seed.apply(points)
        error = np.inf
        for _ in range(_INVERSE_ITERATIONS):
            residual = self.forward.apply(guess) - points
            error = float(np.abs(residual).max(initial=0.0))
            if error < _INVERSE_TOLERANCE:
                break
            try:
                step = np.linalg.solve(self.forward.jacobian(guess), residual[..., None])[..., 0]
            except np.linalg.LinAlgError as e:
                raise TransformError("Thin-plate Jacobian is singular", reason=str(e)) from e
            guess = guess - step
        if not error < _INVERSE_ACCEPT:
            raise TransformError("Thin-plate inverse did not converge", residual=error)
        return guess

    def inverse(self) -> ThinPlateTransform:
        return self.forward


Transform = Union[AffineTransform, ThinPlateTransform]


def warp_frame(frame: Tensor, transform: Transform) -> Tensor:
    """T(frame)(p) = frame(T^-1(p)), border-clamped."""
    channels, height, width = frame.shape
    inverse = transform.inverse()
    grid = planar_identity_grid(height, width).reshape(-1, 2)
    sample_at = inverse.apply(grid).reshape(height, width, 2)
    warped = grid_sample(reshape(frame, (channels, 1, height, width)), sample_at)
    return reshape(warped, (channels, height, width))


# ==================== LOSS TERMS ====================

def equivariance_loss(frame: Tensor, transform: Transform, extractor: ExtractorWeights,
                      downsample: int = Config.DEFAULT_DOWNSAMPLE) -> float:
    warped_kps = extract_keypoints(warp_frame(frame, transform), downsample, extractor)
    kps = extract_keypoints(frame, downsample, extractor)
    moved = transform.apply(kps.points[:, :2])
    return float(np.mean(np.abs(warped_kps.points[:, :2].astype(np.float64) - moved)))


def keypoint_prior_loss(kps: KeypointSet, tau: float = Config.KEYPOINT_PRIOR_TAU) -> float:
    points = kps.points.astype(np.float64)
    spread = 0.0
    for i, j in combinations(range(points.shape[0]), 2):
        distance = float(np.linalg.norm(points[i] - points[j]))
        spread += max(0.0, 2.0 * tau - distance) ** 2
    return spread + float(points[:, 2].mean()) ** 2


def _pool_cropped(image: Tensor, factor: int) -> Tensor:
    """Block mean over the largest region each block size divides."""
    height, width = image.shape[-2:]
    factor = max(1, min(factor, height, width))
    return avg_pool(image[..., :height - height % factor, :width - width % factor], factor)


def perceptual_loss(a: Tensor, b: Tensor, feature_hook: Optional[FeatureHook] = None) -> float:
    """
    Scale-averaged mean absolute difference; `feature_hook` maps images to
    features. Coarse scales drop the trailing rows and columns a block
    does not cover; images smaller than a block pool over the whole frame.
    """
    if a.shape != b.shape:
        raise ShapeError("Images must share a shape", axis='image', expected=a.shape, actual=b.shape)
    per_scale = []
    for factor in (1, 2, 4):
        sa, sb = _pool_cropped(a, factor), _pool_cropped(b, factor)
        if feature_hook is not None:
            sa, sb = feature_hook(sa), feature_hook(sb)
        per_scale.append(np.mean(np.abs(sa.astype(np.float64) - sb.astype(np.float64))))
    return float(np.mean(per_scale))


def adversarial_loss_value(fake_logits: Tensor) -> float:
    logits = np.asarray(fake_logits, dtype=np.float64)
    return float(np.mean((logits - 1.0) ** 2))


def vertex_loss(pred: VertexSet, ref: VertexSet) -> float:
    if pred.coords.shape != ref.coords.shape:
        raise ShapeError("Vertex counts differ", axis='vertices',
                         expected=ref.coords.shape, actual=pred.coords.shape)
    return float(np.mean(np.abs(pred.coords.astype(np.float64) - ref.coords.astype(np.float64))))


# ==================== TOTAL ====================

@dataclass(frozen=True)
class LossBreakdown:
    equ: float
    kp: float
    per: float
    adv: float
    ver: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        data = asdict(self)
        data['weights'] = dict(zip(('equ', 'kp', 'per', 'adv', 'ver'), Config.LOSS_WEIGHTS))
        return data

    @property
    def terms(self) -> Tuple[float, float, float, float, float]:
        return self.equ, self.kp, self.per, self.adv, self.ver

    @classmethod
    def mean(cls, breakdowns: Sequence['LossBreakdown']) -> 'LossBreakdown':
        """Term-wise mean, recombined with the same weights."""
        if not breakdowns:
            raise ConfigError("No loss breakdowns to average")
        return total_loss(*np.mean([b.terms for b in breakdowns], axis=0))


def total_loss(equ: float, kp: float, per: float, adv: float, ver: float) -> LossBreakdown:
    terms = (equ, kp, per, adv, ver)
    total = 0.0
    for weight, term in zip(Config.LOSS_WEIGHTS, terms):
        total = total + weight * term
    return LossBreakdown(*(float(t) for t in terms), total=float(total))


def evaluate_losses(frame: Tensor, reconstructed: Tensor, transform: Transform,
                    extractor: ExtractorWeights, kps: KeypointSet,
                    fake_logits: Optional[Tensor], pred_vertices: VertexSet, ref_vertices: VertexSet,
                    downsample: int = Config.DEFAULT_DOWNSAMPLE) -> LossBreakdown:
    """
    All five terms for one frame, combined. Without discriminator logits
    the adversarial term is 0.
    """
    return total_loss(
        equivariance_loss(frame, transform, extractor, downsample),
        keypoint_prior_loss(kps),
        perceptual_loss(as_tensor(frame), as_tensor(reconstructed)),
        adversarial_loss_value(fake_logits) if fake_logits is not None else 0.0,
        vertex_loss(pred_vertices, ref_vertices),
    )
