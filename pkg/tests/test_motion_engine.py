"""
Sparse2Dense - Motion Engine Tests
Unit tests for sparse candidates, dense motion and flow composition.
"""

import json
import pytest
from pathlib import Path
import sys

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from src.modules.errors import ShapeError
from src.modules.keypoint_extractor import KeypointSet
from src.modules.motion_engine import (
    DenseMotionWeights, SparseMotionField, coarse_deform, compose_flow, dump_motion,
    estimate_motion, gaussian_heatmap, heatmap_difference, sparse_motion,
)
from src.modules.tensor_core import as_tensor, grid_sample, identity_grid, softmax_axis
from src.modules.weights import init_weights


def random_set(rng, k=15):
    return KeypointSet(rng.uniform(-1.0, 1.0, size=(k, 3)))


def random_texture(rng, config, size=8):
    return as_tensor(rng.standard_normal((config.texture_channels, config.depth, size, size)))


class TestHeatmaps:
    """Tests for Gaussian heatmaps and their differences."""

    def test_peak_at_keypoint(self):
        """A keypoint on a cell center scores 1 there."""
        kps = KeypointSet(np.array([[-0.75, 0.25, 0.0]]))
        heat = gaussian_heatmap(kps, (1, 4, 8), sigma2=0.01)
        assert heat.shape == (1, 1, 4, 8)
        assert heat[0, 0, 2, 1] == pytest.approx(1.0)
        assert heat.max() == heat[0, 0, 2, 1]

    def test_difference_of_same_sets_is_zero(self, rng):
        """No motion means no heatmap difference."""
        kps = random_set(rng)
        diff = heatmap_difference(kps, kps, (2, 8, 8), 0.01)
        assert not np.any(diff.values)

    def test_difference_range(self, rng):
        """Differences stay in [-1, 1]."""
        diff = heatmap_difference(random_set(rng), random_set(rng), (2, 8, 8), 0.01)
        assert np.abs(diff.values).max() <= 1.0

    def test_sigma_must_be_positive(self, rng):
        """sigma2 = 0 is invalid."""
        with pytest.raises(ShapeError):
            gaussian_heatmap(random_set(rng), (1, 4, 4), 0.0)

    def test_count_mismatch(self, rng):
        """Reference and inter sets must have the same K."""
        with pytest.raises(ShapeError):
            heatmap_difference(random_set(rng, 15), random_set(rng, 10), (1, 4, 4), 0.01)


class TestSparseMotion:
    """Tests for warp candidates."""

    def test_candidate_layout(self, rng):
        """Candidate 0 is the identity; candidate k shifts by ref - inter."""
        ref, inter = random_set(rng), random_set(rng)
        sparse = sparse_motion(ref, inter, (2, 4, 4))
        identity = identity_grid(2, 4, 4)
        assert sparse.candidates.shape == (16, 2, 4, 4, 3)
        assert np.array_equal(sparse.candidates[0], identity)
        shift = (ref.points[3] - inter.points[3]).astype(np.float32)
        np.testing.assert_allclose(sparse.candidates[4], identity + shift, atol=1e-6)


class TestComposeFlow:
    """Tests for mask-weighted flow composition."""

    def test_matches_loop_oracle(self):
        """100 random (mask, candidates) pairs against an explicit per-candidate sum."""
        for seed in range(100):
            rng = np.random.default_rng(seed)
            sparse = sparse_motion(random_set(rng), random_set(rng), (4, 16, 16))
            mask = softmax_axis(as_tensor(rng.standard_normal((16, 4, 16, 16))), axis=0)
            expected = np.zeros((4, 16, 16, 3))
            for k in range(16):
                expected += mask[k].astype(np.float64)[..., None] * sparse.candidates[k]
            np.testing.assert_allclose(compose_flow(mask, sparse), expected, atol=1e-6)

    def test_permutation_invariant(self, rng):
        """Permuting candidates and mask channels together leaves the flow unchanged."""
        sparse = sparse_motion(random_set(rng), random_set(rng), (2, 8, 8))
        mask = softmax_axis(as_tensor(rng.standard_normal((16, 2, 8, 8))), axis=0)
        order = rng.permutation(16)
        shuffled = SparseMotionField(as_tensor(sparse.candidates[order]))
        assert np.array_equal(compose_flow(mask, sparse),
                              compose_flow(as_tensor(mask[order]), shuffled))

    def test_shape_mismatch(self, rng):
        """K mask channels cannot weigh K + 1 candidates."""
        sparse = sparse_motion(random_set(rng), random_set(rng), (2, 8, 8))
        with pytest.raises(ShapeError):
            compose_flow(softmax_axis(as_tensor(np.zeros((15, 2, 8, 8))), axis=0), sparse)


class TestDenseMotion:
    """Tests for the dense motion network."""

    def test_zero_motion_is_identity(self, tiny_models, rng):
        """Equal keypoints give an identity flow and an exact warp."""
        config = tiny_models.config
        texture = random_texture(rng, config)
        kps = random_set(rng)
        motion = estimate_motion(texture, kps, kps, tiny_models.motion, config.sigma2)
        identity = identity_grid(config.depth, 8, 8)
        np.testing.assert_allclose(motion.flow, identity, atol=1e-5)
        assert np.array_equal(grid_sample(texture, motion.flow), texture)

    def test_mask_and_occlusion_ranges(self, tiny_models):
        """Masks sum to 1 per cell and occlusion stays in [0, 1]."""
        config = tiny_models.config
        for seed in range(5):
            rng = np.random.default_rng(seed)
            motion = estimate_motion(random_texture(rng, config), random_set(rng),
                                     random_set(rng), tiny_models.motion, config.sigma2)
            assert motion.mask.shape == (16, config.depth, 8, 8)
            np.testing.assert_allclose(motion.mask.astype(np.float64).sum(axis=0), 1.0, atol=1e-5)
            assert motion.occlusion.shape == (1, 8, 8)
            assert motion.occlusion.min() >= 0.0 and motion.occlusion.max() <= 1.0

    @pytest.mark.slow
    def test_mask_and_occlusion_ranges_over_weight_seeds(self, tiny_config):
        """The same contracts hold for 100 independently seeded motion networks."""
        topology = tiny_config.motion
        specs = DenseMotionWeights.specs(topology)
        for seed in range(100):
            weights = DenseMotionWeights.from_bundle(init_weights(specs, seed), topology)
            rng = np.random.default_rng(seed)
            motion = estimate_motion(random_texture(rng, tiny_config), random_set(rng),
                                     random_set(rng), weights, tiny_config.sigma2)
            np.testing.assert_allclose(motion.mask.astype(np.float64).sum(axis=0), 1.0, atol=1e-5)
            assert motion.mask.min() >= 0.0
            assert motion.occlusion.min() >= 0.0 and motion.occlusion.max() <= 1.0

    def test_texture_grid_mismatch(self, tiny_models, rng):
        """A texture of the wrong depth cannot be warped by the candidates."""
        config = tiny_models.config
        texture = random_texture(rng, config)
        sparse = sparse_motion(random_set(rng), random_set(rng), (config.depth + 1, 8, 8))
        with pytest.raises(ShapeError):
            coarse_deform(texture, sparse)


class TestDump:
    """Tests for raw motion dumps."""

    def test_dump_writes_planes_and_sidecar(self, tiny_models, rng, tmp_path):
        """Flow, occlusion and mask planes plus a JSON shape file."""
        config = tiny_models.config
        kps = random_set(rng)
        motion = estimate_motion(random_texture(rng, config), kps, kps,
                                 tiny_models.motion, config.sigma2)
        written = dump_motion(motion, tmp_path, "motion_00001")
        assert len(written) == 4
        flow_file = tmp_path / "motion_00001.flow.f32"
        assert flow_file.stat().st_size == motion.flow.size * 4
        sidecar = json.loads((tmp_path / "motion_00001.json").read_text())
        assert sidecar['shapes']['occlusion'] == [1, 8, 8]


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
