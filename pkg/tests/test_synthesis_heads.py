"""
Sparse2Dense - Synthesis Heads Tests
Unit tests for texture encoding, refinement, frame generation and the vertex head.
"""

import time
import pytest
from pathlib import Path
import sys

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from src.config import GeneratorTopology, VertexHeadTopology
from src.modules.errors import ConfigError, ShapeError, TopologyError
from src.modules.synthesis_heads import (
    GeneratorWeights, VertexHeadWeights, VertexSet, encode_texture, generate_frame,
    predict_vertices, refine_feature,
)
from src.modules.tensor_core import as_tensor, full, identity_grid, zeros
from src.modules.weights import init_weights, zero_weights


def vertex_head(channels, res_blocks=3, seed=0, zero=False):
    topology = VertexHeadTopology(channels=channels, res_blocks=res_blocks, bottleneck_channels=16)
    specs = VertexHeadWeights.specs(topology)
    bundle = zero_weights(specs) if zero else init_weights(specs, seed)
    return VertexHeadWeights.from_bundle(bundle, topology)


class TestVertexSet:
    """Tests for the VertexSet value type."""

    def test_shape_enforced(self):
        """Only [10475, 2] is a vertex set."""
        with pytest.raises(ShapeError):
            VertexSet(np.zeros((10474, 2)))
        assert VertexSet(np.zeros((10475, 2))).coords.shape == (10475, 2)


class TestTexture:
    """Tests for the texture encoder and feature refinement."""

    def test_texture_shape(self, tiny_models, frames):
        """[3, 32, 32] becomes [C, D, 8, 8] after two levels."""
        config = tiny_models.config
        texture = encode_texture(frames[0], tiny_models.texture)
        assert texture.shape == (config.texture_channels, config.depth, 8, 8)

    def test_texture_needs_divisible_frame(self, tiny_models):
        """A 30-pixel side cannot be pooled twice."""
        with pytest.raises(ShapeError) as exc:
            encode_texture(zeros((3, 30, 32)), tiny_models.texture)
        assert exc.value.axis == 'height'

    def test_identity_flow_averages_depth(self, rng):
        """Identity warp with an all-ones occlusion map is the depth mean."""
        texture = as_tensor(rng.standard_normal((2, 3, 4, 4)))
        refined = refine_feature(texture, identity_grid(3, 4, 4), full((1, 4, 4), 1.0))
        np.testing.assert_allclose(refined, texture.astype(np.float64).mean(axis=1), atol=1e-6)

    def test_zero_occlusion_blanks_feature(self, rng):
        """A fully occluded map gates everything to zero."""
        texture = as_tensor(rng.standard_normal((2, 3, 4, 4)))
        refined = refine_feature(texture, identity_grid(3, 4, 4), zeros((1, 4, 4)))
        assert refined.shape == (2, 4, 4)
        assert not np.any(refined)

    def test_linear_in_occlusion(self, rng):
        """Gating is a Hadamard product, so refinement is linear in the occlusion map."""
        texture = as_tensor(rng.standard_normal((2, 3, 4, 4)))
        grid = identity_grid(3, 4, 4)
        flow = as_tensor(np.clip(grid + 0.2 * rng.standard_normal(grid.shape), -1.0, 1.0))
        a = as_tensor(rng.uniform(0.0, 1.0, size=(1, 4, 4)))
        b = as_tensor(rng.uniform(0.0, 1.0, size=(1, 4, 4)))
        combined = refine_feature(texture, flow, as_tensor(0.3 * a + 0.7 * b))
        expected = (0.3 * refine_feature(texture, flow, a).astype(np.float64)
                    + 0.7 * refine_feature(texture, flow, b).astype(np.float64))
        np.testing.assert_allclose(combined, expected, atol=1e-5)

    def test_occlusion_shape_checked(self, rng):
        """Occlusion must be [1, H, W]."""
        texture = as_tensor(rng.standard_normal((2, 3, 4, 4)))
        with pytest.raises(ShapeError):
            refine_feature(texture, identity_grid(3, 4, 4), full((2, 4, 4), 1.0))


class TestGenerator:
    """Tests for the frame generator."""

    def test_output_shape_and_range(self, tiny_models, rng):
        """[C, 8, 8] features decode to a [3, 32, 32] frame in [0, 1]."""
        refined = as_tensor(rng.standard_normal((tiny_models.config.texture_channels, 8, 8)))
        frame = generate_frame(refined, tiny_models.generator)
        assert frame.shape == (3, 32, 32)
        assert frame.min() >= 0.0 and frame.max() <= 1.0

    def test_zero_weights_give_mid_gray(self, rng):
        """sigmoid(0) everywhere."""
        topology = GeneratorTopology(in_channels=2, hidden_channels=4, levels=1)
        weights = GeneratorWeights.from_bundle(zero_weights(GeneratorWeights.specs(topology)),
                                               topology)
        frame = generate_frame(as_tensor(rng.standard_normal((2, 4, 4))), weights)
        assert frame.shape == (3, 8, 8)
        assert np.all(frame == 0.5)


class TestVertexHead:
    """Tests for vertex regression."""

    def test_vertex_shape_and_range(self, rng):
        """Outputs are [10475, 2] in [0, 1]."""
        vertices = predict_vertices(as_tensor(rng.standard_normal((8, 6, 6))), vertex_head(8))
        assert vertices.coords.shape == (10475, 2)
        assert vertices.coords.min() >= 0.0 and vertices.coords.max() <= 1.0

    def test_zero_weights_give_half(self, rng):
        """All-zero weights regress every coordinate to 0.5."""
        vertices = predict_vertices(as_tensor(rng.standard_normal((8, 6, 6))),
                                    vertex_head(8, zero=True))
        assert np.all(vertices.coords == 0.5)

    def test_spatial_shuffle_invariance(self, rng):
        """Pointwise ResBlocks plus global pooling ignore pixel order."""
        weights = vertex_head(8, seed=3)
        feature = rng.standard_normal((8, 6, 6))
        flat = feature.reshape(8, -1)
        shuffled = flat[:, rng.permutation(36)].reshape(8, 6, 6)
        a = predict_vertices(as_tensor(feature), weights)
        b = predict_vertices(as_tensor(shuffled), weights)
        np.testing.assert_allclose(a.coords, b.coords, atol=1e-6)

    def test_no_res_blocks(self, rng):
        """Zero ResBlocks is a valid head."""
        vertices = predict_vertices(as_tensor(rng.standard_normal((4, 4, 4))),
                                    vertex_head(4, res_blocks=0))
        assert vertices.coords.shape == (10475, 2)

    def test_wrong_vertex_count(self):
        """The FC layer must produce 20950 values."""
        topology = VertexHeadTopology(channels=4, res_blocks=0, num_vertices=100)
        bundle = zero_weights(VertexHeadWeights.specs(topology))
        with pytest.raises(ConfigError):
            VertexHeadWeights.from_bundle(bundle, topology)

    def test_missing_fc_tensor(self):
        """A bundle without the FC layer names it."""
        topology = VertexHeadTopology(channels=4, res_blocks=0)
        specs = [s for s in VertexHeadWeights.specs(topology) if s.name != 'vertex.fc.bias']
        with pytest.raises(TopologyError) as exc:
            VertexHeadWeights.from_bundle(zero_weights(specs), topology)
        assert exc.value.tensor == 'vertex.fc.bias'

    @pytest.mark.slow
    def test_latency(self, rng):
        """C = 64, 64x64 feature: median pass under 10 ms (hardware dependent)."""
        weights = vertex_head(64)
        feature = as_tensor(rng.standard_normal((64, 64, 64)))
        predict_vertices(feature, weights)
        timings = []
        for _ in range(15):
            start = time.perf_counter()
            predict_vertices(feature, weights)
            timings.append(time.perf_counter() - start)
        assert float(np.median(timings)) < 0.010


class TestSynthesisHeads:
    """Tests for the bundled heads."""

    def test_synthesize(self, tiny_models, frames):
        """Identity motion yields a frame and, on request, vertices."""
        config = tiny_models.config
        heads = tiny_models.heads()
        texture = heads.encode_texture(frames[0])
        flow = identity_grid(config.depth, 8, 8)
        frame, vertices = heads.synthesize(texture, flow, full((1, 8, 8), 1.0))
        assert frame.shape == (3, 32, 32)
        assert vertices.coords.shape == (10475, 2)
        _, none = heads.synthesize(texture, flow, full((1, 8, 8), 1.0), with_vertices=False)
        assert none is None


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
