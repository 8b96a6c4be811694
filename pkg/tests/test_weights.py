"""
Sparse2Dense - Weights Tests
Unit tests for the S2DW weight bundle and weight initialization.
"""

import struct
import pytest
from pathlib import Path
import sys

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from src.modules.codec_pipeline import build_weights, model_specs
from src.modules.errors import TopologyError, WeightFileError
from src.modules.validator import TensorSpec
from src.modules.weights import WeightBundle, init_weights, zero_weights


def record(name: str, dims, values) -> bytes:
    encoded = name.encode('utf-8')
    out = struct.pack('<H', len(encoded)) + encoded + struct.pack('<B', len(dims))
    out += struct.pack(f'<{len(dims)}I', *dims)
    return out + np.asarray(values, dtype='<f4').tobytes()


class TestBundle:
    """Tests for WeightBundle access."""

    def test_get_checks_shape(self):
        bundle = WeightBundle({"a.weight": np.zeros((2, 3))})
        assert bundle.get("a.weight", (2, 3)).shape == (2, 3)
        with pytest.raises(TopologyError):
            bundle.get("a.weight", (3, 2))

    def test_missing_tensor_named(self):
        with pytest.raises(TopologyError) as exc:
            WeightBundle().get("missing.weight")
        assert exc.value.tensor == "missing.weight"

    def test_tensors_are_read_only(self):
        bundle = WeightBundle({"a": np.zeros(3)})
        with pytest.raises(ValueError):
            bundle.get("a")[0] = 1.0

    def test_names_and_parameter_count(self):
        bundle = WeightBundle({"y.b": np.ones(2), "x.a": np.zeros(1)})
        assert bundle.names() == ["x.a", "y.b"]
        assert bundle.parameter_count == 3


class TestSerialization:
    """Tests for the S2DW byte layout."""

    def test_layout(self):
        """Magic, version, then name-sorted records."""
        bundle = WeightBundle({"b": np.array([1.0]), "a": np.array([[2.0, 3.0]])})
        expected = (b"S2DW" + b"\x01" + record("a", (1, 2), [2.0, 3.0])
                    + record("b", (1,), [1.0]))
        assert bundle.to_bytes() == expected

    def test_round_trip(self, tmp_path):
        bundle = init_weights([TensorSpec("c.weight", (2, 1, 3, 3)), TensorSpec("c.bias", (2,))], 1)
        loaded = WeightBundle.load(bundle.save(tmp_path / "w.s2dw"))
        assert loaded.names() == bundle.names()
        for name in bundle:
            assert np.array_equal(loaded.get(name), bundle.get(name))

    def test_bad_magic(self):
        with pytest.raises(WeightFileError):
            WeightBundle.from_bytes(b"XXXX\x01")

    def test_bad_version(self):
        with pytest.raises(WeightFileError):
            WeightBundle.from_bytes(b"S2DW\x09")

    def test_truncated_payload(self):
        data = b"S2DW\x01" + record("a", (4,), [0.0] * 4)
        with pytest.raises(WeightFileError):
            WeightBundle.from_bytes(data[:-2])

    def test_duplicate_name(self):
        data = b"S2DW\x01" + record("a", (1,), [0.0]) + record("a", (1,), [1.0])
        with pytest.raises(WeightFileError):
            WeightBundle.from_bytes(data)

    def test_zero_dim(self):
        data = b"S2DW\x01" + record("a", (0,), [])
        with pytest.raises(WeightFileError):
            WeightBundle.from_bytes(data)

    def test_non_finite(self):
        data = b"S2DW\x01" + record("a", (2,), [0.0, float('inf')])
        with pytest.raises(WeightFileError):
            WeightBundle.from_bytes(data)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(WeightFileError):
            WeightBundle.load(tmp_path / "absent.s2dw")


class TestInitialization:
    """Tests for seeded and zero initialization."""

    def test_seeded_is_reproducible(self):
        specs = [TensorSpec("n.weight", (8, 4, 3, 3)), TensorSpec("n.bias", (8,))]
        a, b = init_weights(specs, 5), init_weights(specs, 5)
        assert np.array_equal(a.get("n.weight"), b.get("n.weight"))
        assert not np.any(a.get("n.bias"))
        assert not np.array_equal(a.get("n.weight"), init_weights(specs, 6).get("n.weight"))

    def test_he_scale(self):
        """Standard deviation close to sqrt(2 / fan_in)."""
        weight = init_weights([TensorSpec("n.weight", (256, 16, 3, 3))], 0).get("n.weight")
        assert float(weight.std()) == pytest.approx(np.sqrt(2.0 / 144), rel=0.05)

    def test_zero_weights(self):
        bundle = zero_weights([TensorSpec("n.weight", (2, 2))])
        assert not np.any(bundle.get("n.weight"))

    def test_build_weights_covers_every_network(self, tiny_config):
        """The full bundle satisfies every TensorSpec the pipeline reads."""
        bundle = build_weights(tiny_config, seed=0)
        specs = model_specs(tiny_config)
        assert len(bundle) == len(specs)
        assert bundle.require(specs).is_valid


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
