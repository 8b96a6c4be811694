"""
Sparse2Dense - Test Configuration
Pytest configuration and fixtures.
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from src.config import CodecConfig
from src.modules.keypoint_extractor import KeypointSet
from src.modules.tensor_core import as_tensor


@pytest.fixture(scope='session')
def project_root():
    """Get project root directory."""
    return Path(__file__).parent.parent


@pytest.fixture(scope='session')
def tiny_config():
    """Narrow networks over 32x32 frames: every pooling level divides evenly."""
    return CodecConfig(
        depth=2,
        extractor_base=4,
        texture_hidden=4,
        texture_channels=2,
        motion_base=4,
        generator_hidden=4,
        res_bottleneck=4,
        workers=2,
    ).validate()


@pytest.fixture(scope='session')
def tiny_models(tiny_config):
    """Seed-0 weights for every network of the tiny configuration."""
    from src.modules.codec_pipeline import CodecModels
    return CodecModels.seeded(tiny_config, seed=0)


@pytest.fixture(scope='session')
def tiny_bundle(tiny_config):
    from src.modules.codec_pipeline import build_weights
    return build_weights(tiny_config, seed=0)


def make_frames(count, size=32, seed=0):
    """Smooth moving blobs on a gradient, [3, size, size] each."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing='ij')
    base = np.stack([xx, yy, 0.5 * (xx + yy)])
    centers = rng.uniform(0.3, 0.7, size=(2,))
    frames = []
    for t in range(count):
        cx = centers[0] + 0.1 * np.sin(0.3 * t)
        cy = centers[1] + 0.1 * np.cos(0.2 * t)
        blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / 0.02)
        frames.append(as_tensor(np.clip(0.6 * base + 0.4 * blob[None], 0.0, 1.0)))
    return frames


@pytest.fixture
def frames():
    """Five synthetic 32x32 frames."""
    return make_frames(5)


def random_keypoints(rng, k=15):
    return KeypointSet(rng.uniform(-1.0, 1.0, size=(k, 3)))


@pytest.fixture(scope='session')
def frame_factory():
    return make_frames


@pytest.fixture
def keypoint_factory():
    return random_keypoints


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ==================== MARKERS ====================

def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line(
        "markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')"
    )
    config.addinivalue_line(
        "markers", "integration: marks tests as integration tests"
    )


# ==================== HOOKS ====================

def pytest_collection_modifyitems(config, items):
    """Modify test collection."""
    for item in items:
        if 'integration' in item.nodeid:
            item.add_marker(pytest.mark.integration)
