import numpy as np
import pytest

from synthesis.generator import generate_scene
from synthesis.models import EulerAngles, GenerationConfig, Intrinsics, MotionSE3

STATIC_CONFIG = GenerationConfig(
    object_count_range=(0, 0), camera_rotation=0.03, camera_translation=0.03
)
MOVER_CONFIG = GenerationConfig(
    object_count_range=(1, 3), camera_rotation=0.05, camera_translation=0.2
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def intrinsics():
    return Intrinsics(fx=60.0, fy=55.0, cx=31.5, cy=30.0)


@pytest.fixture
def small_motion():
    return MotionSE3(EulerAngles(0.02, -0.015, 0.01), (0.05, -0.03, 0.08))


@pytest.fixture
def static_scene():
    return generate_scene(11, 48, 48, STATIC_CONFIG)


@pytest.fixture
def mover_scene():
    return generate_scene(5, 48, 48, MOVER_CONFIG)
