import numpy as np
import pytest

from geometry.schemas import PrimitiveType
from network.schemas import ModelConfig
from scene.generator import generate_shape
from scene.schemas import ShapeSpec


@pytest.fixture
def tiny_config() -> ModelConfig:
    return ModelConfig(patches=8, patch_size=4, proxies=4, width=8, layers=1, heads=2, seed=0)


@pytest.fixture(scope="session")
def box_cloud():
    return generate_shape(ShapeSpec(primitive_count_range=(6, 6), type_mix={PrimitiveType.PLANE: 1.0},
                                    point_count=512, seed=0))


@pytest.fixture(scope="session")
def mixed_cloud():
    return generate_shape(ShapeSpec(point_count=1024, seed=3))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
