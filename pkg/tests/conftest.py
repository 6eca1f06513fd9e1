import numpy as np
import pytest

from relpose.geometry import RelativePose, random_rotation, unit


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_pose(rng) -> RelativePose:
    return RelativePose(random_rotation(rng), unit(rng.standard_normal(3)))
