import numpy as np
import pytest

from lgekf.groups import SE23, SO3, VectorGroup, ins_group

GROUP_FACTORIES = {
    "SO3": SO3,
    "SE23": SE23,
    "R3": lambda: VectorGroup(3),
    "INS": ins_group,
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=list(GROUP_FACTORIES), ids=list(GROUP_FACTORIES))
def group(request):
    return GROUP_FACTORIES[request.param]()


def random_rotation(rng, max_angle=np.pi * 0.9):
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle)
    return SO3().exp(axis * angle)
