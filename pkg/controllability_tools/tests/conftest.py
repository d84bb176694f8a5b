import pytest

from controllability_tools.structmat import FieldConfig
from controllability_tools.sysmodel import free_parameter_system
from helpers import digraph


@pytest.fixture
def cfg():
    return FieldConfig(seed=1)


@pytest.fixture
def chain():
    """Free system on 0 -> 1 -> 2."""
    return free_parameter_system(digraph(3, [(0, 1), (1, 2)]))


@pytest.fixture
def star():
    """Free system with center 0 feeding three leaves."""
    return free_parameter_system(digraph(4, [(0, 1), (0, 2), (0, 3)]))


@pytest.fixture
def cycle4():
    return free_parameter_system(digraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)]))
