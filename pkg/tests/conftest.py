import numpy as np
import pytest

from uqbench.lowdisc import gaussian_plan


@pytest.fixture(scope="session")
def plan_1m_1d():
    return gaussian_plan(1, 10**6)


@pytest.fixture(scope="session")
def plan_1m_2d():
    return gaussian_plan(2, 10**6)
