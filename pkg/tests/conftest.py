from fractions import Fraction

import pytest

from rwcre.cooling import CoolingSchedule
from rwcre.env import ResamplingRule


@pytest.fixture
def two_point():
    return ResamplingRule.two_point()


@pytest.fixture
def squares():
    return CoolingSchedule.explicit([k * k for k in range(1, 40)])


@pytest.fixture
def drifted():
    return ResamplingRule.finite_support([Fraction(1, 4), Fraction(1, 2)], [Fraction(1, 2)] * 2)
