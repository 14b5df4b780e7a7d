"""Shared fixtures: the two preset groups and a trivial group."""

import pytest

from thinsieve.lattice import Mat2, Triple
from thinsieve.orbit import GroupPresentation

BASE_POINT = Triple(3, 4, 5)


@pytest.fixture
def full_orbit() -> GroupPresentation:
    """Spin image of <S, T²>: every primitive triple with even y."""
    return GroupPresentation.from_sl2(
        [Mat2(0, -1, 1, 0), Mat2(1, 2, 0, 1)], BASE_POINT, "full-orbit"
    )


@pytest.fixture
def schottky() -> GroupPresentation:
    """Two hyperbolic generators with disjoint isometric circles."""
    return GroupPresentation.from_sl2(
        [Mat2(3, 2, 4, 3), Mat2(5, 12, 2, 5)], BASE_POINT, "schottky-demo"
    )


@pytest.fixture
def trivial() -> GroupPresentation:
    return GroupPresentation.trivial(BASE_POINT)
