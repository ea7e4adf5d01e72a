"""Shared chart and morphism fixtures for the test suite."""

import pytest

from algebroids.fixtures import resolve_fixture
from algebroids.sampling import sample_points


@pytest.fixture(scope="session")
def tangent_r2():
    return resolve_fixture("tangent_r2")


@pytest.fixture(scope="session")
def so3():
    return resolve_fixture("so3")


@pytest.fixture(scope="session")
def so3_double():
    return resolve_fixture("so3_double")


@pytest.fixture(scope="session")
def solvable2d():
    return resolve_fixture("solvable2d")


@pytest.fixture(scope="session")
def action_x():
    return resolve_fixture("action_x")


@pytest.fixture(scope="session")
def chain():
    return resolve_fixture("chain")


@pytest.fixture(scope="session")
def sl2aff():
    return resolve_fixture("sl2aff")


@pytest.fixture(scope="session")
def sa3():
    return resolve_fixture("sa3")


@pytest.fixture(scope="session")
def broken_jacobi():
    return resolve_fixture("broken_jacobi")


@pytest.fixture(scope="session")
def line_points():
    return sample_points(1, 100, 42)


@pytest.fixture(scope="session")
def plane_points():
    return sample_points(2, 100, 42)
