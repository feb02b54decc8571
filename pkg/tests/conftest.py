"""Shared benchmark systems and the seeded random-system factory."""

import numpy as np
import pytest

from hypoheat import HypoheatError, LinearSystem, validate_system


@pytest.fixture(scope="session")
def double_integrator() -> LinearSystem:
    # x1' = u, x2' = x1: one controlled direction, one bracket direction
    return validate_system([[0.0, 0.0], [1.0, 0.0]], [[1.0], [0.0]])


@pytest.fixture(scope="session")
def scalar_ou() -> LinearSystem:
    # dx = x dt + dw
    return validate_system([[1.0]], [[1.0]])


@pytest.fixture(scope="session")
def elliptic3() -> LinearSystem:
    # A = 0, B = I: plain Brownian motion in R^3
    return validate_system(np.zeros((3, 3)), np.eye(3))


@pytest.fixture(scope="session")
def chain3() -> LinearSystem:
    # length-3 integrator chain: step 3, decay exponent 1 + 3 + 5 = 9
    return validate_system(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [[1.0], [0.0], [0.0]]
    )


@pytest.fixture(scope="session")
def affine_ou() -> LinearSystem:
    # dx = (x - 1) dt + dw: equilibrium shifted to x = 1
    return validate_system([[1.0]], [[1.0]], alpha=[-1.0])


def random_controllable(rng: np.random.Generator, n_max: int = 5) -> LinearSystem:
    """One random controllable system, entries U[-1, 1], resampled until the
    rank condition holds."""
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(1, n + 1))
    while True:
        A = rng.uniform(-1.0, 1.0, (n, n))
        B = rng.uniform(-1.0, 1.0, (n, k))
        try:
            return validate_system(A, B)
        except HypoheatError:
            continue


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20260816)
