"""
Shared fixtures for the JOFC test suite.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add the repository root to Python path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from embed_core import Configuration, OmnibusProblem  # noqa: E402
from matrix_core import euclidean_distance_matrix  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240521)


def make_problem(rng: np.random.Generator, m: int, n: int, dim: int = 2, jitter: float = 0.3) -> OmnibusProblem:
    """Distances of m noisy copies of one random point cloud."""
    base = rng.normal(size=(n, dim))
    return OmnibusProblem.from_matrices(
        [euclidean_distance_matrix(base + jitter * rng.normal(size=(n, dim))) for _ in range(m)]
    )


def make_configuration(rng: np.random.Generator, m: int, n: int, d: int) -> Configuration:
    return Configuration(rng.normal(size=(m, n, d)))


@pytest.fixture
def small_problem(rng) -> OmnibusProblem:
    return make_problem(rng, m=3, n=6)
