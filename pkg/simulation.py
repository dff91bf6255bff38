"""
Synthetic matched and anomaly problems.

Matched setting: Y has rows drawn from N(5 * 1, I); modality i sees
Y + E_i with E_i uniform on [-z/50, z/50], z = max(Y) - min(Y).

Anomaly setting: as above, but the last modality sees Z + E_m where the
first ``n_anomalies`` rows of Z are replaced by draws from N(8 * 1, 2 I).
Draws happen in the same order in both settings, so one seed gives both
settings the same Y and jitter.
"""

import logging
from typing import List, Tuple

import numpy as np

from embed_core import OmnibusProblem
from errors import InputValidationError
from matrix_core import euclidean_distance_matrix

# Set up logging
logger = logging.getLogger(__name__)

BASE_MEAN = 5.0
ANOMALY_MEAN = 8.0
ANOMALY_VARIANCE = 2.0
JITTER_FRACTION = 1.0 / 50.0


def _check_sizes(n: int, m: int, dim: int) -> None:
    if n < 2 or m < 1 or dim < 1:
        raise InputValidationError(f"need n >= 2, m >= 1, dim >= 1; got n={n}, m={m}, dim={dim}")


def point_clouds(n: int, m: int, dim: int = 2, seed: int = 0, n_anomalies: int = 0) -> List[np.ndarray]:
    """
    The m jittered point clouds behind the synthetic problems.

    Args:
        n (int): Objects
        m (int): Modalities
        dim (int): Ambient dimension of the latent points
        seed (int): Seed for ``numpy.random.default_rng``
        n_anomalies (int): Rows of the last modality replaced by anomalous draws

    Returns:
        List[np.ndarray]: m arrays of shape (n, dim)
    """
    _check_sizes(n, m, dim)
    if not 0 <= n_anomalies <= n:
        raise InputValidationError(f"n_anomalies must be between 0 and {n}, got {n_anomalies}")

    rng = np.random.default_rng(seed)
    Y = rng.normal(BASE_MEAN, 1.0, size=(n, dim))
    half_width = (Y.max() - Y.min()) * JITTER_FRACTION
    jitter = [rng.uniform(-half_width, half_width, size=(n, dim)) for _ in range(m)]

    clouds = [Y + E for E in jitter]
    if n_anomalies:
        Z = Y.copy()
        Z[:n_anomalies] = rng.normal(ANOMALY_MEAN, np.sqrt(ANOMALY_VARIANCE), size=(n_anomalies, dim))
        clouds[-1] = Z + jitter[-1]
    return clouds


def generate_matched(n: int, m: int, dim: int = 2, seed: int = 0) -> Tuple[OmnibusProblem, np.ndarray]:
    """
    Matched Gaussian-jitter problem.

    Returns:
        Tuple[OmnibusProblem, np.ndarray]: The problem and the ground-truth
            cluster label of every embedded point (object id, tiled over m)
    """
    clouds = point_clouds(n, m, dim, seed)
    problem = OmnibusProblem.from_matrices([euclidean_distance_matrix(Y) for Y in clouds])
    logger.debug(f"generated matched problem n={n}, m={m}, dim={dim}, seed={seed}")
    return problem, np.tile(np.arange(n), m)


def generate_anomaly(
    n: int, m: int, n_anomalies: int = 10, dim: int = 2, seed: int = 0
) -> Tuple[OmnibusProblem, np.ndarray]:
    """
    Anomaly problem: the last modality misplaces the first ``n_anomalies`` objects.

    Returns:
        Tuple[OmnibusProblem, np.ndarray]: The problem and the 0-based
            anomalous object indices
    """
    clouds = point_clouds(n, m, dim, seed, n_anomalies)
    problem = OmnibusProblem.from_matrices([euclidean_distance_matrix(Y) for Y in clouds])
    logger.debug(f"generated anomaly problem n={n}, m={m}, n_anomalies={n_anomalies}, seed={seed}")
    return problem, np.arange(n_anomalies)
