"""
Starting configurations for the JOFC solvers.

- ``cmds``: classical (Torgerson) MDS of one dissimilarity matrix.
- ``averaged_procrustes_init``: cMDS of the modality average, then each
  modality's own cMDS rotated onto it. Needs only n x n work.
- ``imputed_omnibus_init``: cMDS of the mn x mn omnibus with missing
  cross-modality entries imputed as (Delta_i + Delta_j) / 2.
"""

import logging

import numpy as np
from scipy import linalg as sla

from embed_core import Configuration, OmnibusProblem
from errors import InputValidationError, NumericalError
from matrix_core import check_dense_size, double_center, symmetric_top_eigenpairs

# Set up logging
logger = logging.getLogger(__name__)


def _center(X: np.ndarray) -> np.ndarray:
    return X - X.mean(axis=0, keepdims=True)


def cmds(delta: np.ndarray, d: int) -> np.ndarray:
    """
    Classical MDS embedding of a dissimilarity matrix.

    Squares the entries, double-centers, takes the top ``d`` eigenpairs and
    scales each eigenvector by the square root of its eigenvalue, clamped
    at zero.

    Args:
        delta (np.ndarray): n x n symmetric, hollow dissimilarities
        d (int): Embedding dimension, 1 <= d <= n

    Returns:
        np.ndarray: n x d configuration with zero column means

    Raises:
        InputValidationError: If ``d`` is out of range
    """
    delta = np.asarray(delta, dtype=float)
    n = delta.shape[0]
    if not 1 <= d <= n:
        raise InputValidationError(f"cMDS dimension must satisfy 1 <= d <= {n}, got {d}")

    pairs = symmetric_top_eigenpairs(double_center(delta ** 2), d)
    scales = np.sqrt(np.clip([pair.value for pair in pairs], 0.0, None))
    if np.any(scales == 0):
        logger.debug(f"cMDS: {int(np.sum(scales == 0))} of {d} directions have nonpositive eigenvalues")
    X = np.column_stack([pair.vector for pair in pairs]) * scales
    return _center(X)


def orthogonal_procrustes(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """
    Rotate (or reflect) ``source`` onto ``target``.

    Both inputs are centered first. The returned configuration is the
    centered source times the orthogonal matrix R minimizing
    ||source R - target||_F.
    """
    source = _center(np.asarray(source, dtype=float))
    target = _center(np.asarray(target, dtype=float))
    if source.shape != target.shape:
        raise InputValidationError(f"Procrustes shapes differ: {source.shape} vs {target.shape}")
    try:
        rotation, _ = sla.orthogonal_procrustes(source, target)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Procrustes SVD failed: {e}") from e
    return source @ rotation


def averaged_procrustes_init(problem: OmnibusProblem, d: int) -> Configuration:
    """
    Average-then-align initialization.

    xi_0 = cMDS of mean(Delta_i); block i = Procrustes fit of cMDS(Delta_i)
    onto xi_0.
    """
    reference = cmds(np.mean(problem.stacked(), axis=0), d)
    blocks = [orthogonal_procrustes(cmds(delta, d), reference) for delta in problem.modalities]
    logger.debug(f"averaged Procrustes init built for m={problem.m}, n={problem.n}, d={d}")
    return Configuration.from_blocks(blocks)


def imputed_omnibus(problem: OmnibusProblem) -> np.ndarray:
    """
    The mn x mn omnibus with missing entries imputed.

    Off-diagonal block (i, j) is (Delta_i + Delta_j) / 2 with a zero
    diagonal for the matched pairs.
    """
    n, m = problem.n, problem.m
    check_dense_size(m * n, "imputed omnibus")
    omnibus = np.zeros((m * n, m * n))
    for i in range(m):
        for j in range(m):
            # hollow inputs keep the matched diagonal of every off-block at 0
            block = problem.modalities[i] if i == j else 0.5 * (problem.modalities[i] + problem.modalities[j])
            omnibus[i * n:(i + 1) * n, j * n:(j + 1) * n] = block
    return omnibus


def imputed_omnibus_init(problem: OmnibusProblem, d: int) -> Configuration:
    """cMDS of the imputed omnibus, split into m blocks, each block centered."""
    blocks = Configuration.from_stacked(cmds(imputed_omnibus(problem), d), problem.m).blocks
    return Configuration.from_blocks([_center(block) for block in blocks])
