"""
Dense symmetric linear algebra used by the JOFC solvers.

Distances, double centering, top eigenpairs and a brute-force
pseudoinverse. The pseudoinverse here is an oracle: the fast solver never
calls it, only the dense reference algorithm and the tests do.
"""

import logging
from typing import List, NamedTuple

import numpy as np
from scipy import linalg as sla
from scipy.spatial.distance import cdist

from config import config
from errors import InputValidationError, NumericalError, SizeCapExceededError

# Set up logging
logger = logging.getLogger(__name__)


class EigenPair(NamedTuple):
    """An eigenvalue with its unit-norm eigenvector."""

    value: float
    vector: np.ndarray


def check_dense_size(size: int, what: str = "dense matrix") -> None:
    """
    Guard against materializing an oversized dense matrix.

    Args:
        size (int): Order of the square matrix about to be built
        what (str): Description used in the error message

    Raises:
        SizeCapExceededError: If ``size`` exceeds ``JOFC_MAX_DENSE_SIZE``
    """
    cap = config.MAX_DENSE_SIZE
    if size > cap:
        raise SizeCapExceededError(size, cap, what)


def _require_square(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputValidationError(f"{name} must be square, got shape {M.shape}")
    return M


def euclidean_distance_matrix(X: np.ndarray) -> np.ndarray:
    """
    Pairwise Euclidean distances between the rows of ``X``.

    Args:
        X (np.ndarray): n x d configuration block

    Returns:
        np.ndarray: n x n symmetric, hollow, nonnegative distance matrix
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    D = cdist(X, X)
    np.fill_diagonal(D, 0.0)
    return D


def double_center(M: np.ndarray) -> np.ndarray:
    """
    Compute -1/2 (I - J/n) M (I - J/n).

    Args:
        M (np.ndarray): n x n symmetric matrix (typically squared dissimilarities)

    Returns:
        np.ndarray: The double-centered matrix; rows and columns sum to zero

    Raises:
        InputValidationError: If ``M`` is not square
    """
    M = _require_square(M)
    row_means = M.mean(axis=1, keepdims=True)
    col_means = M.mean(axis=0, keepdims=True)
    return -0.5 * (M - row_means - col_means + M.mean())


def _fix_sign(vector: np.ndarray) -> np.ndarray:
    # largest-magnitude component positive
    pivot = np.argmax(np.abs(vector))
    return -vector if vector[pivot] < 0 else vector


def symmetric_top_eigenpairs(S: np.ndarray, k: int) -> List[EigenPair]:
    """
    Return the ``k`` largest eigenpairs of a symmetric matrix.

    Eigenvectors follow a deterministic sign convention: the component of
    largest magnitude is positive.

    Args:
        S (np.ndarray): n x n symmetric matrix
        k (int): Number of eigenpairs, 1 <= k <= n

    Returns:
        List[EigenPair]: Pairs sorted by descending eigenvalue

    Raises:
        InputValidationError: If ``k`` is out of range
        NumericalError: If the eigensolver fails to converge
    """
    S = _require_square(S, "symmetric matrix")
    n = S.shape[0]
    if not 1 <= k <= n:
        raise InputValidationError(f"k must satisfy 1 <= k <= {n}, got {k}")

    try:
        values, vectors = sla.eigh(S, subset_by_index=[n - k, n - 1])
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Symmetric eigensolver failed on {n}x{n} matrix: {e}") from e

    order = np.argsort(values)[::-1]
    return [EigenPair(float(values[i]), _fix_sign(vectors[:, i])) for i in order]


def pseudoinverse_oracle(M: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """
    Moore-Penrose pseudoinverse of a symmetric matrix by full eigendecomposition.

    Eigenvalues with magnitude below ``rtol`` times the largest magnitude are
    treated as zero, so the numerically-zero eigenvalue of a Laplacian is
    never inverted.

    Args:
        M (np.ndarray): n x n symmetric matrix
        rtol (float): Relative cutoff for zero eigenvalues

    Returns:
        np.ndarray: Symmetric pseudoinverse of ``M``
    """
    M = _require_square(M)
    try:
        values, vectors = np.linalg.eigh(0.5 * (M + M.T))
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Eigendecomposition failed in pseudoinverse: {e}") from e

    cutoff = rtol * np.max(np.abs(values)) if values.size else 0.0
    inverted = np.zeros_like(values)
    keep = np.abs(values) > cutoff
    inverted[keep] = 1.0 / values[keep]

    P = (vectors * inverted) @ vectors.T
    return 0.5 * (P + P.T)
