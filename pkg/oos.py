"""
Out-of-sample JOFC: embed m new views of one object into a frozen configuration.

Only the new points y_1..y_m move. Point y_i sees the n in-sample points of
its own modality with weight 1 and the other new points with weight w, so
the new-point block of the Laplacian is L22 = (n + m w) I - w J and the
Guttman update costs O(m n d) per step.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.spatial.distance import cdist

from embed_core import Configuration
from errors import InputValidationError, NumericalError
from matrix_core import check_dense_size, pseudoinverse_oracle
from weights import UniformWeights, dense_weight_matrix

# Set up logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OosDissimilarity:
    """Dissimilarities from the new object to the n in-sample objects, one row per modality."""

    deltas: np.ndarray

    def __post_init__(self):
        deltas = np.array(self.deltas, dtype=float)
        if deltas.ndim != 2:
            raise InputValidationError(f"OOS dissimilarities must have shape (m, n), got {deltas.shape}")
        if not np.all(np.isfinite(deltas)):
            raise InputValidationError("OOS dissimilarities contain non-finite entries")
        if np.any(deltas < 0):
            i, j = np.argwhere(deltas < 0)[0]
            raise InputValidationError(f"negative OOS dissimilarity {deltas[i, j]} in modality {i}, object {j}")
        deltas.setflags(write=False)
        object.__setattr__(self, "deltas", deltas)

    @property
    def m(self) -> int:
        return self.deltas.shape[0]

    @property
    def n(self) -> int:
        return self.deltas.shape[1]


class OosOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    eps: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=1000, ge=1)
    min_iterations: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _iteration_bounds(self):
        if self.min_iterations > self.max_iterations:
            raise ValueError(
                f"min_iterations ({self.min_iterations}) exceeds max_iterations ({self.max_iterations})"
            )
        return self


@dataclass(frozen=True)
class OosResult:
    """Embedded new points (rows y_1..y_m) and the stress trace."""

    y: np.ndarray
    stress_trace: List[float]
    iterations: int
    terminated: Literal["converged", "max_iter"]
    elapsed_seconds: float = 0.0


def _as_deltas(deltas) -> OosDissimilarity:
    return deltas if isinstance(deltas, OosDissimilarity) else OosDissimilarity(deltas)


def _check(y: np.ndarray, X: Configuration, deltas: OosDissimilarity, w: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if deltas.m != X.m or deltas.n != X.n:
        raise InputValidationError(
            f"OOS dissimilarities are {deltas.m} x {deltas.n}, configuration has {X.m} blocks of {X.n} points"
        )
    if y.shape != (X.m, X.d):
        raise InputValidationError(f"new points must have shape {(X.m, X.d)}, got {y.shape}")
    if w <= 0:
        raise InputValidationError(f"commensurability weight must be positive, got {w}")
    return y


def _geometry(y: np.ndarray, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # x_il - y_i, shape (m, n, d), and the (m, n) distances from y_i to every row of X^(i)
    diff = points - y[:, None, :]
    return diff, np.sqrt(np.einsum("ind,ind->in", diff, diff))


def _commensurability(y: np.ndarray) -> float:
    # sum_{i<k} ||y_i - y_k||^2 over the m x m difference cube
    diff = y[:, None, :] - y[None, :, :]
    return 0.5 * float(np.vdot(diff, diff))


def _stress_from(D: np.ndarray, y: np.ndarray, deltas: np.ndarray, w: float) -> float:
    residual = deltas - D
    return float(np.vdot(residual, residual)) + w * _commensurability(y)


def _ratio(D: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    return np.divide(deltas, D, out=np.zeros_like(D), where=D > 0)


def _xi_psi(D: np.ndarray, points: np.ndarray, deltas: np.ndarray):
    ratio = _ratio(D, deltas)
    xi = np.einsum("in,ind->id", 1.0 - ratio, points)
    return xi, ratio.sum(axis=1)


def _step_from(
    diff: np.ndarray, D: np.ndarray, points_sum: np.ndarray, deltas: np.ndarray, w: float
) -> np.ndarray:
    m, n = D.shape
    a = 1.0 / (n + m * w)
    b = w / (n * (n + m * w))
    # xi_j + psi_j y_j = sum_l x_jl - sum_l r_jl (x_jl - y_j)
    mixed = points_sum - np.einsum("in,ind->id", _ratio(D, deltas), diff)
    return a * mixed + b * mixed.sum(axis=0)


def oos_stress(y: np.ndarray, X: Configuration, deltas, w: float) -> float:
    """Raw stress of the terms involving the new points."""
    deltas = _as_deltas(deltas)
    y = _check(y, X, deltas, w)
    return _stress_from(_geometry(y, X.points)[1], y, deltas.deltas, w)


def oos_stress_gradient(y: np.ndarray, X: Configuration, deltas, w: float) -> np.ndarray:
    """Gradient 2 (L22 y - xi - diag(psi) y) of ``oos_stress`` with respect to y."""
    deltas = _as_deltas(deltas)
    y = _check(y, X, deltas, w)
    m, n = X.m, X.n
    xi, psi = _xi_psi(_geometry(y, X.points)[1], X.points, deltas.deltas)
    L22_y = (n + m * w) * y - w * y.sum(axis=0, keepdims=True)
    return 2.0 * (L22_y - xi - psi[:, None] * y)


def oos_step_fast(y: np.ndarray, X: Configuration, deltas, w: float) -> np.ndarray:
    """
    One structured out-of-sample Guttman step.

    y_j <- xi_j / (n + m w) + w / (n (n + m w)) sum_k xi_k
           + psi_j y_j / (n + m w) + w / (n (n + m w)) sum_k psi_k y_k
    """
    deltas = _as_deltas(deltas)
    y = _check(y, X, deltas, w)
    diff, D = _geometry(y, X.points)
    return _step_from(diff, D, X.points.sum(axis=1), deltas.deltas, w)


def oos_dense_operands(X: Configuration, deltas, w: float):
    """
    Dense W^(o) and Delta^(o) over the in-sample rows followed by the m new rows.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (weights, dissimilarities), both of order mn + m
    """
    deltas = _as_deltas(deltas)
    m, n = X.m, X.n
    size = m * n + m
    check_dense_size(size, "out-of-sample omnibus")

    weights = np.zeros((size, size))
    weights[:m * n, :m * n] = dense_weight_matrix(UniformWeights(w=w), n, m)
    dissimilarities = np.zeros((size, size))
    for i in range(m):
        rows = slice(i * n, (i + 1) * n)
        new = m * n + i
        weights[rows, new] = weights[new, rows] = 1.0
        dissimilarities[rows, new] = dissimilarities[new, rows] = deltas.deltas[i]
        for j in range(m):
            if j != i:
                weights[new, m * n + j] = w
    return weights, dissimilarities


def oos_step_reference(y: np.ndarray, X: Configuration, deltas, w: float) -> np.ndarray:
    """
    Dense out-of-sample step, y <- L22^+ (B12^T - L12^T) X + L22^+ B22 y.

    Raises:
        SizeCapExceededError: If mn + m exceeds ``JOFC_MAX_DENSE_SIZE``
    """
    deltas = _as_deltas(deltas)
    y = _check(y, X, deltas, w)
    m, n = X.m, X.n
    weights, dissimilarities = oos_dense_operands(X, deltas, w)

    laplacian = np.diag(weights.sum(axis=1)) - weights
    points = np.vstack([X.stacked(), y])
    D = cdist(points, points)
    B = -np.divide(weights * dissimilarities, D, out=np.zeros_like(D), where=D > 0)
    np.fill_diagonal(B, 0.0)
    np.fill_diagonal(B, -B.sum(axis=1))

    k = m * n
    L12, L22 = laplacian[:k, k:], laplacian[k:, k:]
    B12, B22 = B[:k, k:], B[k:, k:]
    L22_pinv = pseudoinverse_oracle(L22)
    return L22_pinv @ ((B12.T - L12.T) @ X.stacked()) + L22_pinv @ (B22 @ y)


def random_start(X: Configuration, seed: int) -> np.ndarray:
    """
    Seeded Gaussian start for the new points.

    Rows are centered Gaussian with expected norm equal to the RMS row norm
    of the in-sample configuration.
    """
    rng = np.random.default_rng(seed)
    rows = X.stacked()
    rms = math.sqrt(float(np.mean(np.sum(rows * rows, axis=1))))
    scale = rms / math.sqrt(X.d) if rms > 0 else 1.0
    return rng.normal(0.0, scale, size=(X.m, X.d))


def oos_embed(
    X: Configuration,
    deltas,
    w: float,
    options: Optional[OosOptions] = None,
    seed: int = 0,
    init: Optional[np.ndarray] = None,
) -> OosResult:
    """
    Embed one new object out of sample.

    Args:
        X (Configuration): Frozen in-sample configuration
        deltas: OosDissimilarity or (m, n) array of new-to-old dissimilarities
        w (float): Commensurability weight
        options (OosOptions): Tolerance and iteration cap
        seed (int): Seed of the random start
        init (np.ndarray): Explicit m x d start; overrides the random start

    Returns:
        OosResult: The new points and the stress trace

    Raises:
        NumericalError: If the stress becomes non-finite
    """
    options = options or OosOptions()
    deltas = _as_deltas(deltas)
    y = random_start(X, seed) if init is None else np.array(init, dtype=float)
    y = _check(y, X, deltas, w)

    # decrease tolerance scales with the number of residual terms
    tolerance = options.eps * (X.m * X.n + math.comb(X.m, 2))
    points, targets = X.points, deltas.deltas
    points_sum = points.sum(axis=1)
    started = time.perf_counter()
    diff, D = _geometry(y, points)
    trace = [_stress_from(D, y, targets, w)]
    terminated = "max_iter"

    for iteration in range(1, options.max_iterations + 1):
        y = _step_from(diff, D, points_sum, targets, w)
        diff, D = _geometry(y, points)
        stress = _stress_from(D, y, targets, w)
        if not math.isfinite(stress):
            raise NumericalError(f"OOS: non-finite stress at iteration {iteration}")
        trace.append(stress)
        if iteration >= options.min_iterations and trace[-2] - trace[-1] < tolerance:
            terminated = "converged"
            break

    elapsed = time.perf_counter() - started
    logger.info(f"OOS embed of {X.m} views finished after {len(trace) - 1} iterations ({terminated})")
    return OosResult(y=y, stress_trace=trace, iterations=len(trace) - 1, terminated=terminated,
                     elapsed_seconds=elapsed)
