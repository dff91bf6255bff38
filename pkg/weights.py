"""
Structured JOFC weight families and the closed-form Laplacian pseudoinverse.

A weight family assigns every modality a within-modality weight w_ii and
every pair of modalities a commensurability weight w_ij. The omnibus weight
matrix is then

    W = diag(w_ii) (x) (J_n - I_n) + [w_ij] (x) I_n

and its Laplacian is L = ScriptW (x) I_n - diag(w_ii) (x) J_n, where ScriptW is
the m x m matrix with diagonal n*w_ii + sum_{j != i} w_ij and off-diagonal
-w_ij. Everything the fast solver needs lives in m x m matrices.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import InputValidationError, NumericalError
from matrix_core import check_dense_size

# Set up logging
logger = logging.getLogger(__name__)


class WeightSpec(BaseModel):
    """
    Base class of the structured weight families.

    Subclasses normalize themselves into a vector of within-modality weights
    and a symmetric matrix of cross-modality weights with zero diagonal.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def modality_count(self) -> Optional[int]:
        """Number of modalities fixed by the spec, or None if it fits any m."""
        return None

    def resolve_m(self, m: Optional[int]) -> int:
        """Check ``m`` against the weight family and return the modality count to use."""
        fixed = self.modality_count
        if m is None:
            if fixed is None:
                raise InputValidationError(f"{type(self).__name__} needs an explicit modality count")
            return fixed
        if m < 1:
            raise InputValidationError(f"modality count must be >= 1, got {m}")
        if fixed is not None and fixed != m:
            raise InputValidationError(f"{type(self).__name__} is defined for {fixed} modalities, got {m}")
        return m

    def within_weights(self, m: Optional[int] = None) -> np.ndarray:
        raise NotImplementedError

    def cross_weights(self, m: Optional[int] = None) -> np.ndarray:
        raise NotImplementedError


class UniformWeights(WeightSpec):
    """Unit fidelity weights and a single commensurability weight ``w``."""

    kind: Literal["uniform"] = "uniform"
    w: float = Field(gt=0)

    def within_weights(self, m: Optional[int] = None) -> np.ndarray:
        return np.ones(self.resolve_m(m))

    def cross_weights(self, m: Optional[int] = None) -> np.ndarray:
        m = self.resolve_m(m)
        return self.w * (np.ones((m, m)) - np.eye(m))


class GeneralSymmetricWeights(WeightSpec):
    """Arbitrary positive symmetric m x m weights; the diagonal holds w_ii."""

    kind: Literal["general"] = "general"
    matrix: Tuple[Tuple[float, ...], ...]

    @field_validator("matrix", mode="before")
    @classmethod
    def _as_tuples(cls, value):
        try:
            M = np.asarray(value, dtype=float)
        except (TypeError, ValueError) as e:
            raise ValueError(f"weight matrix must be numeric: {e}") from e
        if M.ndim != 2:
            raise ValueError(f"weight matrix must be two-dimensional, got shape {M.shape}")
        return tuple(tuple(float(x) for x in row) for row in M)

    @model_validator(mode="after")
    def _check_matrix(self) -> "GeneralSymmetricWeights":
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
            raise ValueError(f"weight matrix must be square, got shape {M.shape}")
        if not np.all(np.isfinite(M)) or np.any(M <= 0):
            raise ValueError("all weights must be finite and strictly positive")
        if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(M).max())):
            raise ValueError("weight matrix must be symmetric")
        return self

    @property
    def modality_count(self) -> Optional[int]:
        return len(self.matrix)

    def within_weights(self, m: Optional[int] = None) -> np.ndarray:
        self.resolve_m(m)
        return np.diag(np.asarray(self.matrix, dtype=float)).copy()

    def cross_weights(self, m: Optional[int] = None) -> np.ndarray:
        self.resolve_m(m)
        M = np.asarray(self.matrix, dtype=float)
        M = 0.5 * (M + M.T)
        np.fill_diagonal(M, 0.0)
        return M


class ProductWeights(WeightSpec):
    """
    Per-modality weights w_ii with cross weights w_ii * w_jj.

    The fidelity scale ``c`` multiplies the within-modality weights, so the
    diagonal blocks of W are c * w_ii (J_n - I_n). Larger ``c`` emphasizes
    fidelity over commensurability.
    """

    kind: Literal["product"] = "product"
    weights: Tuple[float, ...]
    c: float = Field(default=1.0, gt=0)

    @field_validator("weights")
    @classmethod
    def _positive(cls, value):
        if len(value) < 1 or any(not np.isfinite(x) or x <= 0 for x in value):
            raise ValueError("product weights must be finite and strictly positive")
        return value

    @property
    def modality_count(self) -> Optional[int]:
        return len(self.weights)

    def within_weights(self, m: Optional[int] = None) -> np.ndarray:
        self.resolve_m(m)
        return self.c * np.asarray(self.weights, dtype=float)

    def cross_weights(self, m: Optional[int] = None) -> np.ndarray:
        self.resolve_m(m)
        w = np.asarray(self.weights, dtype=float)
        M = np.outer(w, w)
        np.fill_diagonal(M, 0.0)
        return M


def _require_n(n: int) -> None:
    if n < 2:
        raise InputValidationError(f"object count n must be >= 2, got {n}")


def script_w(spec: WeightSpec, n: int, m: Optional[int] = None) -> np.ndarray:
    """
    Build the m x m matrix ScriptW of a weight family.

    Args:
        spec (WeightSpec): The weight family
        n (int): Number of objects
        m (int): Number of modalities (required for uniform weights)

    Returns:
        np.ndarray: Diagonal n*w_ii + sum_{j != i} w_ij, off-diagonal -w_ij
    """
    _require_n(n)
    m = spec.resolve_m(m)
    cross = spec.cross_weights(m)
    return np.diag(n * spec.within_weights(m) + cross.sum(axis=1)) - cross


def script_w_inverse(spec: WeightSpec, n: int, m: Optional[int] = None) -> np.ndarray:
    """
    Inverse of ScriptW, in closed form for the uniform and product families.

    Args:
        spec (WeightSpec): The weight family
        n (int): Number of objects
        m (int): Number of modalities (required for uniform weights)

    Returns:
        np.ndarray: m x m inverse

    Raises:
        NumericalError: If ScriptW is singular (only possible for a general
            spec that slipped past validation)
    """
    _require_n(n)
    m = spec.resolve_m(m)

    if isinstance(spec, UniformWeights):
        w = spec.w
        denominator = n * (n + m * w)
        return np.full((m, m), w / denominator) + np.eye(m) * (n / denominator)

    if isinstance(spec, ProductWeights):
        w = np.asarray(spec.weights, dtype=float)
        cn = spec.c * n
        total = cn + w.sum()
        return np.diag(1.0 / (w * total)) + np.full((m, m), 1.0 / (cn * total))

    W_cal = script_w(spec, n, m)
    try:
        inverse = np.linalg.solve(W_cal, np.eye(m))
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"ScriptW is singular for n={n}, m={m}: {e}") from e
    if not np.all(np.isfinite(inverse)):
        raise NumericalError(f"ScriptW inverse is not finite for n={n}, m={m}")
    return inverse


@dataclass(frozen=True)
class ScriptW:
    """ScriptW together with its cached inverse."""

    matrix: np.ndarray
    inverse: np.ndarray

    @classmethod
    def build(cls, spec: WeightSpec, n: int, m: Optional[int] = None) -> "ScriptW":
        m = spec.resolve_m(m)
        return cls(script_w(spec, n, m), script_w_inverse(spec, n, m))

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def identity_residual(self) -> float:
        """Max-abs deviation of ScriptW @ inverse from the identity."""
        return float(np.abs(self.matrix @ self.inverse - np.eye(self.m)).max())

    def is_strictly_diagonally_dominant(self) -> bool:
        off = np.abs(self.matrix).sum(axis=1) - np.abs(np.diag(self.matrix))
        return bool(np.all(np.abs(np.diag(self.matrix)) > off))


def kronecker_sum_inverse(A: np.ndarray, B: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Invert A (x) I_n + B (x) J_n without forming it.

    Uses (A (x) I + B (x) J)^-1 = A^-1 (x) I - (A + nB)^-1 B A^-1 (x) J.

    Args:
        A (np.ndarray): m x m invertible matrix
        B (np.ndarray): m x m matrix with A + nB invertible
        n (int): Order of the identity / all-ones factors

    Returns:
        Tuple[np.ndarray, np.ndarray]: Factors (V, Z) of the inverse V (x) I_n + Z (x) J_n

    Raises:
        NumericalError: If A or A + nB is singular
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputValidationError(f"A and B must be square of equal shape, got {A.shape} and {B.shape}")
    m = A.shape[0]
    try:
        V = np.linalg.solve(A, np.eye(m))
        Z = -np.linalg.solve(A + n * B, B @ V)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Kronecker-sum inverse failed (singular A or A + nB): {e}") from e
    return V, Z


def kronecker_sum_materialize(V: np.ndarray, Z: np.ndarray, n: int) -> np.ndarray:
    """Form V (x) I_n + Z (x) J_n densely (test and reference path only)."""
    check_dense_size(V.shape[0] * n, "Kronecker sum")
    return np.kron(V, np.eye(n)) + np.kron(Z, np.ones((n, n)))


def laplacian_pseudoinverse_factors(
    spec: WeightSpec, n: int, m: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed-form factors of the Laplacian pseudoinverse, L^+ = V (x) I_n + Z (x) J_n.

    L^+ = (L + J_mn/(mn))^-1 - J_mn/(mn), and L + J_mn/(mn) is the Kronecker
    sum ScriptW (x) I_n + (J_m/(mn) - diag(w_ii)) (x) J_n.

    Args:
        spec (WeightSpec): The weight family
        n (int): Number of objects
        m (int): Number of modalities (required for uniform weights)

    Returns:
        Tuple[np.ndarray, np.ndarray]: V = ScriptW^-1 and Z
    """
    _require_n(n)
    m = spec.resolve_m(m)
    W_cal = script_w(spec, n, m)
    V = script_w_inverse(spec, n, m)
    J_scaled = np.ones((m, m)) / (m * n)
    coupling = J_scaled - np.diag(spec.within_weights(m))
    try:
        Z = -np.linalg.solve(W_cal + n * coupling, coupling @ V) - J_scaled
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Laplacian pseudoinverse factors failed for n={n}, m={m}: {e}") from e
    return V, Z


def dense_weight_matrix(spec: WeightSpec, n: int, m: Optional[int] = None) -> np.ndarray:
    """
    Materialize the mn x mn omnibus weight matrix (oracle path only).

    Raises:
        SizeCapExceededError: If mn exceeds ``JOFC_MAX_DENSE_SIZE``
    """
    _require_n(n)
    m = spec.resolve_m(m)
    check_dense_size(m * n, "omnibus weight matrix")
    within = np.kron(np.diag(spec.within_weights(m)), np.ones((n, n)) - np.eye(n))
    return within + np.kron(spec.cross_weights(m), np.eye(n))


def dense_laplacian(spec: WeightSpec, n: int, m: Optional[int] = None) -> np.ndarray:
    """Combinatorial Laplacian D - W of the dense omnibus weight matrix."""
    W = dense_weight_matrix(spec, n, m)
    return np.diag(W.sum(axis=1)) - W


def oos_l22_inverse(m: int, n: int, w: float) -> np.ndarray:
    """
    Inverse of L22 = (n + m w) I_m - w J_m, the new-point block of the
    out-of-sample Laplacian.
    """
    if m < 1 or n < 1 or w <= 0:
        raise InputValidationError(f"need m >= 1, n >= 1, w > 0; got m={m}, n={n}, w={w}")
    return np.eye(m) / (n + m * w) + np.full((m, m), w / (n * (n + m * w)))
