"""
Raw stress, B-matrix blocks and the JOFC / fJOFC Guttman iterations.

The omnibus problem holds m dissimilarity matrices on the same n objects.
A configuration holds m blocks of n points in R^d, stored as an (m, n, d)
array. Two solvers share one iteration loop:

- ``fjofc_embed`` uses the structured step: the new block j is
  sum_l ScriptW^-1[j, l] * B_l X_l, with no mn x mn matrix anywhere.
- ``jofc_embed_reference`` materializes L^+ and the full omnibus B and
  applies L^+ B X densely. It is the oracle and the benchmark baseline.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.spatial.distance import cdist, pdist, squareform

from config import config
from errors import InputValidationError, NumericalError
from matrix_core import check_dense_size, pseudoinverse_oracle
from weights import (
    WeightSpec,
    dense_laplacian,
    dense_weight_matrix,
    kronecker_sum_materialize,
    laplacian_pseudoinverse_factors,
    script_w,
    script_w_inverse,
)

# Set up logging
logger = logging.getLogger(__name__)

VALIDATION_TOL = 1e-9


@dataclass(frozen=True)
class OmnibusProblem:
    """
    m symmetric, hollow, nonnegative n x n dissimilarity matrices.

    Matched pairs across modalities have dissimilarity 0; all other
    cross-modality entries are missing and carry zero weight.
    """

    modalities: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.modalities) < 1:
            raise InputValidationError("an omnibus problem needs at least one modality")

        checked = []
        n = None
        for i, delta in enumerate(self.modalities):
            delta = np.array(delta, dtype=float)
            if delta.ndim != 2 or delta.shape[0] != delta.shape[1]:
                raise InputValidationError(f"modality {i}: expected a square matrix, got shape {delta.shape}")
            if n is None:
                n = delta.shape[0]
            elif delta.shape[0] != n:
                raise InputValidationError(f"modality {i}: has {delta.shape[0]} objects, modality 0 has {n}")
            if n < 2:
                raise InputValidationError(f"modality {i}: need at least 2 objects, got {n}")
            if not np.all(np.isfinite(delta)):
                raise InputValidationError(f"modality {i}: contains non-finite entries")
            if np.any(delta < 0):
                row, col = np.argwhere(delta < 0)[0]
                raise InputValidationError(
                    f"modality {i}: negative dissimilarity {delta[row, col]} at row {row}, col {col}"
                )
            tol = VALIDATION_TOL * max(1.0, float(delta.max()))
            if np.abs(delta - delta.T).max() > tol:
                raise InputValidationError(f"modality {i}: matrix is not symmetric")
            if np.abs(np.diag(delta)).max() > tol:
                raise InputValidationError(f"modality {i}: matrix is not hollow")
            delta = 0.5 * (delta + delta.T)
            np.fill_diagonal(delta, 0.0)
            delta.setflags(write=False)
            checked.append(delta)

        object.__setattr__(self, "modalities", tuple(checked))

    @classmethod
    def from_matrices(cls, matrices: Sequence[np.ndarray]) -> "OmnibusProblem":
        return cls(tuple(matrices))

    @property
    def m(self) -> int:
        return len(self.modalities)

    @property
    def n(self) -> int:
        return self.modalities[0].shape[0]

    @cached_property
    def condensed(self) -> Tuple[np.ndarray, ...]:
        """Upper-triangle vectors of each modality, in ``pdist`` order."""
        return tuple(squareform(delta, checks=False) for delta in self.modalities)

    def stacked(self) -> np.ndarray:
        """The m dissimilarity matrices as an (m, n, n) array."""
        return np.stack(self.modalities)


@dataclass(frozen=True)
class Configuration:
    """m blocks of n points in R^d, stored as an (m, n, d) array."""

    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 3:
            raise InputValidationError(f"configuration must have shape (m, n, d), got {points.shape}")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def from_blocks(cls, blocks: Sequence[np.ndarray]) -> "Configuration":
        return cls(np.stack([np.asarray(b, dtype=float) for b in blocks]))

    @classmethod
    def from_stacked(cls, X: np.ndarray, m: int) -> "Configuration":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] % m != 0:
            raise InputValidationError(f"cannot split {X.shape} into {m} blocks")
        return cls(X.reshape(m, X.shape[0] // m, X.shape[1]))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def d(self) -> int:
        return self.points.shape[2]

    @property
    def blocks(self) -> List[np.ndarray]:
        return list(self.points)

    def stacked(self) -> np.ndarray:
        """The mn x d matrix [X^(1); ...; X^(m)]."""
        return self.points.reshape(self.m * self.n, self.d)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.points)))


class SolveOptions(BaseModel):
    """Options shared by both solvers."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    d: int = Field(default=2, ge=1)
    eps: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=1000, ge=1)
    # steps taken before the eps test applies
    min_iterations: int = Field(default=0, ge=0)
    init: Literal["averaged_procrustes", "imputed_cmds", "provided"] = "averaged_procrustes"
    parallel: bool = False
    n_jobs: Optional[int] = Field(default=None, ge=1)
    normalize: bool = False
    keep_trace: bool = False

    @model_validator(mode="after")
    def _iteration_bounds(self):
        if self.min_iterations > self.max_iterations:
            raise ValueError(
                f"min_iterations ({self.min_iterations}) exceeds max_iterations ({self.max_iterations})"
            )
        return self


@dataclass(frozen=True)
class EmbeddingResult:
    """Final configuration and per-iteration diagnostics of one solve."""

    config: Configuration
    stress_trace: List[float]
    normalized_stress_trace: List[float]
    iterations: int
    terminated: Literal["converged", "max_iter"]
    algorithm: str
    step_times: List[float] = field(default_factory=list)
    iterates: Optional[List[Configuration]] = None
    stress_components: Tuple[float, float] = (0.0, 0.0)

    @property
    def final_stress(self) -> float:
        return self.stress_trace[-1]

    @property
    def final_normalized_stress(self) -> float:
        return self.normalized_stress_trace[-1]


def _check_shapes(config_: Configuration, problem: OmnibusProblem) -> None:
    if config_.m != problem.m or config_.n != problem.n:
        raise InputValidationError(
            f"configuration has {config_.m} blocks of {config_.n} points, "
            f"problem has {problem.m} modalities of {problem.n} objects"
        )


def pair_count(problem: OmnibusProblem) -> int:
    """C(nm, 2), the normalizer of the normalized stress."""
    return math.comb(problem.n * problem.m, 2)


def stress_components(config_: Configuration, problem: OmnibusProblem, spec: WeightSpec) -> Tuple[float, float]:
    """
    Fidelity and commensurability terms of the JOFC raw stress.

    Args:
        config_ (Configuration): Current configuration
        problem (OmnibusProblem): The dissimilarities
        spec (WeightSpec): Weight family

    Returns:
        Tuple[float, float]: (sum_i w_ii sum_{j<l} (Delta_i - d(X_i))^2,
            sum_{i<j} w_ij sum_l ||X_i[l] - X_j[l]||^2)
    """
    _check_shapes(config_, problem)
    within = spec.within_weights(problem.m)
    cross = spec.cross_weights(problem.m)

    fidelity = 0.0
    for i, block in enumerate(config_.points):
        residual = problem.condensed[i] - pdist(block)
        fidelity += within[i] * float(residual @ residual)

    commensurability = 0.0
    for i in range(problem.m):
        for j in range(i + 1, problem.m):
            diff = config_.points[i] - config_.points[j]
            commensurability += cross[i, j] * float(np.sum(diff * diff))

    return fidelity, commensurability


def raw_stress(config_: Configuration, problem: OmnibusProblem, spec: WeightSpec) -> float:
    """Weighted raw stress sum_{i<j} W_ij (Delta_ij - d_ij(X))^2 of the omnibus embedding."""
    fidelity, commensurability = stress_components(config_, problem, spec)
    return fidelity + commensurability


def _block_product(delta: np.ndarray, X: np.ndarray, weight: float) -> np.ndarray:
    # B_l X_l with B_l = diag(R 1) - R, R = weight * Delta / D (0 where D == 0)
    D = cdist(X, X)
    R = np.divide(delta, D, out=np.zeros_like(D), where=D > 0)
    R *= weight
    return R.sum(axis=1)[:, None] * X - R @ X


def b_blocks(config_: Configuration, problem: OmnibusProblem, spec: WeightSpec) -> List[np.ndarray]:
    """
    Diagonal blocks B_1..B_m of the omnibus B(X).

    Off-diagonal entries are -w_ll * Delta_l / d(X_l), zero where two points
    coincide; each diagonal is the negated off-diagonal row sum. The
    cross-modality blocks of B(X) vanish because matched dissimilarities are 0.
    """
    _check_shapes(config_, problem)
    within = spec.within_weights(problem.m)
    blocks = []
    for l, (delta, X) in enumerate(zip(problem.modalities, config_.points)):
        D = cdist(X, X)
        B = -within[l] * np.divide(delta, D, out=np.zeros_like(D), where=D > 0)
        np.fill_diagonal(B, 0.0)
        np.fill_diagonal(B, -B.sum(axis=1))
        blocks.append(B)
    return blocks


def _block_products(
    config_: Configuration,
    problem: OmnibusProblem,
    within: np.ndarray,
    pool: Optional[Parallel] = None,
) -> np.ndarray:
    if pool is None:
        products = [
            _block_product(delta, X, w) for delta, X, w in zip(problem.modalities, config_.points, within)
        ]
    else:
        products = pool(
            delayed(_block_product)(delta, X, w)
            for delta, X, w in zip(problem.modalities, config_.points, within)
        )
    return np.stack(products)


def guttman_step_fast(
    config_: Configuration,
    problem: OmnibusProblem,
    spec: WeightSpec,
    w_inverse: Optional[np.ndarray] = None,
    pool: Optional[Parallel] = None,
) -> Configuration:
    """
    One fJOFC Guttman transform.

    Args:
        config_ (Configuration): Current iterate
        problem (OmnibusProblem): The dissimilarities
        spec (WeightSpec): Weight family
        w_inverse (np.ndarray): Precomputed ScriptW^-1; computed when omitted
        pool (Parallel): Optional joblib pool used for the m block products

    Returns:
        Configuration: Next iterate, X_j = sum_l ScriptW^-1[j, l] B_l X_l
    """
    _check_shapes(config_, problem)
    if w_inverse is None:
        w_inverse = script_w_inverse(spec, problem.n, problem.m)
    products = _block_products(config_, problem, spec.within_weights(problem.m), pool)
    return Configuration(np.einsum("jl,lnd->jnd", w_inverse, products))


def dense_omnibus(problem: OmnibusProblem) -> np.ndarray:
    """
    The mn x mn omnibus dissimilarity matrix.

    Off-diagonal blocks are zero: matched entries are 0 by definition and
    the missing entries carry zero weight.
    """
    check_dense_size(problem.m * problem.n, "omnibus dissimilarity matrix")
    n, m = problem.n, problem.m
    omnibus = np.zeros((m * n, m * n))
    for i, delta in enumerate(problem.modalities):
        omnibus[i * n:(i + 1) * n, i * n:(i + 1) * n] = delta
    return omnibus


def dense_laplacian_pseudoinverse(spec: WeightSpec, n: int, m: int, exact: bool = True) -> np.ndarray:
    """
    Materialized L^+ for the reference solver.

    With ``exact`` the closed-form Kronecker factors are expanded; otherwise
    the dense Laplacian is pseudo-inverted by eigendecomposition.
    """
    if exact:
        V, Z = laplacian_pseudoinverse_factors(spec, n, m)
        return kronecker_sum_materialize(V, Z, n)
    return pseudoinverse_oracle(dense_laplacian(spec, n, m))


def _dense_b_matrix(X: np.ndarray, W: np.ndarray, omnibus: np.ndarray) -> np.ndarray:
    D = cdist(X, X)
    B = -np.divide(W * omnibus, D, out=np.zeros_like(D), where=D > 0)
    np.fill_diagonal(B, 0.0)
    np.fill_diagonal(B, -B.sum(axis=1))
    return B


def guttman_step_reference(
    config_: Configuration,
    problem: OmnibusProblem,
    spec: WeightSpec,
    l_pinv: Optional[np.ndarray] = None,
    weight_matrix: Optional[np.ndarray] = None,
    omnibus: Optional[np.ndarray] = None,
) -> Configuration:
    """
    One dense JOFC Guttman transform, L^+ B(X) X over the full omnibus.

    The dense operands may be passed in so an iteration loop builds them once.

    Raises:
        SizeCapExceededError: If mn exceeds ``JOFC_MAX_DENSE_SIZE``
    """
    _check_shapes(config_, problem)
    n, m = problem.n, problem.m
    check_dense_size(m * n, "reference Guttman operands")
    if l_pinv is None:
        l_pinv = dense_laplacian_pseudoinverse(spec, n, m)
    if weight_matrix is None:
        weight_matrix = dense_weight_matrix(spec, n, m)
    if omnibus is None:
        omnibus = dense_omnibus(problem)

    X = config_.stacked()
    B = _dense_b_matrix(X, weight_matrix, omnibus)
    return Configuration.from_stacked(l_pinv @ (B @ X), m)


def stress_gradient(config_: Configuration, problem: OmnibusProblem, spec: WeightSpec) -> np.ndarray:
    """
    Gradient 2 L X - 2 B(X) X of the raw stress, as an (m, n, d) array.

    L X is applied through the structure L = ScriptW (x) I - diag(w_ii) (x) J.
    """
    _check_shapes(config_, problem)
    within = spec.within_weights(problem.m)
    W_cal = script_w(spec, problem.n, problem.m)
    X = config_.points
    LX = np.einsum("jl,lnd->jnd", W_cal, X) - within[:, None, None] * X.sum(axis=1, keepdims=True)
    BX = _block_products(config_, problem, within)
    return 2.0 * (LX - BX)


def normalize_problem(problem: OmnibusProblem) -> OmnibusProblem:
    """Scale each modality to unit Frobenius norm; zero matrices are left unchanged."""
    scaled = []
    for delta in problem.modalities:
        norm = np.linalg.norm(delta)
        scaled.append(delta / norm if norm > 0 else delta)
    return OmnibusProblem(tuple(scaled))


def _initial_configuration(
    problem: OmnibusProblem, options: SolveOptions, initial: Optional[Configuration]
) -> Configuration:
    # deferred: initialization builds on the types defined in this module
    from initialization import averaged_procrustes_init, imputed_omnibus_init

    if initial is not None:
        _check_shapes(initial, problem)
        if initial.d != options.d:
            raise InputValidationError(f"initial configuration has d={initial.d}, options ask for d={options.d}")
        return initial
    if options.init == "provided":
        raise InputValidationError("init=provided requires an initial configuration")
    if options.init == "imputed_cmds":
        return imputed_omnibus_init(problem, options.d)
    return averaged_procrustes_init(problem, options.d)


def _iterate(
    step: Callable[[Configuration], Configuration],
    problem: OmnibusProblem,
    spec: WeightSpec,
    options: SolveOptions,
    start: Configuration,
    algorithm: str,
) -> EmbeddingResult:
    normalizer = pair_count(problem)
    current = start
    stress = raw_stress(current, problem, spec)
    if not math.isfinite(stress):
        raise NumericalError(f"{algorithm}: initial stress is not finite")

    stress_trace = [stress]
    normalized_trace = [stress / normalizer]
    step_times: List[float] = []
    iterates = [current] if options.keep_trace else None
    terminated = "max_iter"

    for iteration in range(1, options.max_iterations + 1):
        started = time.perf_counter()
        current = step(current)
        step_times.append(time.perf_counter() - started)

        stress = raw_stress(current, problem, spec)
        if not math.isfinite(stress) or not current.is_finite():
            raise NumericalError(
                f"{algorithm}: non-finite stress at iteration {iteration} "
                f"(previous normalized stress {normalized_trace[-1]:.6g})"
            )
        stress_trace.append(stress)
        normalized_trace.append(stress / normalizer)
        if iterates is not None:
            iterates.append(current)
        logger.debug(f"{algorithm} iteration {iteration}: normalized stress {normalized_trace[-1]:.9g}")

        if iteration >= options.min_iterations and normalized_trace[-2] - normalized_trace[-1] < options.eps:
            terminated = "converged"
            break

    iterations = len(stress_trace) - 1
    logger.info(
        f"{algorithm} finished after {iterations} iterations ({terminated}), "
        f"normalized stress {normalized_trace[-1]:.6g}"
    )
    return EmbeddingResult(
        config=current,
        stress_trace=stress_trace,
        normalized_stress_trace=normalized_trace,
        iterations=iterations,
        terminated=terminated,
        algorithm=algorithm,
        step_times=step_times,
        iterates=iterates,
        stress_components=stress_components(current, problem, spec),
    )


def fjofc_embed(
    problem: OmnibusProblem,
    spec: WeightSpec,
    options: Optional[SolveOptions] = None,
    initial: Optional[Configuration] = None,
) -> EmbeddingResult:
    """
    Embed an omnibus problem with the fast structured Guttman iteration.

    Args:
        problem (OmnibusProblem): The dissimilarities
        spec (WeightSpec): Weight family
        options (SolveOptions): Dimension, tolerance, init and parallelism
        initial (Configuration): Starting configuration for ``init="provided"``;
            when given it takes precedence over ``options.init``

    Returns:
        EmbeddingResult: Final configuration and traces

    Raises:
        NumericalError: If the stress becomes non-finite
    """
    options = options or SolveOptions()
    if options.normalize:
        problem = normalize_problem(problem)
    logger.info(
        f"fJOFC: m={problem.m}, n={problem.n}, d={options.d}, init={options.init}, "
        f"parallel={options.parallel}"
    )
    start = _initial_configuration(problem, options, initial)
    w_inverse = script_w_inverse(spec, problem.n, problem.m)

    if not options.parallel:
        return _iterate(
            lambda X: guttman_step_fast(X, problem, spec, w_inverse),
            problem, spec, options, start, "fjofc",
        )

    n_jobs = options.n_jobs or config.N_JOBS or problem.m
    with Parallel(n_jobs=n_jobs, prefer="threads") as pool:
        return _iterate(
            lambda X: guttman_step_fast(X, problem, spec, w_inverse, pool),
            problem, spec, options, start, "fjofc",
        )


def jofc_embed_reference(
    problem: OmnibusProblem,
    spec: WeightSpec,
    options: Optional[SolveOptions] = None,
    initial: Optional[Configuration] = None,
    exact_pinv: bool = True,
) -> EmbeddingResult:
    """
    Embed an omnibus problem with the dense JOFC iteration.

    L^+, the dense weights and the dense omnibus are built once and reused
    by every step.

    Raises:
        SizeCapExceededError: If mn exceeds ``JOFC_MAX_DENSE_SIZE``
    """
    options = options or SolveOptions()
    if options.normalize:
        problem = normalize_problem(problem)
    n, m = problem.n, problem.m
    check_dense_size(m * n, "reference JOFC operands")
    logger.info(f"JOFC (dense): m={m}, n={n}, d={options.d}, init={options.init}")

    start = _initial_configuration(problem, options, initial)
    l_pinv = dense_laplacian_pseudoinverse(spec, n, m, exact=exact_pinv)
    weight_matrix = dense_weight_matrix(spec, n, m)
    omnibus = dense_omnibus(problem)

    return _iterate(
        lambda X: guttman_step_reference(X, problem, spec, l_pinv, weight_matrix, omnibus),
        problem, spec, options, start, "jofc",
    )
