"""
Desk-scale reproductions of the manifold-matching experiments.

Each function is a pure function of its parameters and seed and returns
plain numbers or pydantic models, so the CLI and the slow test suite can
share them.
"""

import logging
import time
from typing import Iterable, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from bench import loglog_slope
from embed_core import (
    Configuration,
    EmbeddingResult,
    OmnibusProblem,
    SolveOptions,
    fjofc_embed,
    pair_count,
    raw_stress,
)
from errors import InputValidationError
from matrix_core import euclidean_distance_matrix
from metrics import MetricsReport, clustering_ari, confusion_ratio, relative_error_trace
from oos import OosOptions, oos_embed
from simulation import generate_anomaly, generate_matched, point_clouds
from weights import UniformWeights

# Set up logging
logger = logging.getLogger(__name__)


def run_table1(
    setting: Literal["matched", "anomaly"] = "matched",
    n: int = 400,
    m: int = 3,
    d: int = 2,
    w: float = 1.0,
    seed: int = 0,
    n_anomalies: int = 10,
    options: Optional[SolveOptions] = None,
):
    """
    Embed one synthetic problem with fJOFC and score it.

    ARI is computed on the non-anomalous objects with one cluster per
    object. The confusion ratio is reported in the anomaly setting only.

    Returns:
        Tuple[MetricsReport, EmbeddingResult]: Scores and the full run
    """
    options = options or SolveOptions(d=d)
    if setting == "anomaly":
        problem, anomalies = generate_anomaly(n, m, n_anomalies, seed=seed)
    else:
        problem, _ = generate_matched(n, m, seed=seed)
        anomalies = np.array([], dtype=int)

    result = fjofc_embed(problem, UniformWeights(w=w), options)
    ratio = confusion_ratio(result.config, anomalies) if anomalies.size else None
    report = MetricsReport.from_result(
        result,
        ari=clustering_ari(result.config, anomalies=anomalies, seed=seed),
        confusion_ratio=ratio,
        seed=seed,
    )
    logger.info(
        f"{setting}: normalized stress {report.final_normalized_stress:.4g}, ARI {report.ari:.4f}"
        + (f", confusion ratio {ratio:.4g}" if ratio is not None else "")
    )
    return report, result


class GeneratorBaseline(BaseModel):
    """Scores of the generating point clouds, the best a d = dim embedding can be expected to reach."""

    ari: float
    normalized_stress: float


def generator_baseline(
    setting: Literal["matched", "anomaly"] = "matched",
    n: int = 400,
    m: int = 3,
    dim: int = 2,
    w: float = 1.0,
    seed: int = 0,
    n_anomalies: int = 10,
) -> GeneratorBaseline:
    """
    Score the jittered clouds behind a synthetic problem as if they were its embedding.

    Fidelity is exactly 0 for the clouds, so their normalized stress is the
    commensurability left by the jitter. Their k-means ARI bounds what any
    embedding of the same problem can reach under the same protocol.
    """
    anomalies = np.arange(n_anomalies) if setting == "anomaly" else np.array([], dtype=int)
    clouds = point_clouds(n, m, dim, seed, anomalies.size)
    problem = OmnibusProblem.from_matrices([euclidean_distance_matrix(Y) for Y in clouds])
    clouds_config = Configuration(np.stack(clouds))
    baseline = GeneratorBaseline(
        ari=clustering_ari(clouds_config, anomalies=anomalies, seed=seed),
        normalized_stress=raw_stress(clouds_config, problem, UniformWeights(w=w)) / pair_count(problem),
    )
    logger.info(f"{setting} generator baseline: ARI {baseline.ari:.4f}, normalized stress {baseline.normalized_stress:.4g}")
    return baseline


class EarlyStoppingResult(BaseModel):
    k: int
    mean_relative_error: float
    iterations: List[int]


def early_stopping_study(
    n: int,
    m: int,
    k: int,
    seeds: Iterable[int],
    setting: Literal["matched", "anomaly"] = "anomaly",
    w: float = 1.0,
    d: int = 2,
    horizon: Optional[int] = None,
) -> EarlyStoppingResult:
    """
    Mean relative error of the k-th iterate against the final configuration.

    Every run takes at least ``horizon`` steps (4k by default) before the
    stopping rule applies, so the k-th iterate is never the final one. In the
    anomaly setting the anomalous points of the last modality are left out
    of the error.

    Returns:
        EarlyStoppingResult: Mean error over the seeds and each run's iteration count
    """
    horizon = horizon if horizon is not None else 4 * k
    if horizon <= k:
        raise InputValidationError(f"horizon must exceed k={k}, got {horizon}")
    options = SolveOptions(d=d, keep_trace=True, min_iterations=horizon, max_iterations=max(horizon, 1000))

    errors: List[float] = []
    iterations: List[int] = []
    for seed in seeds:
        mask = np.ones((m, n), dtype=bool)
        if setting == "anomaly":
            problem, anomalies = generate_anomaly(n, m, seed=seed)
            mask[-1, anomalies] = False
        else:
            problem, _ = generate_matched(n, m, seed=seed)
        result = fjofc_embed(problem, UniformWeights(w=w), options)
        errors.append(relative_error_trace(result, k, mask=mask))
        iterations.append(result.iterations)

    study = EarlyStoppingResult(k=k, mean_relative_error=float(np.mean(errors)), iterations=iterations)
    logger.info(f"early stopping at k={k}: mean relative error {study.mean_relative_error:.4g} over {len(errors)} runs")
    return study


class OosExperimentResult(BaseModel):
    n: int
    m: int
    residual: float
    oos_seconds: float
    in_sample_seconds: float


def _leading_problem(problem: OmnibusProblem, keep: int) -> OmnibusProblem:
    return OmnibusProblem.from_matrices([delta[:keep, :keep] for delta in problem.modalities])


def oos_residual_experiment(
    n: int = 200, m: int = 10, dim: int = 3, seed: int = 0, w: float = 1.0
) -> OosExperimentResult:
    """
    Compare the out-of-sample embedding of the last object with its in-sample position.

    The full problem is embedded with fJOFC. The first n - 1 objects are then
    re-embedded starting from the full solution's rows, which keeps both
    embeddings in one frame, and object n is embedded out of sample
    against them.

    Returns:
        OosExperimentResult: sum_i ||X_i[n] - y_i|| and the wall times
    """
    clouds = point_clouds(n, m, dim, seed)
    problem = OmnibusProblem.from_matrices([euclidean_distance_matrix(Y) for Y in clouds])
    spec = UniformWeights(w=w)

    started = time.perf_counter()
    full = fjofc_embed(problem, spec, SolveOptions(d=dim))
    in_sample_seconds = time.perf_counter() - started

    held_out = n - 1
    start = Configuration(full.config.points[:, :held_out, :])
    reduced = fjofc_embed(_leading_problem(problem, held_out), spec, SolveOptions(d=dim, init="provided"), start)

    deltas = np.vstack([delta[held_out, :held_out] for delta in problem.modalities])
    oos = oos_embed(reduced.config, deltas, w, seed=seed)
    residual = float(np.linalg.norm(full.config.points[:, held_out, :] - oos.y, axis=1).sum())
    logger.info(f"OOS residual n={n}, m={m}: {residual:.4g}")
    return OosExperimentResult(
        n=n, m=m, residual=residual, oos_seconds=oos.elapsed_seconds, in_sample_seconds=in_sample_seconds
    )


def oos_time_scaling(n_values: Sequence[int], m: int = 10, dim: int = 3, seed: int = 0, w: float = 1.0,
                     iterations: int = 100, repeats: int = 5) -> float:
    """
    Log-log slope of the out-of-sample embed time against n.

    Every embed runs exactly ``iterations`` steps so that runs at different n
    do the same number of updates. The in-sample configuration is the exact
    point cloud, so only the OOS cost is measured; the fastest of
    ``repeats`` embeds is kept for each n.
    """
    options = OosOptions(max_iterations=iterations, min_iterations=iterations)
    times = []
    for n in n_values:
        clouds = point_clouds(n + 1, m, dim, seed)
        X = Configuration(np.stack([Y[:n] - Y[:n].mean(axis=0) for Y in clouds]))
        deltas = np.vstack([np.linalg.norm(Y[:n] - Y[n], axis=1) for Y in clouds])
        elapsed = [oos_embed(X, deltas, w, options, seed=seed + r).elapsed_seconds for r in range(repeats)]
        times.append(min(elapsed))
        logger.debug(f"OOS embed n={n}, m={m}: {times[-1] * 1e3:.3f} ms for {iterations} iterations")
    return loglog_slope(n_values, times)


def fjofc_step_scaling(n_values: Sequence[int], m: int = 3, seed: int = 0, w: float = 1.0,
                       iterations: int = 5) -> float:
    """Log-log slope of the fJOFC per-step time against n at fixed m."""
    times = []
    for n in n_values:
        problem, _ = generate_matched(n, m, seed=seed)
        result: EmbeddingResult = fjofc_embed(
            problem, UniformWeights(w=w), SolveOptions(max_iterations=iterations, min_iterations=iterations)
        )
        times.append(float(np.median(result.step_times)))
    return loglog_slope(n_values, times)
