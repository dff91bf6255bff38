"""
Clustering and matching quality metrics for JOFC embeddings.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import pdist
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score

from embed_core import Configuration, EmbeddingResult
from errors import InputValidationError

# Set up logging
logger = logging.getLogger(__name__)


def kmeans(points: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """
    Lloyd's k-means from k-means++ seeding, at most 100 iterations.

    Args:
        points (np.ndarray): N x d points
        k (int): Number of clusters, 1 <= k <= N
        seed (int): Seed for the k-means++ draws

    Returns:
        np.ndarray: Cluster label of every point
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if not 1 <= k <= points.shape[0]:
        raise InputValidationError(f"k must satisfy 1 <= k <= {points.shape[0]}, got {k}")
    model = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=100, algorithm="lloyd", random_state=seed)
    return model.fit_predict(points)


def adjusted_rand_index(labels_a: Sequence[int], labels_b: Sequence[int]) -> float:
    """Adjusted Rand index between two labelings of the same points."""
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape:
        raise InputValidationError(f"labelings differ in length: {labels_a.size} vs {labels_b.size}")
    return float(adjusted_rand_score(labels_a, labels_b))


def _object_spreads(config_: Configuration) -> np.ndarray:
    # mean pairwise distance among the m embedded copies of each object
    return np.array([pdist(config_.points[:, j, :]).mean() for j in range(config_.n)])


def confusion_ratio(config_: Configuration, anomalies: Sequence[int]) -> float:
    """
    Mean within-object spread of the anomalous objects divided by that of the rest.

    The spread of an object is the mean pairwise distance among its m
    embedded copies.

    Returns:
        float: The ratio; +inf if only the anomalous objects are spread,
            1.0 if no object is spread at all
    """
    if config_.m < 2:
        raise InputValidationError("confusion ratio needs at least two modalities")
    anomalies = np.unique(np.asarray(anomalies, dtype=int))
    if anomalies.size and (anomalies.min() < 0 or anomalies.max() >= config_.n):
        raise InputValidationError(f"anomaly indices must lie in [0, {config_.n})")
    normal = np.setdiff1d(np.arange(config_.n), anomalies)
    if anomalies.size == 0 or normal.size == 0:
        raise InputValidationError("confusion ratio needs both anomalous and non-anomalous objects")

    spreads = _object_spreads(config_)
    numerator = float(spreads[anomalies].mean())
    denominator = float(spreads[normal].mean())
    if denominator == 0:
        if numerator == 0:
            return 1.0
        logger.warning("confusion ratio: non-anomalous spread is 0, returning +inf")
        return math.inf
    return numerator / denominator


def relative_error_trace(result: EmbeddingResult, k: int, mask: Optional[np.ndarray] = None) -> float:
    """
    ||X_final - X_k||_F / ||X_final||_F for the k-th iterate of a traced run.

    Args:
        result (EmbeddingResult): A run solved with ``keep_trace=True``
        k (int): Iterate to compare, 0 being the start
        mask (np.ndarray): Optional (m, n) boolean selection of the points to compare

    Raises:
        InputValidationError: If the run kept no iterates, ``k`` is out of range
            or the mask has the wrong shape
    """
    if result.iterates is None:
        raise InputValidationError("relative error needs a run solved with keep_trace=True")
    if not 0 <= k <= result.iterations:
        raise InputValidationError(f"iterate {k} out of range 0..{result.iterations}")
    final = result.config.points
    iterate = result.iterates[k].points
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != final.shape[:2]:
            raise InputValidationError(f"mask must have shape {final.shape[:2]}, got {mask.shape}")
        final, iterate = final[mask], iterate[mask]
    norm = np.linalg.norm(final)
    if norm == 0:
        return 0.0 if np.linalg.norm(iterate) == 0 else math.inf
    return float(np.linalg.norm(final - iterate) / norm)


class MetricsReport(BaseModel):
    """Summary of one embedding run, written as JSON by the CLI."""

    # an unbounded confusion ratio is written as Infinity, not null
    model_config = ConfigDict(ser_json_inf_nan="constants")

    final_normalized_stress: Optional[float] = Field(default=None, ge=0)
    iterations: Optional[int] = Field(default=None, ge=0)
    step_times: List[float] = Field(default_factory=list)
    ari: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    confusion_ratio: Optional[float] = Field(default=None, ge=0)
    algorithm: Optional[str] = None
    seed: Optional[int] = None

    @property
    def mean_step_time(self) -> float:
        return float(np.mean(self.step_times)) if self.step_times else 0.0

    @classmethod
    def from_result(cls, result: EmbeddingResult, **extra) -> "MetricsReport":
        if any(t < 0 for t in result.step_times):
            raise InputValidationError("negative step time recorded")
        return cls(
            final_normalized_stress=result.final_normalized_stress,
            iterations=result.iterations,
            step_times=result.step_times,
            algorithm=result.algorithm,
            **extra,
        )


def clustering_ari(
    config_: Configuration,
    labels: Optional[Sequence[int]] = None,
    anomalies: Sequence[int] = (),
    seed: int = 0,
) -> float:
    """
    ARI of k-means on the embedded points against per-object ground truth.

    ``labels`` gives one label per object (object identity by default) and
    is tiled over the modalities. Anomalous objects are left out; k is the
    number of distinct labels that remain.
    """
    labels = np.arange(config_.n) if labels is None else np.asarray(labels)
    if labels.shape != (config_.n,):
        raise InputValidationError(f"expected {config_.n} object labels, got {labels.size}")
    keep = np.setdiff1d(np.arange(config_.n), np.asarray(anomalies, dtype=int))
    points = config_.points[:, keep, :].reshape(-1, config_.d)
    truth = np.tile(labels[keep], config_.m)
    predicted = kmeans(points, np.unique(labels[keep]).size, seed)
    return adjusted_rand_index(truth, predicted)
