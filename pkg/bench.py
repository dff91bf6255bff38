"""
Per-iteration timing of dense JOFC against fJOFC.

Both algorithms start every replicate from the same imputed-omnibus cMDS
configuration. Only the Guttman step call is timed; initialization and
stress bookkeeping are excluded.
"""

import itertools
import logging
import math
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config import split_list
from embed_core import (
    Configuration,
    OmnibusProblem,
    dense_laplacian_pseudoinverse,
    dense_omnibus,
    guttman_step_fast,
    guttman_step_reference,
)
from errors import InputValidationError
from initialization import imputed_omnibus_init
from simulation import generate_matched
from weights import UniformWeights, dense_weight_matrix, script_w_inverse

# Set up logging
logger = logging.getLogger(__name__)

ALGORITHMS = ("jofc", "fjofc")


class BenchTiming:
    """Per-step wall times of one algorithm over all replicates of a cell."""

    def __init__(self, seconds: List[float]):
        self.seconds = seconds

    def mean(self) -> float:
        return float(np.mean(self.seconds))

    def stderr(self) -> float:
        if len(self.seconds) < 2:
            return 0.0
        return float(np.std(self.seconds, ddof=1) / math.sqrt(len(self.seconds)))

    def min(self) -> float:
        return min(self.seconds)

    def max(self) -> float:
        return max(self.seconds)

    def __str__(self) -> str:
        return f"Mean: {self.mean():.6g} s\nStderr: {self.stderr():.3g} s\nMin: {self.min():.6g} s\nMax: {self.max():.6g} s"


class BenchGrid(BaseModel):
    """Grid of (n, m) cells, read from a KEY=VALUE file."""

    model_config = ConfigDict(extra="forbid")

    n_values: List[int]
    m_values: List[int]
    replicates: int = Field(default=3, ge=1)
    iterations: int = Field(default=5, ge=1)
    d: int = Field(default=2, ge=1)
    w: float = Field(default=1.0, gt=0)
    dim: int = Field(default=2, ge=1)
    seed: int = 0
    output: Optional[Path] = None

    @classmethod
    def from_file(cls, path: Path) -> "BenchGrid":
        """
        Read N_VALUES, M_VALUES, REPLICATES, ITERATIONS, D, W, DIM, SEED, OUTPUT.

        N_VALUES and M_VALUES are comma-separated lists.
        """
        if not Path(path).is_file():
            raise InputValidationError(f"Benchmark grid file not found: {path}")
        raw = {key.lower(): value for key, value in dotenv_values(path).items() if value is not None}
        for key in ("n_values", "m_values"):
            if key in raw:
                raw[key] = split_list(raw[key])
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise InputValidationError(f"Invalid benchmark grid {path}: {e}") from e

    def cells(self):
        return list(itertools.product(self.n_values, self.m_values))


def time_steps(step: Callable[[Configuration], Configuration], start: Configuration, iterations: int) -> List[float]:
    """Run ``iterations`` steps from ``start`` and return the wall time of each call."""
    times = []
    current = start
    for _ in range(iterations):
        started = time.monotonic()
        current = step(current)
        times.append(time.monotonic() - started)
    return times


def _time_cell(problem: OmnibusProblem, spec: UniformWeights, d: int, iterations: int) -> Dict[str, List[float]]:
    n, m = problem.n, problem.m
    start = imputed_omnibus_init(problem, d)

    l_pinv = dense_laplacian_pseudoinverse(spec, n, m)
    weight_matrix = dense_weight_matrix(spec, n, m)
    omnibus = dense_omnibus(problem)
    w_inverse = script_w_inverse(spec, n, m)

    return {
        "jofc": time_steps(
            lambda X: guttman_step_reference(X, problem, spec, l_pinv, weight_matrix, omnibus), start, iterations
        ),
        "fjofc": time_steps(lambda X: guttman_step_fast(X, problem, spec, w_inverse), start, iterations),
    }


def _speedup(timings: Dict[str, BenchTiming]) -> float:
    fast = timings["fjofc"].mean()
    return timings["jofc"].mean() / fast if fast > 0 else float("nan")


def bench(grid: BenchGrid) -> pd.DataFrame:
    """
    Time both algorithms on every cell of the grid.

    Cells run one after another. The per-step mean and standard error pool
    all steps of all replicates.

    Returns:
        pd.DataFrame: One row per (n, m, algorithm) with columns n, m,
            algorithm, replicates, iterations, mean_step_seconds,
            stderr_step_seconds, min_step_seconds, max_step_seconds and
            speedup (JOFC mean over fJOFC mean, on the fJOFC rows)
    """
    spec = UniformWeights(w=grid.w)
    rows = []
    for n, m in grid.cells():
        logger.info(f"bench cell n={n}, m={m}")
        samples: Dict[str, List[float]] = {name: [] for name in ALGORITHMS}
        for replicate in range(grid.replicates):
            problem, _ = generate_matched(n, m, grid.dim, grid.seed + replicate)
            for name, times in _time_cell(problem, spec, grid.d, grid.iterations).items():
                samples[name].extend(times)

        timings = {name: BenchTiming(samples[name]) for name in ALGORITHMS}
        for name in ALGORITHMS:
            timing = timings[name]
            logger.debug(f"{name} n={n} m={m}\n{timing}")
            rows.append(
                {
                    "n": n,
                    "m": m,
                    "algorithm": name,
                    "replicates": grid.replicates,
                    "iterations": grid.iterations,
                    "mean_step_seconds": timing.mean(),
                    "stderr_step_seconds": timing.stderr(),
                    "min_step_seconds": timing.min(),
                    "max_step_seconds": timing.max(),
                    "speedup": _speedup(timings) if name == "fjofc" else float("nan"),
                }
            )

    table = pd.DataFrame(rows)
    if grid.output is not None:
        grid.output.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(grid.output, index=False, float_format="%.17g")
        logger.info(f"bench table written to {grid.output}")
    return table


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise InputValidationError("loglog_slope needs at least two (x, y) pairs of equal length")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InputValidationError("loglog_slope needs positive values")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)
