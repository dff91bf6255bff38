"""
Tests for raw stress, B blocks and the fast / reference Guttman iterations.
"""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError
from scipy.stats import ortho_group

from conftest import make_configuration, make_problem
from embed_core import (
    Configuration,
    OmnibusProblem,
    SolveOptions,
    b_blocks,
    dense_omnibus,
    fjofc_embed,
    guttman_step_fast,
    guttman_step_reference,
    jofc_embed_reference,
    normalize_problem,
    raw_stress,
    stress_components,
    stress_gradient,
)
from errors import InputValidationError, SizeCapExceededError
from matrix_core import euclidean_distance_matrix
from weights import GeneralSymmetricWeights, ProductWeights, UniformWeights, dense_weight_matrix


def _spec_for(kind: str, m: int, w: float):
    if kind == "uniform":
        return UniformWeights(w=w)
    if kind == "general":
        matrix = np.full((m, m), w) + np.diag(np.linspace(0.5, 1.5, m))
        return GeneralSymmetricWeights(matrix=matrix)
    return ProductWeights(weights=tuple(np.linspace(0.5, 1.5, m) * w), c=1.3)


def _brute_force_stress(config_: Configuration, problem: OmnibusProblem, spec) -> float:
    W = dense_weight_matrix(spec, problem.n, problem.m)
    omnibus = dense_omnibus(problem)
    D = euclidean_distance_matrix(config_.stacked())
    upper = np.triu_indices_from(W, k=1)
    return float(np.sum(W[upper] * (omnibus[upper] - D[upper]) ** 2))


def test_problem_validation():
    with pytest.raises(InputValidationError):
        OmnibusProblem.from_matrices([np.array([[0.0, 1.0], [2.0, 0.0]])])
    with pytest.raises(InputValidationError):
        OmnibusProblem.from_matrices([np.array([[0.0, -1.0], [-1.0, 0.0]])])
    with pytest.raises(InputValidationError):
        OmnibusProblem.from_matrices([np.zeros((3, 3)), np.zeros((4, 4))])
    with pytest.raises(InputValidationError):
        OmnibusProblem.from_matrices([np.array([[1.0, 1.0], [1.0, 0.0]])])


def test_stress_zero_for_perfect_embedding(rng):
    X = rng.normal(size=(6, 2))
    problem = OmnibusProblem.from_matrices([euclidean_distance_matrix(X)] * 3)
    config_ = Configuration(np.stack([X] * 3))
    assert raw_stress(config_, problem, UniformWeights(w=1.0)) == pytest.approx(0.0, abs=1e-20)


def test_single_modality_is_classical_stress(rng):
    problem = make_problem(rng, m=1, n=7)
    config_ = make_configuration(rng, 1, 7, 2)
    D = euclidean_distance_matrix(config_.points[0])
    upper = np.triu_indices(7, k=1)
    expected = np.sum((problem.modalities[0][upper] - D[upper]) ** 2)
    assert raw_stress(config_, problem, UniformWeights(w=5.0)) == pytest.approx(expected)


@pytest.mark.parametrize("kind", ["uniform", "general", "product"])
def test_stress_matches_dense_omnibus(rng, kind):
    problem = make_problem(rng, m=3, n=6)
    config_ = make_configuration(rng, 3, 6, 2)
    spec = _spec_for(kind, 3, 1.0)
    assert raw_stress(config_, problem, spec) == pytest.approx(_brute_force_stress(config_, problem, spec))
    fidelity, commensurability = stress_components(config_, problem, spec)
    assert fidelity + commensurability == pytest.approx(raw_stress(config_, problem, spec))


def test_stress_invariant_under_rigid_motion(rng, small_problem):
    config_ = make_configuration(rng, 3, 6, 2)
    spec = UniformWeights(w=1.0)
    base = raw_stress(config_, small_problem, spec)
    shifted = Configuration(config_.points + np.array([3.0, -1.0]))
    rotated = Configuration(config_.points @ ortho_group.rvs(2, random_state=3))
    assert raw_stress(shifted, small_problem, spec) == pytest.approx(base, abs=1e-9)
    assert raw_stress(rotated, small_problem, spec) == pytest.approx(base, abs=1e-9)


def test_b_blocks_properties(rng, small_problem):
    config_ = make_configuration(rng, 3, 6, 2)
    for B in b_blocks(config_, small_problem, UniformWeights(w=1.0)):
        assert_allclose(B, B.T)
        assert_allclose(B.sum(axis=1), 0, atol=1e-12)


def test_b_block_zero_distance_guard():
    delta = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    problem = OmnibusProblem.from_matrices([delta])
    config_ = Configuration(np.array([[[0.0], [0.0], [1.0]]]))
    B = b_blocks(config_, problem, UniformWeights(w=1.0))[0]
    assert B[0, 1] == 0.0
    assert B[0, 2] == pytest.approx(-2.0)
    assert np.all(np.isfinite(B))


def test_b_block_zero_dissimilarity():
    problem = OmnibusProblem.from_matrices([np.zeros((4, 4))])
    config_ = Configuration(np.arange(8.0).reshape(1, 4, 2))
    assert_allclose(b_blocks(config_, problem, UniformWeights(w=1.0))[0], 0)


GRID = list(itertools.product([1, 2, 3], [3, 5, 8], [1, 2, 3], [0.5, 1.0, 10.0], ["uniform", "general", "product"]))


@pytest.mark.parametrize("m,n,d,w,kind", GRID)
def test_fast_step_matches_reference(m, n, d, w, kind):
    rng = np.random.default_rng([m, n, d, int(w * 10), len(kind)])
    problem = make_problem(rng, m, n)
    config_ = make_configuration(rng, m, n, d)
    spec = _spec_for(kind, m, w)
    fast = guttman_step_fast(config_, problem, spec)
    reference = guttman_step_reference(config_, problem, spec)
    assert np.abs(fast.points - reference.points).max() < 1e-8


def test_fast_step_output_centered_and_decreasing(rng):
    spec = UniformWeights(w=1.0)
    for _ in range(100):
        problem = make_problem(rng, 3, 6)
        config_ = make_configuration(rng, 3, 6, 2)
        new = guttman_step_fast(config_, problem, spec)
        assert np.abs(new.points.mean(axis=1)).max() < 1e-9
        assert raw_stress(new, problem, spec) <= raw_stress(config_, problem, spec) + 1e-9


def test_single_modality_step_is_smacof(rng):
    problem = make_problem(rng, 1, 6)
    X = rng.normal(size=(6, 2))
    D = euclidean_distance_matrix(X)
    ratio = np.divide(problem.modalities[0], D, out=np.zeros_like(D), where=D > 0)
    B = -ratio
    np.fill_diagonal(B, ratio.sum(axis=1))
    expected = B @ X / 6
    step = guttman_step_reference(Configuration(X[None]), problem, UniformWeights(w=1.0))
    assert_allclose(step.points[0], expected - expected.mean(axis=0), atol=1e-10)


def test_reference_step_fixed_point(rng):
    X = rng.normal(size=(5, 2))
    X -= X.mean(axis=0)
    problem = OmnibusProblem.from_matrices([euclidean_distance_matrix(X)] * 2)
    config_ = Configuration(np.stack([X, X]))
    step = guttman_step_reference(config_, problem, UniformWeights(w=1.0))
    assert_allclose(step.points, config_.points, atol=1e-9)


@pytest.mark.parametrize("kind", ["uniform", "general", "product"])
def test_gradient_matches_finite_differences(rng, kind):
    h = 1e-5
    for _ in range(20):
        m, n, d = (int(v) for v in rng.integers([1, 3, 1], [4, 7, 3]))
        problem = make_problem(rng, m, n)
        config_ = make_configuration(rng, m, n, d)
        spec = _spec_for(kind, m, float(rng.uniform(0.2, 5.0)))
        gradient = stress_gradient(config_, problem, spec)
        numeric = np.zeros_like(config_.points)
        for index in np.ndindex(config_.points.shape):
            plus = config_.points.copy()
            minus = config_.points.copy()
            plus[index] += h
            minus[index] -= h
            numeric[index] = (
                raw_stress(Configuration(plus), problem, spec) - raw_stress(Configuration(minus), problem, spec)
            ) / (2 * h)
        assert np.linalg.norm(gradient - numeric) <= 1e-4 * np.linalg.norm(numeric)


def test_fjofc_recovers_exact_configuration(rng):
    X = rng.normal(size=(8, 2))
    X -= X.mean(axis=0)
    problem = OmnibusProblem.from_matrices([euclidean_distance_matrix(X)] * 3)
    start = Configuration(np.stack([X] * 3))
    result = fjofc_embed(problem, UniformWeights(w=1.0), SolveOptions(init="provided"), start)
    assert result.iterations <= 2
    assert result.final_stress < 1e-16
    assert result.terminated == "converged"


def test_fjofc_trace_non_increasing(rng):
    problem = make_problem(rng, 3, 15)
    result = fjofc_embed(problem, UniformWeights(w=1.0), SolveOptions(max_iterations=200))
    assert np.all(np.diff(result.stress_trace) <= 1e-9)
    assert len(result.step_times) == result.iterations
    assert result.algorithm == "fjofc"
    assert np.abs(result.config.points.mean(axis=1)).max() < 1e-9


def test_every_iterate_centered_and_descending(rng):
    kinds = ["uniform", "general", "product"]
    for instance in range(200):
        m, n, d = (int(v) for v in rng.integers([1, 3, 1], [4, 9, 3]))
        problem = make_problem(rng, m, n)
        spec = _spec_for(kinds[instance % 3], m, float(rng.uniform(0.2, 5.0)))
        options = SolveOptions(d=d, max_iterations=10, keep_trace=True)
        for solve in (fjofc_embed, jofc_embed_reference):
            result = solve(problem, spec, options)
            assert len(result.iterates) == result.iterations + 1
            for iterate in result.iterates:
                assert np.abs(iterate.points.mean(axis=1)).max() < 1e-9
            assert np.all(np.diff(result.stress_trace) <= 1e-9 * max(1.0, result.stress_trace[0]))


def test_min_iterations_delays_stopping(rng):
    X = rng.normal(size=(8, 2))
    X -= X.mean(axis=0)
    problem = OmnibusProblem.from_matrices([euclidean_distance_matrix(X)] * 3)
    start = Configuration(np.stack([X] * 3))
    options = SolveOptions(init="provided", min_iterations=7, max_iterations=50)
    result = fjofc_embed(problem, UniformWeights(w=1.0), options, start)
    assert result.iterations == 7
    assert result.terminated == "converged"


def test_min_iterations_cannot_exceed_max():
    with pytest.raises(ValidationError):
        SolveOptions(min_iterations=20, max_iterations=10)


def test_fjofc_matches_reference_iterates(rng):
    problem = make_problem(rng, 3, 10)
    spec = UniformWeights(w=2.0)
    options = SolveOptions(max_iterations=20, eps=1e-12, init="imputed_cmds", keep_trace=True)
    fast = fjofc_embed(problem, spec, options)
    reference = jofc_embed_reference(problem, spec, options)
    steps = min(fast.iterations, reference.iterations)
    for k in range(steps + 1):
        assert np.abs(fast.iterates[k].points - reference.iterates[k].points).max() < 1e-8


def test_parallel_matches_serial(rng):
    problem = make_problem(rng, 4, 12)
    spec = UniformWeights(w=1.0)
    serial = fjofc_embed(problem, spec, SolveOptions(max_iterations=10))
    parallel = fjofc_embed(problem, spec, SolveOptions(max_iterations=10, parallel=True, n_jobs=2))
    assert_allclose(parallel.config.points, serial.config.points, atol=1e-12)


def test_provided_init_requires_configuration(small_problem):
    with pytest.raises(InputValidationError):
        fjofc_embed(small_problem, UniformWeights(w=1.0), SolveOptions(init="provided"))


def test_reference_respects_size_cap(monkeypatch, small_problem):
    monkeypatch.setenv("JOFC_MAX_DENSE_SIZE", "10")
    with pytest.raises(SizeCapExceededError):
        jofc_embed_reference(small_problem, UniformWeights(w=1.0))


def test_normalize_problem(small_problem):
    normalized = normalize_problem(small_problem)
    for delta in normalized.modalities:
        assert np.linalg.norm(delta) == pytest.approx(1.0)
    zero = OmnibusProblem.from_matrices([np.zeros((3, 3))])
    assert_allclose(normalize_problem(zero).modalities[0], 0)
