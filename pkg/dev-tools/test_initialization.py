"""
Tests for cMDS, Procrustes alignment and the two JOFC initializations.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import ortho_group

from conftest import make_problem
from embed_core import OmnibusProblem, stress_components
from errors import InputValidationError, SizeCapExceededError
from initialization import (
    averaged_procrustes_init,
    cmds,
    imputed_omnibus,
    imputed_omnibus_init,
    orthogonal_procrustes,
)
from matrix_core import euclidean_distance_matrix
from weights import UniformWeights


def test_cmds_two_points_on_a_line():
    X = cmds(np.array([[0.0, 2.0], [2.0, 0.0]]), 1)
    assert_allclose(np.sort(X[:, 0]), [-1.0, 1.0])


def test_cmds_recovers_planar_distances(rng):
    points = rng.normal(size=(10, 2))
    delta = euclidean_distance_matrix(points)
    X = cmds(delta, 2)
    assert_allclose(euclidean_distance_matrix(X), delta, atol=1e-8)
    assert np.abs(X.mean(axis=0)).max() < 1e-10


def test_cmds_zero_input():
    assert_allclose(cmds(np.zeros((4, 4)), 2), 0)


def test_cmds_rejects_large_dimension():
    with pytest.raises(InputValidationError):
        cmds(np.zeros((3, 3)), 4)


def test_procrustes_recovers_rotation(rng):
    target = rng.normal(size=(12, 3))
    target -= target.mean(axis=0)
    Q = ortho_group.rvs(3, random_state=7)
    assert_allclose(orthogonal_procrustes(target @ Q, target), target, atol=1e-9)
    assert_allclose(orthogonal_procrustes(target, target), target, atol=1e-12)


def test_procrustes_is_optimal_against_random_rotations(rng):
    source = rng.normal(size=(15, 2))
    target = rng.normal(size=(15, 2))
    fit = orthogonal_procrustes(source, target)
    centered_source = source - source.mean(axis=0)
    centered_target = target - target.mean(axis=0)
    best = np.linalg.norm(fit - centered_target)
    for seed in range(100):
        R = ortho_group.rvs(2, random_state=seed)
        assert best <= np.linalg.norm(centered_source @ R - centered_target) + 1e-12


def test_procrustes_preserves_distances(rng):
    source = rng.normal(size=(9, 2))
    fit = orthogonal_procrustes(source, rng.normal(size=(9, 2)))
    assert_allclose(euclidean_distance_matrix(fit), euclidean_distance_matrix(source), atol=1e-10)


def test_averaged_init_identical_modalities(rng):
    delta = euclidean_distance_matrix(rng.normal(size=(8, 2)))
    init = averaged_procrustes_init(OmnibusProblem.from_matrices([delta] * 3), 2)
    for block in init.points[1:]:
        assert_allclose(block, init.points[0], atol=1e-9)


def test_averaged_init_single_modality_is_cmds(rng):
    delta = euclidean_distance_matrix(rng.normal(size=(7, 2)))
    init = averaged_procrustes_init(OmnibusProblem.from_matrices([delta]), 2)
    assert_allclose(init.points[0], cmds(delta, 2), atol=1e-9)


def test_averaged_init_is_commensurate(rng):
    problem = make_problem(rng, 3, 20, jitter=0.05)
    spec = UniformWeights(w=1.0)
    init = averaged_procrustes_init(problem, 2)
    _, aligned = stress_components(init, problem, spec)
    random_start = type(init)(rng.normal(size=init.points.shape) * np.abs(init.points).mean())
    _, scattered = stress_components(random_start, problem, spec)
    assert aligned < scattered


def test_inits_are_centered(rng):
    problem = make_problem(rng, 3, 9)
    for init in (averaged_procrustes_init(problem, 2), imputed_omnibus_init(problem, 2)):
        assert np.abs(init.points.mean(axis=1)).max() < 1e-10


def test_imputed_omnibus_layout(rng):
    problem = make_problem(rng, 2, 4)
    omnibus = imputed_omnibus(problem)
    off_block = omnibus[:4, 4:]
    assert_allclose(np.diag(off_block), 0)
    expected = 0.5 * (problem.modalities[0] + problem.modalities[1])
    mask = ~np.eye(4, dtype=bool)
    assert_allclose(off_block[mask], expected[mask])
    assert_allclose(omnibus, omnibus.T)


def test_imputed_init_recovers_stacked_copies(rng):
    points = rng.normal(size=(6, 2))
    delta = euclidean_distance_matrix(points)
    init = imputed_omnibus_init(OmnibusProblem.from_matrices([delta, delta]), 2)
    for block in init.points:
        assert_allclose(euclidean_distance_matrix(block), delta, atol=1e-6)
    assert_allclose(init.points[0], init.points[1], atol=1e-6)


def test_imputed_init_single_modality_is_cmds(rng):
    delta = euclidean_distance_matrix(rng.normal(size=(6, 2)))
    init = imputed_omnibus_init(OmnibusProblem.from_matrices([delta]), 2)
    assert_allclose(init.points[0], cmds(delta, 2), atol=1e-12)


def test_imputed_init_size_cap(monkeypatch, rng):
    monkeypatch.setenv("JOFC_MAX_DENSE_SIZE", "5")
    with pytest.raises(SizeCapExceededError):
        imputed_omnibus_init(make_problem(rng, 2, 4), 2)
