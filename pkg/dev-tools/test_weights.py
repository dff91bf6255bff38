"""
Tests for the structured weight families and the closed-form Laplacian pseudoinverse.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from errors import InputValidationError
from matrix_core import pseudoinverse_oracle
from weights import (
    GeneralSymmetricWeights,
    ProductWeights,
    ScriptW,
    UniformWeights,
    dense_laplacian,
    dense_weight_matrix,
    kronecker_sum_inverse,
    kronecker_sum_materialize,
    laplacian_pseudoinverse_factors,
    oos_l22_inverse,
    script_w,
    script_w_inverse,
)

SPECS = [
    UniformWeights(w=0.5),
    UniformWeights(w=1.0),
    UniformWeights(w=10.0),
    GeneralSymmetricWeights(matrix=[[1.0, 0.7, 2.0], [0.7, 2.5, 0.3], [2.0, 0.3, 0.8]]),
    ProductWeights(weights=(0.5, 1.0, 2.0), c=1.0),
    ProductWeights(weights=(0.5, 1.0, 2.0), c=3.0),
]


def test_script_w_uniform_example():
    assert_allclose(script_w(UniformWeights(w=1.0), 3, 2), [[4.0, -1.0], [-1.0, 4.0]])


def test_script_w_inverse_uniform_example():
    inverse = script_w_inverse(UniformWeights(w=1.0), 3, 2)
    assert_allclose(inverse, np.array([[4.0, 1.0], [1.0, 4.0]]) / 15.0)


def test_within_and_cross_weights_per_family():
    assert_allclose(UniformWeights(w=2.0).within_weights(3), [1.0, 1.0, 1.0])
    assert_allclose(UniformWeights(w=2.0).cross_weights(2), [[0.0, 2.0], [2.0, 0.0]])

    general = GeneralSymmetricWeights(matrix=[[1.0, 0.7], [0.7, 2.5]])
    assert_allclose(general.within_weights(), [1.0, 2.5])
    assert_allclose(general.cross_weights(), [[0.0, 0.7], [0.7, 0.0]])

    product = ProductWeights(weights=(0.5, 2.0), c=3.0)
    assert_allclose(product.within_weights(), [1.5, 6.0])
    assert_allclose(product.cross_weights(), [[0.0, 1.0], [1.0, 0.0]])


def test_script_w_single_modality():
    assert_allclose(script_w(UniformWeights(w=2.0), 5, 1), [[5.0]])
    assert_allclose(script_w_inverse(UniformWeights(w=2.0), 5, 1), [[0.2]])


@pytest.mark.parametrize("spec", SPECS)
@pytest.mark.parametrize("n", [3, 5, 40])
def test_script_w_inverse_is_inverse(spec, n):
    packed = ScriptW.build(spec, n, 3)
    assert packed.identity_residual() < 1e-12
    assert packed.is_strictly_diagonally_dominant()


def test_product_inverse_matches_direct_solve():
    spec = ProductWeights(weights=(0.5, 1.0, 2.0, 4.0), c=2.0)
    assert_allclose(script_w_inverse(spec, 7), np.linalg.inv(script_w(spec, 7)), rtol=1e-12)


def test_product_weight_blocks():
    spec = ProductWeights(weights=(2.0, 3.0), c=1.5)
    W = dense_weight_matrix(spec, 3)
    assert W[0, 1] == pytest.approx(1.5 * 2.0)
    assert W[0, 3] == pytest.approx(6.0)
    assert W[0, 4] == 0.0


def test_dense_weight_matrix_uniform_blocks():
    W = dense_weight_matrix(UniformWeights(w=2.0), 3, 2)
    assert_allclose(W[:3, :3], np.ones((3, 3)) - np.eye(3))
    assert_allclose(W[:3, 3:], 2.0 * np.eye(3))
    assert_allclose(W, W.T)


def test_kronecker_sum_inverse_identity_case():
    V, Z = kronecker_sum_inverse(np.eye(2), np.zeros((2, 2)), 4)
    assert_allclose(V, np.eye(2))
    assert_allclose(Z, 0)


def test_kronecker_sum_inverse_random(rng):
    m, n = 3, 4
    A = rng.normal(size=(m, m)) + 5 * np.eye(m)
    B = 0.1 * rng.normal(size=(m, m))
    V, Z = kronecker_sum_inverse(A, B, n)
    operator = np.kron(A, np.eye(n)) + np.kron(B, np.ones((n, n)))
    assert_allclose(operator @ kronecker_sum_materialize(V, Z, n), np.eye(m * n), atol=1e-9)


@pytest.mark.parametrize("spec", SPECS)
@pytest.mark.parametrize("n", [3, 5, 8])
def test_laplacian_pseudoinverse_moore_penrose(spec, n):
    L = dense_laplacian(spec, n, 3)
    V, Z = laplacian_pseudoinverse_factors(spec, n, 3)
    P = kronecker_sum_materialize(V, Z, n)
    tol = 1e-8 * np.linalg.norm(L)
    assert_allclose(L @ P @ L, L, atol=tol)
    assert_allclose(P @ L @ P, P, atol=tol)
    assert_allclose((L @ P).T, L @ P, atol=tol)
    assert_allclose((P @ L).T, P @ L, atol=tol)
    assert_allclose(P, pseudoinverse_oracle(L), atol=1e-9)


def test_laplacian_pseudoinverse_single_modality():
    n = 4
    V, Z = laplacian_pseudoinverse_factors(UniformWeights(w=1.0), n, 1)
    assert_allclose(V, [[1 / n]])
    assert_allclose(Z, [[-1 / n ** 2]])


def test_dense_laplacian_rows_sum_to_zero():
    L = dense_laplacian(UniformWeights(w=3.0), 4, 3)
    assert_allclose(L.sum(axis=1), 0, atol=1e-12)


def test_oos_l22_inverse():
    m, n, w = 4, 9, 2.5
    L22 = (n + m * w) * np.eye(m) - w * np.ones((m, m))
    assert_allclose(L22 @ oos_l22_inverse(m, n, w), np.eye(m), atol=1e-12)


def test_invalid_specs():
    with pytest.raises(ValidationError):
        UniformWeights(w=0.0)
    with pytest.raises(ValidationError):
        GeneralSymmetricWeights(matrix=[[1.0, 2.0], [3.0, 1.0]])
    with pytest.raises(ValidationError):
        GeneralSymmetricWeights(matrix=[[1.0, -1.0], [-1.0, 1.0]])
    with pytest.raises(ValidationError):
        ProductWeights(weights=(1.0, 0.0))


def test_general_matrix_shape_and_type_rejected():
    with pytest.raises(ValidationError):
        GeneralSymmetricWeights(matrix=[1.0, 2.0])
    with pytest.raises(ValidationError):
        GeneralSymmetricWeights(matrix=[[1.0, "heavy"], ["heavy", 1.0]])
    with pytest.raises(ValidationError):
        GeneralSymmetricWeights(matrix=[[1.0, 0.5], [0.5]])
    with pytest.raises(ValidationError):
        GeneralSymmetricWeights(matrix=[[[1.0]]])


def test_modality_count_mismatch():
    spec = GeneralSymmetricWeights(matrix=[[1.0, 0.5], [0.5, 1.0]])
    with pytest.raises(InputValidationError):
        script_w(spec, 4, 3)
    with pytest.raises(InputValidationError):
        script_w(UniformWeights(w=1.0), 4)
    with pytest.raises(InputValidationError):
        script_w(UniformWeights(w=1.0), 1, 2)


def _grid_spec(kind, m, w):
    if kind == "uniform":
        return UniformWeights(w=w)
    if kind == "general":
        return GeneralSymmetricWeights(matrix=np.full((m, m), w) + np.diag(np.linspace(0.5, 1.5, m)))
    return ProductWeights(weights=tuple(np.linspace(0.5, 1.5, m) * w), c=1.3)


@pytest.mark.parametrize("kind", ["uniform", "general", "product"])
@pytest.mark.parametrize("w", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("n", [2, 4, 7])
@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_pseudoinverse_factors_match_oracle(m, n, w, kind):
    spec = _grid_spec(kind, m, w)
    V, Z = laplacian_pseudoinverse_factors(spec, n, m)
    P = kronecker_sum_materialize(V, Z, n)
    assert np.linalg.norm(P - pseudoinverse_oracle(dense_laplacian(spec, n, m))) < 1e-8


def test_kronecker_identity_random_triples(rng):
    for _ in range(50):
        m = int(rng.integers(1, 6))
        n = int(rng.integers(2, 8))
        A = rng.normal(size=(m, m)) + 5 * np.eye(m)
        B = rng.normal(size=(m, m)) / (4 * n)
        V, Z = kronecker_sum_inverse(A, B, n)
        operator = np.kron(A, np.eye(n)) + np.kron(B, np.ones((n, n)))
        assert_allclose(operator @ kronecker_sum_materialize(V, Z, n), np.eye(m * n), atol=1e-9)
