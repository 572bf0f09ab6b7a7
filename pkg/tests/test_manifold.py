import numpy as np
import pytest

from prost.errors import ConfigError, DimensionError
from prost.manifold import (
    Rank1Direction,
    SubspaceBasis,
    geodesic_step,
    project_rank_one,
    random_orthonormal,
    tangent_project,
)


def test_random_orthonormal_unit_vector():
    basis = random_orthonormal(2, 1, seed=3)
    assert np.linalg.norm(basis.data) == pytest.approx(1.0, abs=1e-12)


def test_random_orthonormal_gram_identity():
    basis = random_orthonormal(20, 3, seed=5)
    gram = basis.data.T @ basis.data
    assert np.linalg.norm(gram - np.eye(3)) < 1e-12


def test_random_orthonormal_deterministic():
    a = random_orthonormal(20, 3, seed=7)
    b = random_orthonormal(20, 3, seed=7)
    np.testing.assert_array_equal(a.data, b.data)


def test_random_orthonormal_rejects_bad_dims():
    with pytest.raises(DimensionError):
        random_orthonormal(5, 5, seed=0)
    with pytest.raises(DimensionError):
        random_orthonormal(5, 0, seed=0)


def test_basis_rejects_non_orthonormal():
    with pytest.raises(DimensionError):
        SubspaceBasis(np.ones((4, 2)))


def test_tangent_project_of_basis_is_zero():
    basis = random_orthonormal(10, 2, seed=1)
    assert np.linalg.norm(tangent_project(basis, basis.data)) < 1e-12


def test_tangent_project_idempotent():
    rng = np.random.default_rng(2)
    basis = random_orthonormal(15, 3, seed=2)
    h = rng.standard_normal((15, 3))
    once = tangent_project(basis, h)
    twice = tangent_project(basis, once)
    np.testing.assert_allclose(twice, once, atol=1e-12)


def test_tangent_project_matches_dense_projector():
    rng = np.random.default_rng(3)
    basis = random_orthonormal(20, 3, seed=3)
    h = rng.standard_normal((20, 3))
    dense = (np.eye(20) - basis.data @ basis.data.T) @ h
    np.testing.assert_allclose(tangent_project(basis, h), dense, atol=1e-12)
    assert np.linalg.norm(basis.data.T @ tangent_project(basis, h)) < 1e-10


def test_rank_one_degenerate_for_in_span_vector():
    rng = np.random.default_rng(4)
    basis = random_orthonormal(12, 3, seed=4)
    ambient = basis.data @ rng.standard_normal(3)
    direction = project_rank_one(basis, ambient, rng.standard_normal(3))
    assert direction.is_zero and direction.scale == 0.0


def test_rank_one_reconstructs_projected_outer_product():
    rng = np.random.default_rng(5)
    basis = random_orthonormal(20, 3, seed=5)
    ambient = rng.standard_normal(20)
    coords = rng.standard_normal(3)
    direction = project_rank_one(basis, ambient, coords)
    dense = np.outer(tangent_project(basis, ambient), coords)
    rebuilt = direction.scale * np.outer(direction.left, direction.right)
    np.testing.assert_allclose(rebuilt, dense, atol=1e-10)
    assert np.linalg.norm(basis.data @ (basis.data.T @ direction.left)) < 1e-10


def test_rank_one_matches_dense_svd():
    rng = np.random.default_rng(6)
    basis = random_orthonormal(20, 3, seed=6)
    ambient = rng.standard_normal(20)
    coords = rng.standard_normal(3)
    direction = project_rank_one(basis, ambient, coords)
    singulars = np.linalg.svd(
        np.outer(tangent_project(basis, ambient), coords), compute_uv=False
    )
    assert direction.scale == pytest.approx(singulars[0], abs=1e-10)
    assert np.all(singulars[1:] < 1e-10)


def _random_direction(basis, rng):
    return project_rank_one(
        basis, rng.standard_normal(basis.m), rng.standard_normal(basis.k)
    )


def test_geodesic_zero_step_returns_same_basis():
    rng = np.random.default_rng(7)
    basis = random_orthonormal(10, 2, seed=7)
    direction = _random_direction(basis, rng)
    stepped = geodesic_step(basis, direction, 0.0)
    assert stepped is basis


def test_geodesic_zero_direction_returns_same_basis():
    basis = random_orthonormal(10, 2, seed=8)
    zero = Rank1Direction(left=np.zeros(10), right=np.zeros(2), scale=0.0)
    assert geodesic_step(basis, zero, 0.5) is basis


def test_geodesic_preserves_orthonormality():
    rng = np.random.default_rng(9)
    for trial in range(200):
        basis = random_orthonormal(50, 5, seed=trial)
        direction = _random_direction(basis, rng)
        stepped = geodesic_step(basis, direction, rng.uniform(0.0, 1.0))
        gram = stepped.data.T @ stepped.data
        assert np.linalg.norm(gram - np.eye(5)) < 1e-8


def test_geodesic_matches_finite_difference_of_descent_direction():
    rng = np.random.default_rng(10)
    basis = random_orthonormal(20, 3, seed=11)
    direction = _random_direction(basis, rng)
    t = 1e-6
    stepped = geodesic_step(basis, direction, t, descend=True)
    secant = (stepped.data - basis.data) / t
    expected = -direction.scale * np.outer(direction.left, direction.right)
    rel = np.linalg.norm(secant - expected) / np.linalg.norm(expected)
    assert rel < 1e-4


def test_geodesic_rejects_negative_step():
    rng = np.random.default_rng(11)
    basis = random_orthonormal(8, 2, seed=12)
    with pytest.raises(ConfigError):
        geodesic_step(basis, _random_direction(basis, rng), -0.1)


def test_geodesic_chain_reorthonormalizes():
    # long chains stay on the manifold thanks to the periodic QR
    rng = np.random.default_rng(12)
    basis = random_orthonormal(30, 4, seed=13)
    for _ in range(1500):
        direction = _random_direction(basis, rng)
        basis = geodesic_step(basis, direction, 0.05)
    gram = basis.data.T @ basis.data
    assert np.linalg.norm(gram - np.eye(4)) < 1e-8
