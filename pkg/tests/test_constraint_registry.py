"""Tests for the built-in solution-manifold constraints."""
import numpy as np
import pytest

from src.models.errors import ConfigError
from src.services.constraint_registry import ConstraintRegistry, vec_index


@pytest.mark.parametrize('name, params', [
    ('unit-sphere', {'D': 4}),
    ('symmetric', {'p': 3}),
    ('grassmann', {'p': 3, 'r': 1}),
])
def test_jacobian_matches_finite_differences(name, params, rng):
    constraint = ConstraintRegistry.get(name, **params)
    x = rng.standard_normal(constraint.ambient_dim)
    J = constraint.jacobian(x)
    t = 1e-6
    for k in range(constraint.ambient_dim):
        e = np.zeros(constraint.ambient_dim)
        e[k] = t
        column = (constraint.value(x + e) - constraint.value(x - e)) / (2 * t)
        np.testing.assert_allclose(J[:, k], column, atol=1e-6)


def test_grassmann_rank_at_a_projector():
    constraint = ConstraintRegistry.get('grassmann', p=3, r=1)
    u = np.array([1.0, 2.0, 2.0]) / 3.0
    x = np.outer(u, u).T.reshape(-1)
    np.testing.assert_allclose(constraint.value(x), 0.0, atol=1e-12)
    assert np.linalg.matrix_rank(constraint.jacobian(x), tol=1e-8) == constraint.expected_rank == 7


def test_symmetric_codimension():
    assert ConstraintRegistry.get('symmetric', p=4).codimension == 6
    assert vec_index(1, 2, 3) == 7


def test_unknown_constraint_and_bad_parameters():
    with pytest.raises(ConfigError):
        ConstraintRegistry.get('stiefel', p=3, r=2)
    with pytest.raises(ConfigError):
        ConstraintRegistry.get('unit-sphere', p=3)
