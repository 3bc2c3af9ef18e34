"""Tests for the manifold geometry layer."""
import numpy as np
import pytest

from src.models.errors import DimensionMismatchError, FocalPointError, MembershipError
from src.models.manifold import ManifoldSpec
from src.services.manifold_geometry import ManifoldGeometry, to_matrices, to_vectors

SPECS = {
    'sphere': ManifoldSpec.sphere(3),
    'so2': ManifoldSpec.special_orthogonal(2),
    'so3': ManifoldSpec.special_orthogonal(3),
    'symmetric': ManifoldSpec.symmetric(2),
    'grassmann': ManifoldSpec.grassmann(3, 2),
    'fixed-rank': ManifoldSpec.fixed_rank(3, 2, 1),
    'solution-sphere': ManifoldSpec.solution('unit-sphere', D=3),
    'solution-grassmann': ManifoldSpec.solution('grassmann', p=3, r=1),
    'product': ManifoldSpec.product(ManifoldSpec.ambient(2), ManifoldSpec.sphere(3)),
}
CASES = 100


def _point(geometry, rng):
    if geometry.spec.kind == 'solution':
        # project a random vector of the matching plain manifold onto q = 0
        if geometry.spec.params['constraint'] == 'unit-sphere':
            x = rng.standard_normal(3)
            return x / np.linalg.norm(x)
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        return to_vectors(np.outer(u, u))
    return geometry.random_point(rng)


@pytest.fixture(params=sorted(SPECS))
def geometry(request):
    return ManifoldGeometry.for_spec(SPECS[request.param])


def test_random_points_are_members(geometry, rng):
    for _ in range(5):
        theta = _point(geometry, rng)
        assert geometry.is_member(theta)


def test_tangent_projector_is_orthogonal_projector(geometry, rng):
    for _ in range(CASES):
        theta = _point(geometry, rng)
        P = geometry.tangent_projector(theta)
        np.testing.assert_allclose(P @ P, P, atol=1e-10)
        np.testing.assert_allclose(P, P.T, atol=1e-12)
        assert np.trace(P) == pytest.approx(geometry.intrinsic_dim, abs=1e-8)


def test_tangent_basis_is_orthonormal_frame(geometry, rng):
    theta = _point(geometry, rng)
    basis = geometry.tangent_basis(theta)
    assert basis.frame.shape == (geometry.ambient_dim, geometry.intrinsic_dim)
    np.testing.assert_allclose(basis.frame.T @ basis.frame, np.eye(basis.dim), atol=1e-10)
    P = geometry.tangent_projector(theta)
    np.testing.assert_allclose(P @ basis.frame, basis.frame, atol=1e-10)


def test_tangent_basis_is_deterministic(geometry, rng):
    theta = _point(geometry, rng)
    first = geometry.tangent_basis(theta).frame
    second = geometry.tangent_basis(theta.copy()).frame
    np.testing.assert_array_equal(first, second)


def test_phi_at_zero_is_identity(geometry, rng):
    theta = _point(geometry, rng)
    y, ok = geometry.phi(theta, np.zeros(geometry.ambient_dim))
    assert ok
    np.testing.assert_array_equal(y, theta)


def test_phi_psi_round_trip(geometry, rng):
    for _ in range(CASES):
        theta = _point(geometry, rng)
        v = geometry.random_tangent(theta, rng, scale=0.2)
        y, ok = geometry.phi(theta, v)
        assert ok
        assert geometry.is_member(y)
        np.testing.assert_allclose(geometry.psi(theta, y).coords, v.coords, atol=1e-8 * (1.0 + np.linalg.norm(v.coords)))


def test_phi_differential_at_zero_is_identity(geometry, rng):
    t = 1e-4
    for _ in range(CASES):
        theta = _point(geometry, rng)
        v = geometry.random_tangent(theta, rng, scale=1.0).coords
        forward, ok_forward = geometry.phi(theta, t * v)
        backward, ok_backward = geometry.phi(theta, -t * v)
        assert ok_forward and ok_backward
        np.testing.assert_allclose((forward - backward) / (2 * t), v, atol=1e-5)


def test_retraction_stays_on_manifold(geometry, rng):
    theta = _point(geometry, rng)
    for scale in (1e-3, 0.1, 0.3):
        y = geometry.retract(theta, geometry.random_tangent(theta, rng, scale))
        assert geometry.is_member(y)


def test_phi_beyond_trust_radius_fails():
    geometry = ManifoldGeometry.for_spec(ManifoldSpec.sphere(3))
    theta = np.array([0.0, 0.0, 1.0])
    y, ok = geometry.phi(theta, np.array([0.95, 0.0, 0.0]))
    assert not ok
    np.testing.assert_array_equal(y, theta)


def test_trust_radius_override():
    geometry = ManifoldGeometry.for_spec(ManifoldSpec.sphere(3), trust_radius=0.1)
    y, ok = geometry.phi(np.array([0.0, 0.0, 1.0]), np.array([0.2, 0.0, 0.0]))
    assert not ok


def test_sphere_phi_closed_form():
    geometry = ManifoldGeometry.for_spec(ManifoldSpec.sphere(3))
    theta = np.array([1.0, 0.0, 0.0])
    y, ok = geometry.phi(theta, np.array([0.0, 0.6, 0.0]))
    assert ok
    np.testing.assert_allclose(y, [0.8, 0.6, 0.0], atol=1e-15)


def test_membership_errors():
    geometry = ManifoldGeometry.for_spec(ManifoldSpec.sphere(3))
    with pytest.raises(MembershipError):
        geometry.check_point(np.array([1.0, 1.0, 0.0]))
    with pytest.raises(DimensionMismatchError):
        geometry.check_point(np.array([1.0, 0.0]))
    assert not geometry.is_member(np.array([1.0, 0.0]))


def test_project_sphere_origin_is_focal():
    geometry = ManifoldGeometry.for_spec(ManifoldSpec.sphere(3))
    with pytest.raises(FocalPointError):
        geometry.project_to_manifold(np.zeros(3))


def test_project_so2_fixes_reflection():
    geometry = ManifoldGeometry.for_spec(ManifoldSpec.special_orthogonal(2))
    projected = geometry.project_to_manifold(to_vectors(np.diag([2.0, -1.0])))
    np.testing.assert_allclose(projected, [1.0, 0.0, 0.0, 1.0], atol=1e-12)


def test_project_grassmann_and_tie():
    geometry = ManifoldGeometry.for_spec(ManifoldSpec.grassmann(3, 2))
    projected = geometry.project_to_manifold(to_vectors(np.diag([3.0, 2.0, 1.0])))
    np.testing.assert_allclose(projected, to_vectors(np.diag([1.0, 1.0, 0.0])), atol=1e-12)
    with pytest.raises(FocalPointError):
        geometry.project_to_manifold(to_vectors(np.eye(3)))


def test_project_fixed_rank():
    geometry = ManifoldGeometry.for_spec(ManifoldSpec.fixed_rank(3, 2, 1))
    x = to_vectors(np.array([[3.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
    np.testing.assert_allclose(geometry.project_to_manifold(x), [3.0, 0, 0, 0, 0, 0], atol=1e-12)
    with pytest.raises(FocalPointError):
        geometry.project_to_manifold(np.zeros(6))


def test_vectorization_is_column_major():
    M = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    x = to_vectors(M)
    np.testing.assert_array_equal(x, [1.0, 3.0, 5.0, 2.0, 4.0, 6.0])
    np.testing.assert_array_equal(to_matrices(x, 3, 2), M)


def test_product_acts_blockwise(rng):
    geometry = ManifoldGeometry.for_spec(SPECS['product'])
    theta = np.array([0.5, -1.0, 0.0, 0.0, 1.0])
    assert geometry.intrinsic_dim == 4
    v = np.array([0.1, 0.2, 0.3, 0.0, 0.0])
    y, ok = geometry.phi(theta, v)
    assert ok
    np.testing.assert_allclose(y[:2], [0.6, -0.8])
    np.testing.assert_allclose(y[2:], [0.3, 0.0, np.sqrt(1 - 0.09)])


@pytest.mark.parametrize('spec', [SPECS['grassmann'], SPECS['fixed-rank'], SPECS['so3']])
def test_newton_phi_matches_gradient_phi(spec, rng):
    gradient = ManifoldGeometry.for_spec(spec)
    newton = ManifoldGeometry.for_spec(spec, phi_method='newton')
    theta = gradient.random_point(rng)
    v = gradient.random_tangent(theta, rng, scale=0.2)
    y_gradient, ok_gradient = gradient.phi(theta, v)
    y_newton, ok_newton = newton.phi(theta, v)
    assert ok_gradient and ok_newton
    np.testing.assert_allclose(y_newton, y_gradient, atol=1e-7)


def test_unknown_phi_method():
    with pytest.raises(ValueError):
        ManifoldGeometry.for_spec(ManifoldSpec.sphere(3), phi_method='bisection')


def test_solution_sphere_matches_sphere(rng):
    solution = ManifoldGeometry.for_spec(SPECS['solution-sphere'])
    sphere = ManifoldGeometry.for_spec(SPECS['sphere'])
    theta = np.array([0.0, 0.6, 0.8])
    np.testing.assert_allclose(solution.tangent_projector(theta), sphere.tangent_projector(theta), atol=1e-10)
    v = sphere.random_tangent(theta, rng, scale=0.3)
    np.testing.assert_allclose(solution.phi(theta, v)[0], sphere.phi(theta, v)[0], atol=1e-9)


def test_spec_round_trip_through_dict():
    spec = SPECS['product']
    assert ManifoldSpec.from_dict(spec.to_dict()) == spec
