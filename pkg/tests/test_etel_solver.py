"""Tests for the tilted empirical likelihood dual solver."""
import numpy as np
import pytest

from src.models.manifold import TangentBasis
from src.services.etel_solver import EtelSolver
from src.services.loss_functions import LossFunctions
from src.services.manifold_geometry import ManifoldGeometry
from src.services.scenario_simulator import ScenarioSimulator


def _basis(D, d=None):
    d = D if d is None else d
    return TangentBasis(base=np.zeros(D), frame=np.eye(D)[:, :d])


def test_two_point_closed_form():
    solution = EtelSolver().solve(np.array([[1.0], [-2.0]]), _basis(1))
    assert solution.converged
    assert solution.lam_coords[0] == pytest.approx(np.log(2.0) / 3.0, abs=1e-10)
    np.testing.assert_allclose(solution.weights, [2.0 / 3.0, 1.0 / 3.0], atol=1e-10)
    assert solution.log_likelihood == pytest.approx(np.log(2.0 / 3.0) + np.log(1.0 / 3.0), abs=1e-10)


def test_weights_form_a_distribution_meeting_the_constraint(rng):
    solver = EtelSolver()
    for _ in range(20):
        grads = rng.standard_normal((30, 3)) + 0.3 * rng.standard_normal(3)
        solution = solver.solve(grads, _basis(3))
        assert solution.converged
        assert solution.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(solution.weights >= 0)
        assert np.linalg.norm(solution.weights @ grads) <= EtelSolver.RESIDUAL_TOLERANCE


def test_objective_never_increases(rng):
    grads = rng.standard_normal((50, 2)) + np.array([0.8, -0.5])
    history = EtelSolver().solve(grads, _basis(2)).objective_history
    assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(history, history[1:]))


def test_infeasible_constraint_gives_zero_likelihood():
    # zero is outside the convex hull of the gradients
    solution = EtelSolver().solve(np.array([[1.0], [2.0], [0.5]]), _basis(1))
    assert not solution.converged
    assert solution.log_likelihood == -np.inf


def test_zero_gradients_give_uniform_weights():
    solution = EtelSolver().solve(np.zeros((4, 2)), _basis(2))
    assert solution.converged
    np.testing.assert_allclose(solution.weights, 0.25)
    assert solution.log_likelihood == pytest.approx(4 * np.log(0.25))


def test_singular_tilted_covariance_uses_least_squares(rng):
    grads = np.column_stack([rng.standard_normal(20), np.zeros(20)])
    grads[:, 0] -= grads[:, 0].mean() - 0.2
    solution = EtelSolver().solve(grads, _basis(2))
    assert solution.used_lstsq
    assert solution.converged


def test_warm_start_reaches_the_cold_solution(rng):
    grads = rng.standard_normal((40, 2)) + np.array([0.4, 0.1])
    solver = EtelSolver()
    cold = solver.solve(grads, _basis(2))
    warm = solver.solve(grads, _basis(2), lam0=cold.lam + 0.05)
    np.testing.assert_allclose(warm.weights, cold.weights, atol=1e-9)


def test_gradients_are_read_in_the_tangent_basis():
    # ambient R^2 with a one-dimensional tangent space along the first axis
    grads = np.array([[1.0, 0.0], [-2.0, 0.0]])
    solution = EtelSolver().solve(grads, _basis(2, d=1))
    assert solution.converged
    np.testing.assert_allclose(solution.lam, [np.log(2.0) / 3.0, 0.0], atol=1e-10)


@pytest.mark.slow
def test_converged_solutions_across_scenarios():
    simulator = ScenarioSimulator()
    solver = EtelSolver()
    rng = np.random.default_rng(2024)
    cases, converged = 0, 0
    for name in simulator.names:
        truth = simulator.truth(name)
        for seed in range(10):
            dataset = simulator.generate(name, 100, seed=seed, with_truth=False)
            geometry = ManifoldGeometry.for_spec(dataset.manifold)
            loss_fn = LossFunctions(dataset.loss, geometry)
            for _ in range(10):
                theta = geometry.retract(truth, geometry.random_tangent(truth, rng, scale=0.05))
                basis = geometry.tangent_basis(theta)
                grads = loss_fn.loss_rgrads(dataset.data, theta)
                solution = solver.solve(grads, basis)
                cases += 1
                if not solution.converged:
                    continue
                converged += 1
                assert solution.weights.sum() == pytest.approx(1.0, abs=1e-12)
                assert np.all(solution.weights >= 0)
                assert np.linalg.norm(solution.weights @ grads) <= 1e-8
    assert cases == 1000
    assert converged >= 500
