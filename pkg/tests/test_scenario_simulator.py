"""Tests for the scenario registry and its generative laws."""
import numpy as np
import pytest
from scipy import stats

from src.models.errors import ScenarioError
from src.services.manifold_geometry import ManifoldGeometry, to_matrices
from src.services.scenario_simulator import ScenarioSimulator, rotation


@pytest.fixture(scope='module')
def simulator():
    return ScenarioSimulator()


def test_registry(simulator):
    assert len(simulator.names) == 10
    assert 'synthetic-parking' in simulator.names
    with pytest.raises(ScenarioError):
        simulator.get('hyperbolic')


def test_generation_is_deterministic(simulator):
    first = simulator.generate('bw-barycenter', 30, seed=4, with_truth=False)
    second = simulator.generate('bw-barycenter', 30, seed=4, with_truth=False)
    np.testing.assert_array_equal(first.data, second.data)
    third = simulator.generate('bw-barycenter', 30, seed=5, with_truth=False)
    assert not np.array_equal(first.data, third.data)


def test_sphere_raw_moments(simulator):
    n = 20000
    x = simulator.sphere_raw(np.random.default_rng(1), n)
    sd = np.sqrt(np.diag(simulator.SPHERE_COV))
    assert np.all(np.abs(x.mean(axis=0) - simulator.SPHERE_MEAN) <= 4 * sd / np.sqrt(n))


@pytest.mark.parametrize('name', ScenarioSimulator().names)
def test_observation_width(simulator, name):
    dataset = simulator.generate(name, 20, seed=0, with_truth=False)
    assert dataset.data.shape == (20, dataset.loss.observation_dim)
    assert np.all(np.isnan(dataset.truth))
    functionals = simulator.functionals(name)
    assert functionals
    assert list(functionals) == simulator.get(name).to_dict()['functionals']


def test_sphere_observations_are_unit_vectors(simulator):
    data = simulator.generate('sphere-frechet', 50, seed=3, with_truth=False).data
    np.testing.assert_allclose(np.linalg.norm(data, axis=1), 1.0)


def test_quantile_truth(simulator):
    truth = to_matrices(simulator.truth('quantile'), 3, 2)
    beta = simulator.QUANTILE_BETA
    np.testing.assert_allclose(truth[:, 1], beta)
    np.testing.assert_allclose(truth[:, 0], (1.0 + stats.norm.ppf(0.2)) * beta)
    np.testing.assert_array_equal(simulator.truth('quantile-ambient'), simulator.truth('quantile'))


def test_degenerate_scenario(simulator):
    dataset = simulator.generate('sphere-degenerate', 10, seed=0)
    point = simulator.SPHERE_MEAN / np.linalg.norm(simulator.SPHERE_MEAN)
    np.testing.assert_allclose(dataset.data, np.tile(point, (10, 1)))
    np.testing.assert_allclose(dataset.truth, point)


def test_rotation_truth(simulator):
    np.testing.assert_allclose(simulator.truth('so2-frechet'), rotation(np.pi / 4))
    functional = simulator.functionals('so2-extrinsic')['angle']
    assert functional(simulator.truth('so2-extrinsic')) == pytest.approx(np.pi / 4)


def test_projector_truth_is_a_rank_two_projector(simulator):
    truth = simulator.truth('spectral-projector')
    geometry = ManifoldGeometry.for_spec(simulator.get('spectral-projector').manifold)
    assert geometry.is_member(truth)
    P = to_matrices(truth, 3, 3)
    assert np.trace(P) == pytest.approx(2.0)


def test_parking_design(simulator):
    t = np.linspace(0.0, 0.99, 7)
    B = simulator.parking_design(t)
    assert B.shape == (7, 2)
    # the dropped basis function is (1 - t)^2
    np.testing.assert_allclose(B.sum(axis=1), 1.0 - (1.0 - t) ** 2, atol=1e-12)


def test_parking_truth_is_on_the_product(simulator):
    scenario = simulator.get('synthetic-parking')
    truth = simulator.truth('synthetic-parking')
    assert ManifoldGeometry.for_spec(scenario.manifold).is_member(truth)
    np.testing.assert_allclose(truth[:3], 0.3 + 0.05 * stats.norm.ppf([0.4, 0.5, 0.6]))


def test_truth_is_a_copy(simulator):
    truth = simulator.truth('so2-extrinsic')
    truth[:] = 0.0
    assert simulator.truth('so2-extrinsic')[0] == pytest.approx(np.cos(np.pi / 4))


def test_generate_rejects_empty_sample(simulator):
    with pytest.raises(ValueError):
        simulator.generate('so2-extrinsic', 0)
