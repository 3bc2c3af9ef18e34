"""Tests for config-driven sampling runs."""
import copy

import numpy as np
import pytest

from src.models.errors import ConfigError
from src.services.config_loader import ConfigLoader
from src.services.data_loader import DataLoader
from src.services.sampling_service import SamplingService
from src.services.scenario_simulator import ScenarioSimulator

SMALL = {
    'manifold': {'kind': 'special-orthogonal', 'params': {'p': 2}},
    'loss': {'kind': 'extrinsic-mean', 'params': {}},
    'posterior': {'kind': 'rpetel'},
    'sampler': {'algorithm': 'rrwm', 'precond': 'identity'},
    'chain': {'K': 60, 'burnin': 10},
    'data': {'scenario': 'so2-extrinsic', 'n': 50, 'seed': 2},
    'seed': 4,
}


def test_run_from_a_scenario():
    config = ConfigLoader().from_dict(SMALL)
    result = SamplingService().run(config)
    assert len(result.chain) == 50
    assert result.erm.converged
    assert all(result.geometry.is_member(theta) for theta in result.chain.states)
    assert result.target.n == 50


def test_runs_repeat_under_a_seed():
    config = ConfigLoader().from_dict(SMALL)
    service = SamplingService()
    first = service.run(config)
    second = service.run(config)
    third = service.run(config, seed=5)
    np.testing.assert_array_equal(first.chain.states, second.chain.states)
    assert not np.array_equal(first.chain.states, third.chain.states)


def test_run_from_a_csv(tmp_path):
    data = ScenarioSimulator().generate('so2-extrinsic', 40, seed=9, with_truth=False).data
    DataLoader(tmp_path).save_observations(data, tmp_path / 'rotations.csv')
    settings = copy.deepcopy(SMALL)
    settings['data'] = {'csv': 'rotations.csv'}
    settings['posterior'] = {'kind': 'gibbs', 'beta': 1.0}
    service = SamplingService(data_loader=DataLoader(tmp_path))
    result = service.run(ConfigLoader().from_dict(settings))
    assert result.target.kind == 'gibbs'
    assert result.target.n == 40


def test_scenario_must_match_the_loss():
    settings = copy.deepcopy(SMALL)
    settings['data'] = {'scenario': 'so2-frechet', 'n': 20}
    with pytest.raises(ConfigError):
        SamplingService().load_data(ConfigLoader().from_dict(settings))


def test_chain_starts_near_but_not_at_the_minimizer():
    config = ConfigLoader().from_dict(SMALL)
    result = SamplingService().run(config)
    assert result.geometry.is_member(result.init)
    gap = np.linalg.norm(result.init - result.erm.theta)
    assert 0.0 < gap < 1.0
