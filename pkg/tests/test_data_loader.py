"""Tests for CSV input and output."""
import numpy as np
import pytest

from src.models.chain import Chain
from src.models.errors import DimensionMismatchError
from src.models.summary import FunctionalInterval
from src.services.data_loader import DataLoader


@pytest.fixture
def loader(tmp_path):
    return DataLoader(tmp_path)


def test_chain_csv_round_trip(loader, outputs_dir, rng):
    chain = Chain(states=rng.standard_normal((5, 3)), accepted=[1, 0, 1, 1, 0], seed=3, burnin=10)
    path = loader.save_chain_csv(chain, outputs_dir / 'chains' / 'chain.csv')
    assert path.read_text().splitlines()[0] == 'iter,accepted,x1,x2,x3'
    loaded = loader.load_chain_csv(path)
    np.testing.assert_array_equal(loaded.states, chain.states)
    np.testing.assert_array_equal(loaded.accepted, chain.accepted)
    assert loaded.burnin == 10


def test_observations_with_and_without_header(loader, tmp_path):
    (tmp_path / 'plain.csv').write_text('1,2\n3,4\n5,6\n')
    (tmp_path / 'named.csv').write_text('a,b\n1,2\n3,4\n')
    np.testing.assert_array_equal(loader.load_observations('plain.csv'), [[1, 2], [3, 4], [5, 6]])
    np.testing.assert_array_equal(loader.load_observations('named.csv', width=2), [[1, 2], [3, 4]])


def test_saved_observations_load_back(loader, outputs_dir):
    data = np.array([[0.1, 0.2], [1.0 / 3.0, -4.0]])
    path = loader.save_observations(data, outputs_dir / 'obs.csv')
    np.testing.assert_array_equal(loader.load_observations(path, width=2), data)


def test_observation_errors(loader, tmp_path):
    (tmp_path / 'wide.csv').write_text('1,2,3\n')
    with pytest.raises(DimensionMismatchError):
        loader.load_observations('wide.csv', width=2)
    (tmp_path / 'empty.csv').write_text('')
    with pytest.raises(ValueError):
        loader.load_observations('empty.csv')
    (tmp_path / 'holes.csv').write_text('1,2\n3,\n')
    with pytest.raises(ValueError):
        loader.load_observations('holes.csv')
    with pytest.raises(FileNotFoundError):
        loader.load_observations('missing.csv')
    with pytest.raises(FileNotFoundError):
        loader.load_chain_csv('missing.csv')


def test_intervals_csv(loader, outputs_dir):
    path = loader.save_intervals_csv([FunctionalInterval('angle', -0.1, 0.2, 0.05)], outputs_dir / 'intervals.csv')
    assert path.read_text().splitlines() == ['functional,alpha,lower,upper', 'angle,0.050000000000000003,-0.10000000000000001,0.20000000000000001']
