"""Tests for the command-line entry point."""
import json

import numpy as np
import pandas as pd

from src.cli import build_parser, main
from src.models.chain import Chain
from src.models.errors import OptimizationError
from src.services.data_loader import DataLoader
from src.services.erm_oracle import ErmOracle

SMALL_CONFIG = {
    'manifold': {'kind': 'special-orthogonal', 'params': {'p': 2}},
    'loss': {'kind': 'extrinsic-mean', 'params': {}},
    'sampler': {'precond': 'identity'},
    'chain': {'K': 40, 'burnin': 10},
    'data': {'scenario': 'so2-extrinsic', 'n': 30, 'seed': 1},
    'seed': 2,
}


def test_erm_prints_json(capsys):
    assert main(['erm', '--scenario', 'so2-extrinsic', '--n', '50', '--truth']) == 0
    output = json.loads(capsys.readouterr().out)
    assert len(output['theta']) == 4
    assert output['distance_to_truth'] < 0.5


def test_unknown_scenario_exits_with_two():
    assert main(['erm', '--scenario', 'klein-bottle', '--n', '10']) == 2


def test_sample_writes_a_chain(tmp_path, capsys):
    config_path = tmp_path / 'run.json'
    config_path.write_text(json.dumps(SMALL_CONFIG))
    out = tmp_path / 'outputs' / 'chain.csv'
    assert main(['sample', '--config', str(config_path), '--out', str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ['iter', 'accepted', 'x1', 'x2', 'x3', 'x4']
    assert len(frame) == 30
    assert frame['iter'].iloc[0] == 11
    assert json.loads(capsys.readouterr().out)['length'] == 30


def test_missing_config_exits_with_two(tmp_path):
    assert main(['sample', '--config', str(tmp_path / 'none.json'), '--out', str(tmp_path / 'c.csv')]) == 2


def test_diagnose(tmp_path, rng, capsys):
    loader = DataLoader(tmp_path)
    paths = []
    for c in range(3):
        chain = Chain(states=rng.standard_normal((200, 2)), accepted=np.ones(200, dtype=bool), seed=c)
        paths.append(str(loader.save_chain_csv(chain, tmp_path / f'chain{c}.csv')))
    out = tmp_path / 'diag.csv'
    assert main(['diagnose', '--chains', ','.join(paths), '--out', str(out), '--threshold', '1.1']) == 0
    frame = pd.read_csv(out)
    assert list(frame['coordinate']) == ['x1', 'x2']
    assert 'psrf_median' in capsys.readouterr().out


def test_experiment_on_the_degenerate_scenario(tmp_path, capsys):
    out = tmp_path / 'outputs'
    code = main([
        'experiment', '--scenario', 'sphere-degenerate', '--n', '30', '--replicates', '2',
        '--K', '40', '--burnin', '10', '--precond', 'identity', '--quiet', '--out', str(out),
    ])
    assert code == 0
    table = pd.read_csv(out / 'coverage.csv')
    assert (table['coverage'] == 1.0).all()
    assert 'region' in capsys.readouterr().out


def test_numeric_alpha_rule_is_parsed():
    args = build_parser().parse_args(['experiment', '--scenario', 'quantile', '--alpha-rule', '2.5'])
    assert args.alpha_rule == '2.5'
    assert args.K is None


def test_paper_scale_flag():
    args = build_parser().parse_args(['experiment', '--scenario', 'sphere-extrinsic', '--paper-scale'])
    assert args.paper_scale
    args = build_parser().parse_args(['experiment', '--scenario', 'sphere-extrinsic', '--full-scale'])
    assert args.paper_scale
    assert not build_parser().parse_args(['experiment', '--scenario', 'quantile']).paper_scale


def test_optimizer_failure_exits_with_two(monkeypatch):
    def fail(self, *args, **kwargs):
        raise OptimizationError('no restart converged')

    monkeypatch.setattr(ErmOracle, 'minimize', fail)
    assert main(['erm', '--scenario', 'so2-extrinsic', '--n', '20']) == 2
