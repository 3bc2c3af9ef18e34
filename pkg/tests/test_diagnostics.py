"""Tests for ESS and PSRF diagnostics."""
import logging

import numpy as np
import pytest

from src.models.chain import Chain
from src.models.errors import DiagnosticsError
from src.services.diagnostics import ConvergenceDiagnostics


def ar1(rng, rho, K, start=0.0):
    x = np.empty(K)
    x[0] = start
    noise = rng.standard_normal(K) * np.sqrt(1.0 - rho ** 2)
    for k in range(1, K):
        x[k] = rho * x[k - 1] + noise[k]
    return x


@pytest.fixture
def diagnostics():
    return ConvergenceDiagnostics()


def test_autocorrelation_starts_at_one(diagnostics, rng):
    rho = diagnostics.autocorrelation(rng.standard_normal(100))
    assert rho[0] == pytest.approx(1.0)
    assert rho.size == 100


def test_iid_ess_is_close_to_length(diagnostics, rng):
    ess = diagnostics.ess(rng.standard_normal(4000))
    assert 0.7 * 4000 <= ess <= 4000


def test_ar1_ess_matches_integrated_autocorrelation(diagnostics, rng):
    K, rho = 20000, 0.9
    ess = diagnostics.ess(ar1(rng, rho, K))
    assert ess == pytest.approx(K * (1 - rho) / (1 + rho), rel=0.35)


def test_constant_series(diagnostics, caplog):
    with caplog.at_level(logging.WARNING):
        assert diagnostics.ess(np.full(50, 2.0)) == 50.0
    assert 'constant' in caplog.text


def test_ess_input_checks(diagnostics):
    with pytest.raises(DiagnosticsError):
        diagnostics.ess([1.0, 2.0])
    with pytest.raises(DiagnosticsError):
        diagnostics.ess([1.0, 2.0, np.nan, 4.0, 5.0])


def test_psrf_near_one_for_mixed_chains(diagnostics, rng):
    estimate, upper = diagnostics.psrf([rng.standard_normal(2000) for _ in range(4)])
    assert estimate < 1.01
    assert upper >= estimate


def test_psrf_flags_separated_chains(diagnostics, rng):
    chains = [rng.standard_normal(500) + shift for shift in (0.0, 0.0, 3.0, 3.0)]
    estimate, _ = diagnostics.psrf(chains)
    assert estimate > 1.5


def test_psrf_of_distinct_constant_chains_is_infinite(diagnostics):
    assert diagnostics.psrf([np.zeros(10), np.ones(10)]) == (np.inf, np.inf)


def test_single_chain_is_split(diagnostics, rng):
    drifting = np.concatenate([rng.standard_normal(500), rng.standard_normal(500) + 5.0])
    estimate, _ = diagnostics.psrf([drifting])
    assert estimate > 2.0


def test_psrf_input_checks(diagnostics):
    with pytest.raises(DiagnosticsError):
        diagnostics.psrf([np.zeros(10), np.zeros(12)])
    with pytest.raises(DiagnosticsError):
        diagnostics.psrf([])


def test_iterations_to_threshold(diagnostics, rng):
    mixed = [rng.standard_normal(2000) for _ in range(4)]
    iterations = diagnostics.iterations_to_threshold(mixed, threshold=1.1)
    assert 0 < iterations <= 2000
    stuck = [rng.standard_normal(500) + shift for shift in (0.0, 4.0)]
    assert diagnostics.iterations_to_threshold(stuck, threshold=1.1) == -1


def test_report_over_chain_objects(diagnostics, rng):
    chains = []
    for _ in range(3):
        states = np.column_stack([rng.standard_normal(400), np.full(400, 0.5)])
        chains.append(Chain(states=states, accepted=np.ones(400, dtype=bool), seed=0))
    report = diagnostics.report(chains, threshold=1.1)
    assert report.coordinates == ['x1', 'x2']
    assert report.flags == ['x2: constant']
    assert report.ess[1] == 400.0
    frame = report.to_frame()
    assert list(frame.columns) == ['coordinate', 'ess', 'psrf_median', 'psrf_q975', 'iters_to_1.1']
    assert report.iterations_to_threshold[0] > 0


def test_report_rejects_mixed_widths(diagnostics):
    with pytest.raises(DiagnosticsError):
        diagnostics.report([np.zeros((10, 2)), np.zeros((10, 3))])
