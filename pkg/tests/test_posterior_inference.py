"""Tests for credible regions, functional intervals and the normality screen."""
import numpy as np
import pytest

from src.models.chain import Chain, SamplerConfig
from src.models.manifold import ManifoldSpec
from src.services.erm_oracle import ErmOracle
from src.services.loss_functions import LossFunctions
from src.services.manifold_geometry import ManifoldGeometry
from src.services.posterior_inference import PosteriorInference
from src.services.posterior_target import PosteriorTarget
from src.services.preconditioner import PreconditionerEstimator
from src.services.sampler import RiemannianSampler
from src.services.scenario_simulator import ScenarioSimulator

CENTER = np.array([0.0, 0.6, 0.8])


@pytest.fixture
def sphere():
    return ManifoldGeometry.for_spec(ManifoldSpec.sphere(3))


@pytest.fixture
def draws(sphere, rng):
    frame = sphere.tangent_basis(CENTER).frame
    coords = rng.standard_normal((4000, 2)) * [0.02, 0.05]
    return np.array([sphere.retract(CENTER, frame @ u) for u in coords])


def test_projected_mean_is_on_the_manifold(sphere, draws):
    inference = PosteriorInference(sphere)
    center = inference.project_posterior_mean(draws)
    assert sphere.is_member(center)
    np.testing.assert_allclose(center, CENTER, atol=5e-3)


def test_region_contains_its_center_and_has_nominal_content(sphere, draws):
    inference = PosteriorInference(sphere)
    summary = inference.credible_region(draws, alpha=0.1)
    assert summary.rank == 2 and not summary.degenerate
    assert inference.in_region(summary, CENTER)
    inside = np.mean([inference.in_region(summary, theta) for theta in draws])
    assert inside == pytest.approx(0.9, abs=0.01)
    # for normal draws the quadratic form is roughly chi-square with 2 degrees of freedom
    assert summary.q_alpha == pytest.approx(-2.0 * np.log(0.1), rel=0.15)


def test_regions_are_nested_in_alpha(sphere, draws):
    inference = PosteriorInference(sphere)
    wide = inference.credible_region(draws, alpha=0.05)
    narrow = inference.credible_region(draws, alpha=0.10)
    assert wide.q_alpha >= narrow.q_alpha


def test_point_beyond_radius_is_outside(sphere, draws):
    inference = PosteriorInference(sphere)
    summary = inference.credible_region(draws, alpha=0.05, radius=0.5)
    membership = inference.region_membership(summary, np.array([1.0, 0.0, 0.0]))
    assert not membership.member
    assert membership.outside_radius


def test_degenerate_draws_collapse_to_a_point(sphere):
    inference = PosteriorInference(sphere)
    summary = inference.credible_region(np.tile(CENTER, (20, 1)), alpha=0.05)
    assert summary.degenerate
    assert inference.in_region(summary, CENTER)
    assert not inference.in_region(summary, np.array([0.0, 0.8, 0.6]))


def test_region_argument_checks(sphere, draws):
    inference = PosteriorInference(sphere)
    with pytest.raises(ValueError):
        inference.credible_region(draws, alpha=1.5)
    with pytest.raises(ValueError):
        inference.credible_region(draws[:3], alpha=0.05)


def test_equal_tailed_interval(sphere, draws):
    inference = PosteriorInference(sphere)
    interval = inference.credible_interval(draws, lambda theta: theta[0], alpha=0.1, name='theta1')
    lower, upper = np.quantile(draws[:, 0], [0.05, 0.95])
    assert interval.lower == pytest.approx(lower)
    assert interval.upper == pytest.approx(upper)
    assert interval.contains(0.0)
    assert interval.length > 0
    wider = inference.credible_interval(draws, lambda theta: theta[0], alpha=0.05)
    assert wider.lower <= interval.lower and wider.upper >= interval.upper


def test_interval_accepts_a_chain(sphere, draws):
    inference = PosteriorInference(sphere)
    chain = Chain(states=draws, accepted=np.ones(len(draws), dtype=bool), seed=0)
    from_chain = inference.credible_interval(chain, lambda theta: theta[1])
    from_array = inference.credible_interval(draws, lambda theta: theta[1])
    assert from_chain == from_array


def test_non_finite_functional_names_the_state(sphere, draws):
    inference = PosteriorInference(sphere)
    with pytest.raises(ValueError, match='state 0'):
        inference.credible_interval(draws, lambda theta: np.nan, name='broken')


def test_bvm_check_on_normal_draws(sphere, draws):
    inference = PosteriorInference(sphere)
    n = 500
    coords, _ = inference.pushforward(draws)
    sandwich = n * np.cov(coords, rowvar=False)
    report = inference.bvm_check(draws, sandwich, n)
    assert report.draws == 4000
    assert report.mean_norm <= report.mean_tolerance
    assert report.relative_gap < 1e-8
    assert report.skewness_pvalue > 1e-4
    assert report.kurtosis_pvalue > 1e-4


def test_bvm_gap_detects_a_wrong_scale(sphere, draws):
    inference = PosteriorInference(sphere)
    coords, _ = inference.pushforward(draws)
    report = inference.bvm_check(draws, 4.0 * 100 * np.cov(coords, rowvar=False), 100)
    assert report.relative_gap == pytest.approx(0.75, rel=1e-6)


@pytest.mark.slow
def test_posterior_covariance_matches_the_sandwich():
    dataset = ScenarioSimulator().generate('sphere-extrinsic', 2000, seed=4, with_truth=False)
    geometry = ManifoldGeometry.for_spec(dataset.manifold)
    loss_fn = LossFunctions(dataset.loss, geometry)
    theta_hat = ErmOracle(loss_fn).minimize(dataset.data, restarts=1).theta
    target = PosteriorTarget(loss_fn, dataset.data)
    estimator = PreconditionerEstimator(geometry)
    sandwich, basis = estimator.sandwich(target, theta_hat)
    precond = estimator.tuned('plugin-sandwich', target, theta_hat, 'rrwm')
    sampler = RiemannianSampler(target, SamplerConfig(precond=precond, precond_method='plugin-sandwich'))
    chain = sampler.run_chain(theta_hat, 105000, 5000, seed=9)
    report = PosteriorInference(geometry).bvm_check(chain, basis.frame @ sandwich @ basis.frame.T, 2000)
    assert report.draws == 100000
    assert report.relative_gap <= 0.3
    assert report.mean_norm <= report.mean_tolerance
