"""Service that turns a RunConfig into a posterior chain."""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.models.chain import Chain
from src.models.errors import ConfigError
from src.models.experiment import ErmResult, RunConfig
from src.services.coverage_experiment import CoverageExperiment, perturbed_start
from src.services.data_loader import DataLoader
from src.services.erm_oracle import ErmOracle
from src.services.loss_functions import LossFunctions
from src.services.manifold_geometry import ManifoldGeometry
from src.services.posterior_target import PosteriorTarget, Prior
from src.services.preconditioner import PreconditionerEstimator
from src.services.sampler import RiemannianSampler, derive_seed
from src.services.scenario_simulator import ScenarioSimulator

logger = logging.getLogger(__name__)


@dataclass
class SamplingResult:
    chain: Chain
    erm: ErmResult
    target: PosteriorTarget
    geometry: ManifoldGeometry
    init: np.ndarray


class SamplingService:
    """Loads observations, fits the ERM, estimates Ĩ and runs the configured sampler."""

    def __init__(self, data_loader: Optional[DataLoader] = None, simulator: Optional[ScenarioSimulator] = None):
        self.data_loader = data_loader or DataLoader()
        self.simulator = simulator or ScenarioSimulator()

    def load_data(self, config: RunConfig) -> np.ndarray:
        source = config.data
        if 'csv' in source:
            return self.data_loader.load_observations(source['csv'], config.loss.observation_dim)
        scenario = self.simulator.get(source['scenario'])
        if scenario.loss.kind != config.loss.kind or scenario.loss.observation_dim != config.loss.observation_dim:
            raise ConfigError(f"scenario '{scenario.name}' does not produce data for a {config.loss.kind} loss")
        return self.simulator.generate(
            scenario.name, int(source.get('n', 500)), int(source.get('seed', config.seed)), with_truth=False
        ).data

    def build_target(self, config: RunConfig, data: np.ndarray, geometry: ManifoldGeometry) -> PosteriorTarget:
        posterior = config.posterior
        loss_fn = LossFunctions(config.loss, geometry)
        return PosteriorTarget(
            loss_fn,
            data,
            kind=posterior.get('kind', 'rpetel'),
            alpha_rule=posterior.get('alpha_rule'),
            beta=posterior.get('beta'),
            prior=Prior.from_dict(posterior.get('prior')),
        )

    def run(self, config: RunConfig, seed: Optional[int] = None, progress: bool = False) -> SamplingResult:
        seed = config.seed if seed is None else seed
        geometry = ManifoldGeometry.for_spec(
            config.manifold, trust_radius=config.sampler.trust_radius, phi_method=config.sampler.phi_method
        )
        data = self.load_data(config)
        target = self.build_target(config, data, geometry)
        erm = ErmOracle(target.loss_fn).minimize(data, seed=derive_seed(seed, 0))

        method = config.sampler.precond_method
        precond = PreconditionerEstimator(geometry).estimate(method, target, erm.theta, seed=derive_seed(seed, 1))
        sampler_config = dataclasses.replace(config.sampler, precond=precond)
        sampler = RiemannianSampler(target, sampler_config)
        rng = np.random.default_rng(derive_seed(seed, 3))
        init = perturbed_start(geometry, target, erm.theta, rng, CoverageExperiment.INIT_SCALE / np.sqrt(target.n))
        chain = sampler.run_chain(init, config.K, config.burnin, seed=derive_seed(seed, 2), progress=progress)
        return SamplingResult(chain, erm, target, geometry, init)
