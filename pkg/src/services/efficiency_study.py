"""Sampler efficiency: effective sample size and PSRF convergence across sampler settings."""
import logging
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from src.models.chain import SamplerConfig
from src.services.coverage_experiment import FLOAT_FORMAT, perturbed_start
from src.services.diagnostics import ConvergenceDiagnostics
from src.services.erm_oracle import ErmOracle
from src.services.loss_functions import LossFunctions
from src.services.manifold_geometry import ManifoldGeometry
from src.services.posterior_target import PosteriorTarget
from src.services.preconditioner import PreconditionerEstimator
from src.services.sampler import RiemannianSampler, derive_seed
from src.services.scenario_simulator import ScenarioSimulator

logger = logging.getLogger(__name__)


@dataclass
class EfficiencyRun:
    """One sampler setting to measure."""
    label: str
    scenario: str
    algorithm: str
    precond_method: str


class EfficiencyStudy:
    """ESS and iterations-to-PSRF for sampler settings over independent replicates.

    Each replicate runs ``CHAINS`` chains per setting from over-dispersed
    starting points around the ERM; ESS is averaged over chains and
    coordinates, and the iteration count is the worst coordinate (−1 when
    some coordinate never reaches the threshold).
    """

    CHAINS = 4
    DISPERSION = 3.0
    SAMPLER_RUNS = [
        EfficiencyRun('rrwm-identity', 'sphere-extrinsic', 'rrwm', 'identity'),
        EfficiencyRun('rrwm-selected', 'sphere-extrinsic', 'rrwm', 'pilot-covariance'),
        EfficiencyRun('rmala-identity', 'sphere-extrinsic', 'rmala', 'identity'),
        EfficiencyRun('rmala-selected', 'sphere-extrinsic', 'rmala', 'pilot-covariance'),
    ]
    DIMENSION_RUNS = [
        EfficiencyRun('rrwm-fixed-rank', 'quantile', 'rrwm', 'identity'),
        EfficiencyRun('rwm-ambient', 'quantile-ambient', 'ambient-rwm', 'identity'),
    ]
    STUDIES = {'samplers': SAMPLER_RUNS, 'dimension': DIMENSION_RUNS}

    def __init__(self, n: int = 500, replicates: int = 20, K: int = 5000, seed: int = 0,
                 pilot_steps: int = 1000, output_dir: str = 'outputs',
                 simulator: Optional[ScenarioSimulator] = None):
        self.n = n
        self.replicates = replicates
        self.K = K
        self.seed = seed
        self.pilot_steps = pilot_steps
        self.output_dir = output_dir
        self.simulator = simulator or ScenarioSimulator()
        self.diagnostics = ConvergenceDiagnostics()

    def measure(self, run: EfficiencyRun, replicate: int) -> dict:
        # same seed per replicate across settings, so settings share data sets
        seed = derive_seed(self.seed, replicate)
        dataset = self.simulator.generate(run.scenario, self.n, derive_seed(seed, 0), with_truth=False)
        geometry = ManifoldGeometry.for_spec(dataset.manifold)
        loss_fn = LossFunctions(dataset.loss, geometry)
        theta_hat = ErmOracle(loss_fn).minimize(dataset.data, restarts=1, seed=derive_seed(seed, 1)).theta
        target = PosteriorTarget(loss_fn, dataset.data)
        precond = PreconditionerEstimator(geometry).tuned(
            run.precond_method, target, theta_hat, run.algorithm, pilot_steps=self.pilot_steps, seed=derive_seed(seed, 2)
        )
        sampler = RiemannianSampler(target, SamplerConfig(
            algorithm=run.algorithm, precond=precond, precond_method=run.precond_method,
        ))
        rng = np.random.default_rng(derive_seed(seed, 3))
        chains = []
        for c in range(self.CHAINS):
            init = perturbed_start(geometry, target, theta_hat, rng, self.DISPERSION / np.sqrt(self.n))
            chains.append(sampler.run_chain(init, self.K, seed=derive_seed(seed, 10 + c)))
        report = self.diagnostics.report(chains)
        iterations = report.iterations_to_threshold
        return {
            'setting': run.label,
            'scenario': run.scenario,
            'replicate': replicate,
            'ess': float(report.ess.mean()),
            'iterations': int(iterations.max()) if np.all(iterations >= 0) else -1,
            'acceptance': float(np.mean([chain.acceptance_rate for chain in chains])),
        }

    def run(self, study: str = 'samplers', progress: bool = True, write: bool = True) -> pd.DataFrame:
        runs: List[EfficiencyRun] = self.STUDIES[study]
        rows = []
        jobs = [(run, r) for r in range(self.replicates) for run in runs]
        for run, replicate in tqdm(jobs, disable=not progress, desc=study):
            rows.append(self.measure(run, replicate))
        frame = pd.DataFrame(rows)
        if write:
            os.makedirs(self.output_dir, exist_ok=True)
            frame.to_csv(os.path.join(self.output_dir, 'efficiency.csv'), index=False, float_format=FLOAT_FORMAT)
        logger.info("efficiency study '%s':\n%s", study, self.summarize(frame).to_string())
        return frame

    @staticmethod
    def summarize(frame: pd.DataFrame) -> pd.DataFrame:
        """Median ESS, median iterations over replicates that converged, and the unconverged count."""
        def summary(group):
            converged = group.loc[group['iterations'] >= 0, 'iterations']
            return pd.Series({
                'median_ess': group['ess'].median(),
                'median_iterations': converged.median() if len(converged) else np.nan,
                'not_converged': int((group['iterations'] < 0).sum()),
                'acceptance': group['acceptance'].mean(),
            })
        return frame.groupby('setting', sort=False).apply(summary)
