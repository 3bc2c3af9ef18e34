"""Frequentist coverage of posterior credible sets over simulated replicates."""
import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from src.models.chain import SamplerConfig
from src.models.errors import PreconditionerError, RetractionError
from src.models.experiment import CoverageRow, CoverageTable, ExperimentConfig
from src.services.erm_oracle import ErmOracle
from src.services.loss_functions import LossFunctions
from src.services.manifold_geometry import ManifoldGeometry
from src.services.posterior_inference import PosteriorInference
from src.services.posterior_target import PosteriorTarget
from src.services.preconditioner import PreconditionerEstimator
from src.services.sampler import RiemannianSampler, derive_seed
from src.services.scenario_simulator import ScenarioSimulator

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def nominal_label(alpha: float) -> str:
    return f'{1.0 - alpha:.2f}'


def perturbed_start(geometry: ManifoldGeometry, target: PosteriorTarget, theta_hat: np.ndarray,
                    rng: np.random.Generator, scale: float) -> np.ndarray:
    """retract(θ̂, v) for a small random tangent v, or θ̂ when that point has zero density."""
    try:
        start = geometry.retract(theta_hat, geometry.random_tangent(theta_hat, rng, scale))
    except RetractionError:
        return theta_hat
    if not np.isfinite(target.evaluate(start).log_density):
        return theta_hat
    return start


class CoverageExperiment:
    """Replicates of generate → ERM → sample → credible sets → hit or miss against the truth."""

    DESK_SCALE = {'replicates': 200, 'K': 1500, 'burnin': 300}
    FULL_SCALE = {'replicates': 1000, 'K': 3000, 'burnin': 500}
    INIT_SCALE = 0.5
    STREAM_DATA, STREAM_ERM, STREAM_PILOT, STREAM_CHAIN, STREAM_INIT = range(5)

    def __init__(self, config: ExperimentConfig, simulator: Optional[ScenarioSimulator] = None):
        self.config = config
        self.simulator = simulator or ScenarioSimulator()
        self.scenario = self.simulator.get(config.scenario)

    @classmethod
    def at_full_scale(cls, config: ExperimentConfig) -> ExperimentConfig:
        return dataclasses.replace(config, **cls.FULL_SCALE)

    @property
    def targets(self) -> List[str]:
        return ['region'] + list(self.scenario.functionals)

    # ------------------------------------------------------------------
    # One replicate
    # ------------------------------------------------------------------

    def _posterior(self, loss_fn, data) -> PosteriorTarget:
        cfg = self.config
        if cfg.posterior_kind == 'gibbs':
            beta = cfg.beta if cfg.beta is not None else self.scenario.gibbs_beta
            return PosteriorTarget(loss_fn, data, kind='gibbs', beta=beta)
        return PosteriorTarget(loss_fn, data, kind='rpetel', alpha_rule=cfg.alpha_rule)

    def _preconditioner(self, geometry, target, theta_hat, seed) -> np.ndarray:
        cfg = self.config
        estimator = PreconditionerEstimator(geometry)
        try:
            if cfg.scale_precond:
                return estimator.tuned(cfg.precond_method, target, theta_hat, cfg.algorithm, h=cfg.h,
                                       pilot_steps=cfg.pilot_steps, seed=seed)
            return estimator.estimate(cfg.precond_method, target, theta_hat, pilot_steps=cfg.pilot_steps, seed=seed)
        except (PreconditionerError, ValueError) as e:
            logger.warning("preconditioner '%s' failed (%s); using the identity", cfg.precond_method, e)
            return estimator.identity()

    def run_replicate(self, index: int, truth: np.ndarray) -> Dict[str, Any]:
        """Row of hits and interval lengths for replicate ``index``."""
        cfg = self.config
        seed = derive_seed(cfg.seed, index)
        row: Dict[str, Any] = {'replicate': index, 'failed': False, 'error': ''}
        try:
            dataset = self.simulator.generate(cfg.scenario, cfg.n, derive_seed(seed, self.STREAM_DATA), with_truth=False)
            geometry = ManifoldGeometry.for_spec(dataset.manifold)
            loss_fn = LossFunctions(dataset.loss, geometry)
            erm = ErmOracle(loss_fn).minimize(dataset.data, restarts=1, seed=derive_seed(seed, self.STREAM_ERM))
            target = self._posterior(loss_fn, dataset.data)
            precond = self._preconditioner(geometry, target, erm.theta, derive_seed(seed, self.STREAM_PILOT))

            sampler = RiemannianSampler(target, SamplerConfig(
                algorithm=cfg.algorithm, h=cfg.h, zeta=cfg.zeta, precond=precond, precond_method=cfg.precond_method,
            ))
            rng = np.random.default_rng(derive_seed(seed, self.STREAM_INIT))
            init = perturbed_start(geometry, target, erm.theta, rng, self.INIT_SCALE / np.sqrt(cfg.n))
            chain = sampler.run_chain(init, cfg.K + cfg.burnin, cfg.burnin, seed=derive_seed(seed, self.STREAM_CHAIN))
            row['acceptance'] = chain.acceptance_rate
            row['erm_risk'] = erm.risk

            inference = PosteriorInference(geometry)
            for alpha in cfg.alphas:
                label = nominal_label(alpha)
                region = inference.credible_region(chain, alpha)
                row[f'region_{label}'] = inference.in_region(region, truth)
                for name, functional in self.scenario.functionals.items():
                    interval = inference.credible_interval(chain, functional, alpha, name)
                    row[f'{name}_{label}'] = interval.contains(functional(truth))
                    row[f'{name}_{label}_length'] = interval.length
        except Exception as e:  # recorded per replicate; the experiment goes on
            logger.warning("replicate %d failed: %s", index, e)
            row.update(failed=True, error=f'{type(e).__name__}: {e}')
        return row

    # ------------------------------------------------------------------
    # Whole experiment
    # ------------------------------------------------------------------

    def run(self, progress: bool = True, write: bool = True) -> CoverageTable:
        cfg = self.config
        truth = self.simulator.truth(cfg.scenario)
        indices = range(cfg.replicates)
        logger.info("coverage experiment %s: %d replicates, n=%d, K=%d+%d",
                    cfg.scenario, cfg.replicates, cfg.n, cfg.K, cfg.burnin)

        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                jobs = pool.map(_run_replicate, [(cfg, i, truth) for i in indices])
                rows = list(tqdm(jobs, total=cfg.replicates, disable=not progress, desc=cfg.scenario))
        else:
            rows = [self.run_replicate(i, truth) for i in tqdm(indices, disable=not progress, desc=cfg.scenario)]

        replicates = pd.DataFrame(sorted(rows, key=lambda r: r['replicate']))
        table = self.aggregate(replicates)
        if write:
            self.write(table, replicates)
        return table

    def aggregate(self, replicates: pd.DataFrame) -> CoverageTable:
        ok = replicates[~replicates['failed']]
        table = CoverageTable(self.config.scenario, failures=int(replicates['failed'].sum()))
        m = len(ok)
        for target in self.targets:
            for alpha in self.config.alphas:
                label = nominal_label(alpha)
                column = f'{target}_{label}'
                if m == 0 or column not in ok:
                    coverage, se = np.nan, np.nan
                else:
                    coverage = float(ok[column].astype(float).mean())
                    se = float(np.sqrt(coverage * (1.0 - coverage) / m))
                table.rows.append(CoverageRow(target, 1.0 - alpha, coverage, m, se))
        if table.failures:
            logger.warning("%d of %d replicates failed", table.failures, len(replicates))
        return table

    def write(self, table: CoverageTable, replicates: pd.DataFrame):
        os.makedirs(self.config.output_dir, exist_ok=True)
        table.to_frame().to_csv(os.path.join(self.config.output_dir, 'coverage.csv'),
                                index=False, float_format=FLOAT_FORMAT)
        replicates.to_csv(os.path.join(self.config.output_dir, 'replicates.csv'),
                          index=False, float_format=FLOAT_FORMAT)
        logger.info("wrote coverage tables to %s", self.config.output_dir)


def _run_replicate(args):
    config, index, truth = args
    return CoverageExperiment(config).run_replicate(index, truth)
