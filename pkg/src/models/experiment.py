"""Scenario datasets, run and experiment configuration, coverage tables."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.models.chain import SamplerConfig
from src.models.errors import ConfigError
from src.models.loss import LossModel
from src.models.manifold import ManifoldSpec


@dataclass
class ScenarioDataset:
    """Simulated observations for one scenario together with the population target."""
    name: str
    n: int
    seed: int
    data: np.ndarray
    truth: np.ndarray
    manifold: ManifoldSpec
    loss: LossModel

    def to_dict(self):
        return {
            'name': self.name,
            'n': self.n,
            'seed': self.seed,
            'truth': self.truth.tolist(),
            'manifold': self.manifold.to_dict(),
            'loss': self.loss.to_dict(),
        }


@dataclass
class ErmResult:
    """Empirical risk minimizer with its convergence record."""
    theta: np.ndarray
    risk: float
    grad_norm: float
    converged: bool
    restarts_converged: int = 0

    def to_dict(self):
        return {
            'theta': self.theta.tolist(),
            'risk': self.risk,
            'grad_norm': self.grad_norm,
            'converged': self.converged,
            'restarts_converged': self.restarts_converged,
        }


@dataclass
class RunConfig:
    """One sampling run: model, posterior, sampler, chain length and data source."""
    manifold: ManifoldSpec
    loss: LossModel
    posterior: Dict[str, Any]
    sampler: SamplerConfig
    K: int
    burnin: int
    data: Dict[str, Any]
    seed: int = 0

    def __post_init__(self):
        if not self.K > self.burnin >= 0:
            raise ConfigError(f"chain needs K > burnin >= 0, got K={self.K}, burnin={self.burnin}")
        if self.posterior.get('kind', 'rpetel') not in ('rpetel', 'gibbs'):
            raise ConfigError("config posterior.kind must be 'rpetel' or 'gibbs'")
        if 'csv' not in self.data and 'scenario' not in self.data:
            raise ConfigError("config data section needs 'scenario' or 'csv'")


@dataclass
class ExperimentConfig:
    """Coverage experiment settings (desk scale by default)."""
    scenario: str
    n: int = 500
    replicates: int = 200
    K: int = 1500
    burnin: int = 300
    seed: int = 0
    output_dir: str = 'outputs'
    algorithm: str = 'rrwm'
    h: Optional[float] = None
    zeta: float = 0.0
    precond_method: str = 'pilot-covariance'
    pilot_steps: int = 1000
    scale_precond: bool = True
    posterior_kind: str = 'rpetel'
    alpha_rule: Any = 'two_log_n'
    beta: Optional[float] = None
    alphas: Tuple[float, ...] = (0.05, 0.10)
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not self.K > 0 or self.burnin < 0:
            raise ConfigError("need K > 0 post-burn-in draws and burnin >= 0")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ConfigError("alpha levels must lie in (0, 1)")
        if self.posterior_kind not in ('rpetel', 'gibbs'):
            raise ConfigError(f"unknown posterior kind '{self.posterior_kind}'")

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass
class CoverageRow:
    target: str
    nominal: float
    coverage: float
    replicates: int
    se: float


@dataclass
class CoverageTable:
    """Empirical coverage per credible set and nominal level."""
    scenario: str
    rows: List[CoverageRow] = field(default_factory=list)
    failures: int = 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.target, r.nominal, r.coverage, r.replicates, r.se) for r in self.rows],
            columns=['target', 'nominal', 'coverage', 'replicates', 'se'],
        )

    def coverage_of(self, target: str, nominal: float) -> float:
        for row in self.rows:
            if row.target == target and abs(row.nominal - nominal) < 1e-12:
                return row.coverage
        raise KeyError(f"no coverage row for {target} at {nominal}")
