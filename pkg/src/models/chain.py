"""Sampler configuration and chain records."""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from src.models.errors import ConfigError

ALGORITHMS = ('rrwm', 'rmala', 'ambient-rwm')
REJECTION_REASONS = ('lazy', 'trust_radius', 'phi_failed', 'reverse_failed', 'density', 'gradient_failed')


@dataclass
class SamplerConfig:
    """Proposal settings: algorithm, step h̃, laziness ζ and preconditioner Ĩ.

    ``h=None`` means the default h/n with h = 1/(d + log n); ``precond=None``
    means the identity.
    """
    algorithm: str = 'rrwm'
    h: Optional[float] = None
    zeta: float = 0.0
    precond: Optional[np.ndarray] = None
    precond_method: str = 'identity'
    trust_radius: Optional[float] = None
    phi_method: str = 'gradient'

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown sampler algorithm '{self.algorithm}'")
        if self.h is not None and not self.h > 0:
            raise ConfigError("step size h must be positive")
        if not 0.0 <= self.zeta <= 1.0:
            raise ConfigError("lazy probability zeta must lie in [0, 1]")
        if self.precond is not None:
            precond = np.asarray(self.precond, dtype=float)
            if precond.ndim != 2 or precond.shape[0] != precond.shape[1]:
                raise ConfigError("preconditioner must be a square matrix")
            if not np.allclose(precond, precond.T, atol=1e-10):
                raise ConfigError("preconditioner must be symmetric")
            if np.linalg.eigvalsh(precond)[0] <= 0:
                raise ConfigError("preconditioner must be positive definite")
            self.precond = precond

    def to_dict(self) -> Dict[str, Any]:
        return {
            'algorithm': self.algorithm,
            'h': self.h,
            'zeta': self.zeta,
            'precond': self.precond_method,
            'trust_radius': self.trust_radius,
            'phi_method': self.phi_method,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SamplerConfig':
        return cls(
            algorithm=data.get('algorithm', 'rrwm'),
            h=data.get('h'),
            zeta=float(data.get('zeta', 0.0)),
            precond_method=data.get('precond', 'identity'),
            trust_radius=data.get('trust_radius'),
            phi_method=data.get('phi_method', 'gradient'),
        )


@dataclass
class Chain:
    """Post-burn-in states of one run with acceptance bookkeeping."""
    states: np.ndarray
    accepted: np.ndarray
    seed: int
    config: Dict[str, Any] = field(default_factory=dict)
    burnin: int = 0
    log_densities: Optional[np.ndarray] = None
    rejections: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.accepted = np.asarray(self.accepted, dtype=bool)
        if self.states.shape[0] != self.accepted.shape[0]:
            raise ValueError("chain states and acceptance flags differ in length")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if len(self) else 0.0

    def to_frame(self) -> pd.DataFrame:
        """Rows ``iter,accepted,x1..xD`` numbered from the first post-burn-in step."""
        frame = pd.DataFrame(self.states, columns=[f'x{i + 1}' for i in range(self.states.shape[1])])
        frame.insert(0, 'accepted', self.accepted.astype(int))
        frame.insert(0, 'iter', np.arange(self.burnin + 1, self.burnin + len(self) + 1))
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, seed: int = 0) -> 'Chain':
        coords = [c for c in frame.columns if c.startswith('x')]
        iters = frame['iter'].to_numpy()
        burnin = int(iters[0]) - 1 if len(iters) else 0
        return cls(
            states=frame[coords].to_numpy(dtype=float),
            accepted=frame['accepted'].to_numpy().astype(bool),
            seed=seed,
            burnin=burnin,
        )

    def summary(self) -> Dict[str, Any]:
        return {
            'length': len(self),
            'burnin': self.burnin,
            'seed': self.seed,
            'acceptance_rate': self.acceptance_rate,
            'rejections': dict(self.rejections),
            'config': dict(self.config),
        }
