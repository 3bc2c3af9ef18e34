"""Tilted empirical likelihood solution record."""
from dataclasses import dataclass, field
from typing import List

import numpy as np


@dataclass
class EtelSolution:
    """Multiplier λ̄(θ) and tilted weights p_i(θ) at one base point.

    ``lam`` is the multiplier in ambient coordinates (a tangent vector at θ),
    ``lam_coords`` the same vector in the tangent basis used by the solver.
    """
    lam: np.ndarray
    lam_coords: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray
    converged: bool
    residual: float
    iterations: int
    used_lstsq: bool = False
    objective_history: List[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def log_likelihood(self) -> float:
        """Σ log p_i, or −∞ when the moment constraint could not be met."""
        if not self.converged:
            return -np.inf
        return float(np.sum(self.log_weights))

    def to_dict(self):
        return {
            'lambda': self.lam.tolist(),
            'weights': self.weights.tolist(),
            'converged': self.converged,
            'residual': self.residual,
            'iterations': self.iterations,
            'used_lstsq': self.used_lstsq,
        }
