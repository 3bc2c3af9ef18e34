"""Posterior summaries, credible sets and convergence reports."""
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np
import pandas as pd


@dataclass
class PosteriorSummary:
    """Wald-type credible region at the projected posterior mean θ̂_p.

    ``sigma_p`` is the d×d covariance of the tangent pushforward expressed in
    ``frame`` (a D×d orthonormal basis of T_θ̂_p𝓜).
    """
    theta_hat_p: np.ndarray
    frame: np.ndarray
    sigma_p: np.ndarray
    sigma_pinv: np.ndarray
    q_alpha: float
    alpha: float
    rank: int
    radius: float
    degenerate: bool = False

    def ambient_covariance(self) -> np.ndarray:
        """Σ_p as a D×D bilinear form on ambient vectors."""
        return self.frame @ self.sigma_p @ self.frame.T

    def to_frame(self) -> pd.DataFrame:
        """One row: ``alpha,q_alpha,theta_hat_p_1..D,sigma_p_1..``."""
        row: Dict[str, Any] = {'alpha': self.alpha, 'q_alpha': self.q_alpha}
        for i, value in enumerate(self.theta_hat_p):
            row[f'theta_hat_p_{i + 1}'] = value
        for i, value in enumerate(self.ambient_covariance().T.reshape(-1)):
            row[f'sigma_p_{i + 1}'] = value
        return pd.DataFrame([row])

    def to_dict(self):
        return {
            'theta_hat_p': self.theta_hat_p.tolist(),
            'sigma_p': self.sigma_p.tolist(),
            'q_alpha': self.q_alpha,
            'alpha': self.alpha,
            'rank': self.rank,
            'radius': self.radius,
            'degenerate': self.degenerate,
        }


@dataclass
class RegionMembership:
    """Outcome of a credible-region membership test."""
    member: bool
    quadratic_form: float
    outside_radius: bool = False


@dataclass
class FunctionalInterval:
    """Equal-tailed credible interval for a scalar functional."""
    functional: str
    lower: float
    upper: float
    alpha: float

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, rtol: float = 1e-12) -> bool:
        slack = rtol * max(1.0, abs(self.lower), abs(self.upper))
        return self.lower - slack <= value <= self.upper + slack

    def to_dict(self):
        return {'functional': self.functional, 'alpha': self.alpha, 'lower': self.lower, 'upper': self.upper}


@dataclass
class BvmReport:
    """Empirical check of the normal approximation of the tangent pushforward."""
    draws: int
    mean_norm: float
    mean_tolerance: float
    relative_gap: float
    mardia_skewness: float
    skewness_pvalue: float
    mardia_kurtosis: float
    kurtosis_z: float
    kurtosis_pvalue: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class DiagnosticsReport:
    """Per-coordinate ESS, PSRF and iterations needed for PSRF below a threshold."""
    coordinates: List[str]
    ess: np.ndarray
    psrf_median: np.ndarray
    psrf_q975: np.ndarray
    iterations_to_threshold: np.ndarray
    threshold: float = 1.01
    flags: List[str] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'coordinate': self.coordinates,
            'ess': self.ess,
            'psrf_median': self.psrf_median,
            'psrf_q975': self.psrf_q975,
            f'iters_to_{self.threshold:g}': self.iterations_to_threshold,
        })

    def to_dict(self):
        return {
            'coordinates': self.coordinates,
            'ess': self.ess.tolist(),
            'psrf_median': self.psrf_median.tolist(),
            'psrf_q975': self.psrf_q975.tolist(),
            'iterations_to_threshold': self.iterations_to_threshold.tolist(),
            'threshold': self.threshold,
            'flags': list(self.flags),
        }
