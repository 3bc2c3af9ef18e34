"""Posterior summaries and credible sets from manifold-valued draws."""
import logging
from typing import Callable, Optional, Union

import numpy as np
from scipy import stats

from src.models.chain import Chain
from src.models.manifold import ManifoldPoint
from src.models.summary import BvmReport, FunctionalInterval, PosteriorSummary, RegionMembership
from src.services.manifold_geometry import ManifoldGeometry

logger = logging.getLogger(__name__)

Draws = Union[Chain, np.ndarray]


def _states(draws: Draws) -> np.ndarray:
    states = draws.states if isinstance(draws, Chain) else np.atleast_2d(np.asarray(draws, dtype=float))
    if states.shape[0] == 0:
        raise ValueError("chain is empty")
    return states


class PosteriorInference:
    """Projected posterior mean, Wald-type region, functional intervals and a BvM screen."""

    PINV_RCOND = 1e-10
    DEGENERATE_TOLERANCE = 1e-8

    def __init__(self, geometry: ManifoldGeometry):
        self.geometry = geometry

    def project_posterior_mean(self, draws: Draws) -> ManifoldPoint:
        """θ̂_p = nearest manifold point to the ambient sample mean."""
        return self.geometry.project_to_manifold(_states(draws).mean(axis=0))

    def pushforward(self, draws: Draws, center: Optional[ManifoldPoint] = None):
        """Tangent-basis coordinates of ψ_θ̂(θᵏ) for every draw, with the basis used."""
        states = _states(draws)
        center = self.project_posterior_mean(states) if center is None else center
        basis = self.geometry.tangent_basis(center)
        return basis.coordinates(states - center), basis

    def credible_region(self, draws: Draws, alpha: float = 0.05, radius: Optional[float] = None) -> PosteriorSummary:
        """Region {θ : (θ − θ̂_p)ᵀ Σ_p† (θ − θ̂_p) ≤ q_α} within ``radius`` of θ̂_p.

        q_α is the type-7 sample (1 − α)-quantile of the same quadratic form over the draws.
        """
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        states = _states(draws)
        d = self.geometry.intrinsic_dim
        if states.shape[0] < d + 2:
            raise ValueError(f"credible region needs at least d + 2 = {d + 2} draws, got {states.shape[0]}")
        center = self.project_posterior_mean(states)
        coords, basis = self.pushforward(states, center)
        radius = self.geometry.trust_radius if radius is None else radius

        sigma = np.atleast_2d(np.cov(coords, rowvar=False))
        scale = np.abs(sigma).max()
        if scale <= self.DEGENERATE_TOLERANCE ** 2:
            logger.warning("posterior draws have zero spread; region collapses to the projected mean")
            return PosteriorSummary(center, basis.frame, sigma, np.zeros_like(sigma), 0.0, alpha, 0, radius, True)

        sigma_pinv = np.linalg.pinv(sigma, rcond=self.PINV_RCOND, hermitian=True)
        rank = int(np.linalg.matrix_rank(sigma, tol=self.PINV_RCOND * np.linalg.eigvalsh(sigma)[-1], hermitian=True))
        if rank < d:
            logger.warning("pushforward covariance has rank %d < %d; using its pseudo-inverse", rank, d)
        quad = np.einsum('ki,ij,kj->k', coords, sigma_pinv, coords)
        q_alpha = float(np.quantile(quad, 1.0 - alpha))
        return PosteriorSummary(center, basis.frame, sigma, sigma_pinv, q_alpha, alpha, rank, radius)

    def region_membership(self, summary: PosteriorSummary, theta: ManifoldPoint) -> RegionMembership:
        theta = self.geometry.check_point(theta)
        offset = theta - summary.theta_hat_p
        if summary.degenerate:
            inside = np.linalg.norm(offset) <= self.DEGENERATE_TOLERANCE * (1.0 + np.linalg.norm(summary.theta_hat_p))
            return RegionMembership(bool(inside), 0.0)
        if np.linalg.norm(offset) > summary.radius:
            return RegionMembership(False, np.inf, outside_radius=True)
        u = summary.frame.T @ offset
        quad = float(u @ summary.sigma_pinv @ u)
        return RegionMembership(quad <= summary.q_alpha, quad)

    def in_region(self, summary: PosteriorSummary, theta: ManifoldPoint) -> bool:
        return self.region_membership(summary, theta).member

    def credible_interval(
        self,
        draws: Draws,
        functional: Callable[[np.ndarray], float],
        alpha: float = 0.05,
        name: str = 'f',
    ) -> FunctionalInterval:
        """Equal-tailed [q_{α/2}, q_{1−α/2}] interval of f over the draws."""
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        values = np.array([functional(theta) for theta in _states(draws)], dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise ValueError(f"functional '{name}' is not finite at state {bad[0]}")
        lower, upper = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0])
        return FunctionalInterval(name, float(lower), float(upper), alpha)

    def bvm_check(self, draws: Draws, sandwich: np.ndarray, n: int) -> BvmReport:
        """Compare n Σ_p with a sandwich covariance and screen the pushforward for normality.

        ``sandwich`` is either d×d in the tangent basis at θ̂_p or D×D ambient;
        the gap ‖nΣ_p − S‖_F / ‖S‖_F is measured on the ambient embedding.
        """
        states = _states(draws)
        coords, basis = self.pushforward(states)
        m, d = coords.shape
        sigma = np.atleast_2d(np.cov(coords, rowvar=False)) if m > 1 else np.zeros((d, d))
        sandwich = np.asarray(sandwich, dtype=float)
        ambient_sandwich = basis.frame @ sandwich @ basis.frame.T if sandwich.shape == (d, d) else sandwich
        ambient_sigma = basis.frame @ (n * sigma) @ basis.frame.T
        gap = np.linalg.norm(ambient_sigma - ambient_sandwich) / np.linalg.norm(ambient_sandwich)

        mean = coords.mean(axis=0)
        skew, skew_p, kurt, kurt_z, kurt_p = self._mardia(coords)
        return BvmReport(
            draws=m,
            mean_norm=float(np.linalg.norm(mean)),
            mean_tolerance=float(3.0 * np.sqrt(np.trace(sigma) / m)),
            relative_gap=float(gap),
            mardia_skewness=skew,
            skewness_pvalue=skew_p,
            mardia_kurtosis=kurt,
            kurtosis_z=kurt_z,
            kurtosis_pvalue=kurt_p,
        )

    def _mardia(self, coords: np.ndarray):
        """Mardia's multivariate skewness and kurtosis on the whitened draws."""
        m = coords.shape[0]
        centered = coords - coords.mean(axis=0)
        cov = centered.T @ centered / m
        evals, evecs = np.linalg.eigh(cov)
        keep = evals > self.PINV_RCOND * max(evals.max(), 0.0)
        k = int(keep.sum())
        if k == 0 or m < 3:
            return (np.nan,) * 5
        white = centered @ evecs[:, keep] / np.sqrt(evals[keep])
        third = np.einsum('ia,ib,ic->abc', white, white, white) / m
        b1 = float(np.sum(third ** 2))
        b2 = float(np.mean(np.sum(white ** 2, axis=1) ** 2))
        skew_stat = m * b1 / 6.0
        skew_p = float(stats.chi2.sf(skew_stat, k * (k + 1) * (k + 2) / 6.0))
        kurt_z = (b2 - k * (k + 2)) / np.sqrt(8.0 * k * (k + 2) / m)
        kurt_p = float(2.0 * stats.norm.sf(abs(kurt_z)))
        return b1, skew_p, b2, float(kurt_z), kurt_p
