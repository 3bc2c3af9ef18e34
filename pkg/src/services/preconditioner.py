"""Proposal preconditioner Ĩ: identity, plug-in sandwich, or pilot-chain covariance."""
import logging
from typing import Optional, Tuple

import numpy as np

from src.models.chain import SamplerConfig
from src.models.errors import ConfigError, PreconditionerError, RetractionError
from src.models.manifold import ManifoldPoint, TangentBasis
from src.services.manifold_geometry import ManifoldGeometry
from src.services.posterior_target import PosteriorTarget
from src.services.sampler import RiemannianSampler

logger = logging.getLogger(__name__)


class PreconditionerEstimator:
    """Builds Ĩ = V M Vᵀ + c (I − V Vᵀ) from a tangent covariance M at a reference point."""

    METHODS = ('identity', 'plugin-sandwich', 'pilot-covariance')
    HESSIAN_FD_STEP = 1e-5
    SINGULAR_RCOND = 1e-10
    PILOT_STEPS = 1000
    PILOT_BURNIN = 200
    # squared proposal scale relative to the posterior covariance, times d (RWM) or d^(1/3) (MALA)
    OPTIMAL_SCALE = {'rrwm': 2.38 ** 2, 'ambient-rwm': 2.38 ** 2, 'rmala': 1.65 ** 2}

    def __init__(self, geometry: ManifoldGeometry):
        self.geometry = geometry

    def identity(self) -> np.ndarray:
        return np.eye(self.geometry.ambient_dim)

    def complete(self, M: np.ndarray, basis: TangentBasis) -> np.ndarray:
        """Extend a d×d tangent covariance to a D×D SPD matrix with c = tr(M)/d off the tangent space."""
        V = basis.frame
        d = V.shape[1]
        c = np.trace(M) / d
        P = V @ V.T
        precond = V @ M @ V.T + c * (np.eye(V.shape[0]) - P)
        precond = 0.5 * (precond + precond.T)
        if np.linalg.eigvalsh(precond)[0] <= 0:
            raise PreconditionerError("estimated preconditioner is not positive definite; use the identity method")
        return precond

    def scale_to_step(self, precond: np.ndarray, algorithm: str, h: float, n: int) -> np.ndarray:
        """Rescale Ĩ ≈ n·Σ_post so the proposal covariance 2h̃Ĩ is ℓ²·Σ_post.

        ℓ² = 2.38²/d for the random walks and 1.65²/d^(1/3) for RMALA.
        """
        if algorithm not in self.OPTIMAL_SCALE:
            raise ConfigError(f"unknown algorithm '{algorithm}'")
        d = self.geometry.intrinsic_dim
        power = 1.0 / 3.0 if algorithm == 'rmala' else 1.0
        factor = self.OPTIMAL_SCALE[algorithm] / d ** power / (2.0 * h * n)
        logger.debug("scaling preconditioner by %.3g for %s", factor, algorithm)
        return factor * precond

    def sandwich(self, target: PosteriorTarget, theta_hat: ManifoldPoint) -> Tuple[np.ndarray, TangentBasis]:
        """Ĥ†Δ̂Ĥ† in the tangent basis at an empirical risk minimizer.

        Ĥ is the finite-difference Jacobian of the mean ḡ field along the
        retraction; Δ̂ = n⁻¹ Σ ḡ_i ḡ_iᵀ.
        """
        if target.loss_fn is None:
            raise PreconditionerError("plug-in sandwich needs a loss-based posterior")
        loss_fn, data = target.loss_fn, target.data
        theta_hat = self.geometry.check_point(theta_hat)
        basis = self.geometry.tangent_basis(theta_hat)
        V = basis.frame
        t = self.HESSIAN_FD_STEP

        H = np.empty((basis.dim, basis.dim))
        for j in range(basis.dim):
            try:
                forward = self.geometry.retract(theta_hat, t * V[:, j])
                backward = self.geometry.retract(theta_hat, -t * V[:, j])
            except RetractionError as e:
                raise PreconditionerError(f"cannot differentiate at the minimizer: {e}") from e
            diff = loss_fn.risk_rgrad(data, forward) - loss_fn.risk_rgrad(data, backward)
            H[:, j] = V.T @ diff / (2 * t)
        H = 0.5 * (H + H.T)

        s = np.linalg.svd(H, compute_uv=False)
        if s[0] <= 0 or s[-1] <= self.SINGULAR_RCOND * s[0]:
            raise PreconditionerError("risk Hessian is singular; fall back to the identity preconditioner")
        coords = basis.coordinates(loss_fn.loss_rgrads(data, theta_hat))
        delta = coords.T @ coords / coords.shape[0]
        H_pinv = np.linalg.pinv(H, rcond=self.SINGULAR_RCOND, hermitian=True)
        return H_pinv @ delta @ H_pinv, basis

    def pilot_covariance(self, states: np.ndarray, n: int) -> Tuple[np.ndarray, TangentBasis]:
        """n Σ̂_p from the tangent pushforward of pilot draws at their projected mean."""
        states = np.atleast_2d(states)
        center = self.geometry.project_to_manifold(states.mean(axis=0))
        basis = self.geometry.tangent_basis(center)
        coords = basis.coordinates(states - center)
        cov = np.atleast_2d(np.cov(coords, rowvar=False))
        if np.linalg.eigvalsh(cov)[0] <= 0:
            raise PreconditionerError("pilot chain covariance is singular (did the pilot move?)")
        return n * cov, basis

    def estimate(
        self,
        method: str,
        target: Optional[PosteriorTarget] = None,
        theta_hat: Optional[ManifoldPoint] = None,
        pilot_states: Optional[np.ndarray] = None,
        pilot_steps: Optional[int] = None,
        seed: int = 0,
    ) -> np.ndarray:
        """Ĩ for ``method``; pilot-covariance runs an identity-preconditioned RRWM if no states are given."""
        if method == 'identity':
            return self.identity()
        if method == 'plugin-sandwich':
            if target is None or theta_hat is None:
                raise ConfigError("plugin-sandwich needs a target and an empirical risk minimizer")
            return self.complete(*self.sandwich(target, theta_hat))
        if method == 'pilot-covariance':
            if pilot_states is None:
                pilot_states = self.run_pilot(target, theta_hat, pilot_steps, seed)
            return self.complete(*self.pilot_covariance(pilot_states, target.n if target else 1))
        raise ConfigError(f"unknown preconditioner method '{method}'; choose from {self.METHODS}")

    def tuned(
        self,
        method: str,
        target: PosteriorTarget,
        theta_hat: ManifoldPoint,
        algorithm: str,
        h: Optional[float] = None,
        pilot_steps: Optional[int] = None,
        seed: int = 0,
    ) -> np.ndarray:
        """Estimated Ĩ rescaled by ``scale_to_step``; the identity is returned as is."""
        precond = self.estimate(method, target, theta_hat, pilot_steps=pilot_steps, seed=seed)
        if method == 'identity':
            return precond
        if h is None:
            h = RiemannianSampler.default_step(self.geometry.intrinsic_dim, target.n)
        return self.scale_to_step(precond, algorithm, h, target.n)

    def run_pilot(self, target: PosteriorTarget, init: ManifoldPoint, steps: Optional[int] = None,
                  seed: int = 0) -> np.ndarray:
        if target is None or init is None:
            raise ConfigError("a pilot run needs a target and an initial point")
        steps = steps or self.PILOT_STEPS
        burnin = min(self.PILOT_BURNIN, steps // 5)
        algorithm = 'ambient-rwm' if target.spec.kind == 'ambient' else 'rrwm'
        sampler = RiemannianSampler(target, SamplerConfig(algorithm=algorithm))
        chain = sampler.run_chain(init, K=steps, burnin=burnin, seed=seed)
        logger.info("pilot chain acceptance %.3f over %d steps", chain.acceptance_rate, steps)
        return chain.states
