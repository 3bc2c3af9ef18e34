"""Riemannian random-walk Metropolis and Riemannian MALA."""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from tqdm import tqdm

from src.models.chain import Chain, SamplerConfig
from src.models.errors import ConfigError, EtelError, LossDomainError, ManifoldError
from src.models.manifold import ManifoldPoint
from src.services.manifold_geometry import ManifoldGeometry
from src.services.posterior_target import PosteriorTarget, TargetState

logger = logging.getLogger(__name__)


def derive_seed(master_seed: int, index: int) -> int:
    """Independent 64-bit seed for stream ``index`` of a master seed."""
    sequence = np.random.SeedSequence([int(master_seed), int(index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@dataclass
class _ChainState:
    target: TargetState
    frame: np.ndarray
    cov_factor: np.ndarray
    log_det: float
    mean: np.ndarray
    gradient_ok: bool = True

    @property
    def theta(self):
        return self.target.theta

    @property
    def log_density(self):
        return self.target.log_density

    @property
    def lam(self):
        solution = self.target.solution
        return None if solution is None else solution.lam


class RiemannianSampler:
    """Metropolis–Hastings on a manifold with tangent-space Gaussian proposals.

    A proposal draws v ~ N(m_θ, 2h̃ P_θ Ĩ P_θ) in T_θ𝓜 (m_θ = 0 for RRWM and
    −h̃ Ĩ grad f(θ) projected for RMALA), maps it to y = φ_θ(v) and accepts
    with the ratio built from the reverse vector v' = ψ_y(θ).
    """

    REVERSE_TOLERANCE = 1e-6

    def __init__(self, target: PosteriorTarget, config: Optional[SamplerConfig] = None):
        self.target = target
        self.config = config or SamplerConfig()
        spec = target.spec
        if self.config.algorithm == 'ambient-rwm' and spec.kind != 'ambient':
            raise ConfigError("ambient-rwm runs on an ambient manifold")
        self.geometry = ManifoldGeometry.for_spec(
            spec, trust_radius=self.config.trust_radius, phi_method=self.config.phi_method
        )
        D = spec.ambient_dim
        self.precond = np.eye(D) if self.config.precond is None else self.config.precond
        if self.precond.shape != (D, D):
            raise ConfigError(f"preconditioner must be {D}x{D}, got {self.precond.shape}")
        self.h = self.config.h if self.config.h is not None else self.default_step(spec.intrinsic_dim, target.n)
        self.rejections: Counter = Counter()

    @staticmethod
    def default_step(d: int, n: int) -> float:
        """h̃ = h / n with h = 1 / (d + log n)."""
        return 1.0 / ((d + np.log(n)) * n)

    @property
    def uses_gradient(self) -> bool:
        return self.config.algorithm == 'rmala'

    # ------------------------------------------------------------------
    # States and proposal kernels
    # ------------------------------------------------------------------

    def _make_state(self, theta: ManifoldPoint, lam0: Optional[np.ndarray] = None) -> _ChainState:
        target_state = self.target.evaluate(theta, lam0)
        V = target_state.basis.frame
        M = V.T @ self.precond @ V
        cov_factor = np.linalg.cholesky(M)
        log_det = 2.0 * np.sum(np.log(np.diag(cov_factor)))
        mean = np.zeros(V.shape[1])
        gradient_ok = True
        if self.uses_gradient and target_state.finite:
            try:
                grad = self.target.potential_rgrad(target_state.theta, target_state)
                mean = -self.h * (M @ (V.T @ grad.coords))
            except (EtelError, ManifoldError, LossDomainError) as e:
                logger.debug("gradient unavailable at state: %s", e)
                gradient_ok = False
        return _ChainState(target_state, V, cov_factor, log_det, mean, gradient_ok)

    def _log_kernel(self, state: _ChainState, v: np.ndarray) -> float:
        """log q(v | θ) up to a constant: −r'(VᵀĨV)⁻¹r / (4h̃) − ½ log|VᵀĨV|, r = Vᵀv − m_θ."""
        r = state.frame.T @ v - state.mean
        z = scipy.linalg.solve_triangular(state.cov_factor, r, lower=True)
        return float(-(z @ z) / (4.0 * self.h) - 0.5 * state.log_det)

    def _log_ratio(self, current: _ChainState, proposal: _ChainState, v: np.ndarray) -> float:
        reverse = self.geometry.psi(proposal.theta, current.theta).coords
        return (
            proposal.log_density - current.log_density
            + self._log_kernel(proposal, reverse) - self._log_kernel(current, v)
        )

    def log_acceptance_ratio(self, x: ManifoldPoint, y: ManifoldPoint) -> float:
        """Raw log acceptance ratio for the move x → y with v = ψ_x(y)."""
        current = self._make_state(x)
        proposal = self._make_state(y, current.lam)
        return self._log_ratio(current, proposal, self.geometry.psi(current.theta, proposal.theta).coords)

    def _reverse_ok(self, current: _ChainState, proposal: _ChainState) -> bool:
        reverse = self.geometry.psi(proposal.theta, current.theta)
        back, ok = self.geometry.phi(proposal.theta, reverse)
        if not ok:
            return False
        return np.linalg.norm(back - current.theta) <= self.REVERSE_TOLERANCE * (1.0 + np.linalg.norm(current.theta))

    # ------------------------------------------------------------------
    # Transitions
    # ------------------------------------------------------------------

    def step(self, current: _ChainState, rng: np.random.Generator) -> Tuple[_ChainState, bool, Optional[str]]:
        """One lazy MH transition; returns (state, accepted, rejection reason)."""
        # fixed draw layout per step: lazy coin, d normals, acceptance uniform
        lazy_draw = rng.random()
        z = rng.standard_normal(current.frame.shape[1])
        log_u = np.log(rng.random())

        if lazy_draw < self.config.zeta:
            return current, False, 'lazy'
        if not current.gradient_ok:
            return current, False, 'gradient_failed'

        u = current.mean + np.sqrt(2.0 * self.h) * (current.cov_factor @ z)
        v = current.frame @ u
        if np.linalg.norm(v) > self.geometry.trust_radius:
            return current, False, 'trust_radius'
        y, ok = self.geometry.phi(current.theta, v)
        if not ok:
            return current, False, 'phi_failed'

        try:
            proposal = self._make_state(y, current.lam)
        except (ManifoldError, LossDomainError, np.linalg.LinAlgError) as e:
            logger.debug("proposal evaluation failed: %s", e)
            return current, False, 'density'
        if not np.isfinite(proposal.log_density):
            return current, False, 'density'
        if self.uses_gradient and not proposal.gradient_ok:
            return current, False, 'gradient_failed'
        if not self._reverse_ok(current, proposal):
            return current, False, 'reverse_failed'

        if log_u < self._log_ratio(current, proposal, v):
            return proposal, True, None
        return current, False, 'density'

    def rrwm_step(self, theta: ManifoldPoint, rng: np.random.Generator) -> Tuple[ManifoldPoint, bool]:
        """Single RRWM transition from ``theta``."""
        if self.config.algorithm == 'rmala':
            raise ConfigError("sampler is configured for RMALA")
        state, accepted, _ = self.step(self._make_state(theta), rng)
        return state.theta, accepted

    def rmala_step(self, theta: ManifoldPoint, rng: np.random.Generator) -> Tuple[ManifoldPoint, bool]:
        """Single RMALA transition from ``theta``."""
        if self.config.algorithm != 'rmala':
            raise ConfigError("sampler is not configured for RMALA")
        state, accepted, _ = self.step(self._make_state(theta), rng)
        return state.theta, accepted

    def run_chain(
        self,
        init: ManifoldPoint,
        K: int,
        burnin: int = 0,
        seed: int = 0,
        progress: bool = False,
    ) -> Chain:
        """Run K transitions and keep the K − burnin states after burn-in."""
        if not K > burnin >= 0:
            raise ValueError(f"need K > burnin >= 0, got K={K}, burnin={burnin}")
        init = self.geometry.check_point(init)
        rng = np.random.default_rng(seed)
        current = self._make_state(init)
        if not np.isfinite(current.log_density):
            raise ValueError("initial state has zero posterior density")

        self.rejections = Counter()
        keep = K - burnin
        states = np.empty((keep, init.size))
        accepted = np.zeros(keep, dtype=bool)
        log_densities = np.empty(keep)
        for k in tqdm(range(K), disable=not progress, desc=self.config.algorithm, leave=False):
            current, ok, reason = self.step(current, rng)
            if reason is not None:
                self.rejections[reason] += 1
            if k >= burnin:
                states[k - burnin] = current.theta
                accepted[k - burnin] = ok
                log_densities[k - burnin] = current.log_density

        chain = Chain(
            states=states,
            accepted=accepted,
            seed=int(seed),
            config={**self.config.to_dict(), 'h': self.h},
            burnin=burnin,
            log_densities=log_densities,
            rejections=dict(self.rejections),
        )
        logger.info(
            "%s chain: %d steps, acceptance %.3f, rejections %s",
            self.config.algorithm, K, chain.acceptance_rate, dict(self.rejections),
        )
        return chain
