"""Unnormalized posterior log-densities on a manifold.

Three kinds are supported:

- ``rpetel``: log π(θ) − α_n 𝓡_n(θ) + log L_RETEL(θ)
- ``gibbs``: log π(θ) − β n 𝓡_n(θ)
- ``custom``: log π(θ) + a user log-density (used for test targets)
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from src.models.errors import ConfigError, EtelError, LossDomainError, RetractionError
from src.models.etel import EtelSolution
from src.models.manifold import ManifoldPoint, TangentBasis, TangentVector
from src.services.etel_solver import EtelSolver
from src.services.loss_functions import LossFunctions
from src.services.manifold_geometry import ManifoldGeometry

logger = logging.getLogger(__name__)


class Prior:
    """Flat prior with respect to the volume measure."""

    kind = 'uniform'

    def log_density(self, theta: np.ndarray) -> float:
        return 0.0

    def euclidean_grad(self, theta: np.ndarray) -> np.ndarray:
        return np.zeros_like(theta)

    def to_dict(self):
        return {'kind': self.kind}

    @staticmethod
    def from_dict(data: Optional[dict]) -> 'Prior':
        if not data or data.get('kind', 'uniform') == 'uniform':
            return Prior()
        if data['kind'] == 'gaussian':
            return GaussianPrior(np.asarray(data['mean'], dtype=float), float(data.get('scale', 1.0)))
        raise ConfigError(f"unknown prior kind '{data['kind']}'")


class GaussianPrior(Prior):
    """Isotropic ambient Gaussian restricted to the manifold."""

    kind = 'gaussian'

    def __init__(self, mean: np.ndarray, scale: float = 1.0):
        if scale <= 0:
            raise ConfigError("gaussian prior scale must be positive")
        self.mean = mean
        self.scale = scale

    def log_density(self, theta):
        diff = theta - self.mean
        return float(-0.5 * diff @ diff / self.scale ** 2)

    def euclidean_grad(self, theta):
        return -(theta - self.mean) / self.scale ** 2

    def to_dict(self):
        return {'kind': self.kind, 'mean': self.mean.tolist(), 'scale': self.scale}


@dataclass
class TargetState:
    """Everything computed for one point: density, tangent basis, ETEL solution."""
    theta: ManifoldPoint
    log_density: float
    basis: TangentBasis
    solution: Optional[EtelSolution] = None
    grads: Optional[np.ndarray] = None
    risk: Optional[float] = None

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.log_density))


class PosteriorTarget:
    """Posterior on a manifold built from a loss and observations."""

    ALPHA_RULES = {
        'half_log_n': 0.5,
        'log_n': 1.0,
        'two_log_n': 2.0,
        'three_log_n': 3.0,
    }
    DEFAULT_ALPHA_RULE = 'two_log_n'
    GRADIENT_FD_STEP = 1e-5
    CACHE_SIZE = 16

    def __init__(
        self,
        loss_fn: Optional[LossFunctions] = None,
        data=None,
        kind: str = 'rpetel',
        alpha_rule: Union[str, float, None] = None,
        beta: Optional[float] = None,
        prior: Optional[Prior] = None,
        log_density: Optional[Callable[[np.ndarray], float]] = None,
        log_density_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        geometry: Optional[ManifoldGeometry] = None,
    ):
        if kind not in ('rpetel', 'gibbs', 'custom'):
            raise ConfigError(f"unknown posterior kind '{kind}'")
        self.kind = kind
        self.loss_fn = loss_fn
        self.prior = prior or Prior()
        self.log_density_fn = log_density
        self.log_density_grad = log_density_grad
        self.solver = EtelSolver()
        self._cache: 'OrderedDict[bytes, TargetState]' = OrderedDict()

        if kind == 'custom':
            if log_density is None:
                raise ConfigError("a custom posterior needs a log_density callable")
            self.geometry = geometry or loss_fn.geometry
            self.data = None if data is None else np.asarray(data, dtype=float)
        else:
            if loss_fn is None:
                raise ConfigError(f"a {kind} posterior needs a loss")
            self.geometry = geometry or loss_fn.geometry
            self.data = loss_fn.check_data(data)

        self.alpha_n = 0.0
        self.beta = None
        if kind == 'rpetel':
            self.alpha_n = self.alpha_for(alpha_rule if alpha_rule is not None else self.DEFAULT_ALPHA_RULE, self.n)
        elif kind == 'gibbs':
            if beta is None or beta <= 0:
                raise ConfigError("a gibbs posterior needs a positive beta")
            self.beta = float(beta)

    @classmethod
    def custom(cls, geometry: ManifoldGeometry, log_density, log_density_grad=None, prior=None) -> 'PosteriorTarget':
        return cls(kind='custom', log_density=log_density, log_density_grad=log_density_grad,
                   prior=prior, geometry=geometry)

    @classmethod
    def alpha_for(cls, rule: Union[str, float], n: int) -> float:
        """α_n for a named rule (multiples of log n) or a literal number."""
        if isinstance(rule, str):
            if rule not in cls.ALPHA_RULES:
                raise ConfigError(f"unknown alpha rule '{rule}'; choose from {sorted(cls.ALPHA_RULES)}")
            return cls.ALPHA_RULES[rule] * np.log(n)
        if rule < 0:
            raise ConfigError("alpha_n must be nonnegative")
        return float(rule)

    @property
    def spec(self):
        return self.geometry.spec

    @property
    def n(self) -> int:
        return 1 if self.data is None else self.data.shape[0]

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def evaluate(self, theta: ManifoldPoint, lam0: Optional[np.ndarray] = None) -> TargetState:
        theta = self.geometry.check_point(theta)
        key = theta.tobytes()
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]

        basis = self.geometry.tangent_basis(theta)
        log_prior = self.prior.log_density(theta)
        if self.kind == 'custom':
            state = TargetState(theta, float(log_prior + self.log_density_fn(theta)), basis)
        else:
            state = self._evaluate_loss_target(theta, basis, log_prior, lam0)

        self._cache[key] = state
        if len(self._cache) > self.CACHE_SIZE:
            self._cache.popitem(last=False)
        return state

    def _evaluate_loss_target(self, theta, basis, log_prior, lam0) -> TargetState:
        try:
            risk = self.loss_fn.empirical_risk(self.data, theta)
            grads = self.loss_fn.loss_rgrads(self.data, theta) if self.kind == 'rpetel' else None
        except LossDomainError as e:
            logger.debug("loss undefined at proposal: %s", e)
            return TargetState(theta, -np.inf, basis)
        if self.kind == 'gibbs':
            return TargetState(theta, float(log_prior - self.beta * self.n * risk), basis, risk=risk)
        solution = self.solver.solve(grads, basis, lam0)
        log_density = log_prior - self.alpha_n * risk + solution.log_likelihood
        return TargetState(theta, float(log_density), basis, solution, grads, risk)

    def etel_solution(self, theta: ManifoldPoint, lam0: Optional[np.ndarray] = None) -> EtelSolution:
        if self.kind != 'rpetel':
            raise EtelError(f"a {self.kind} posterior has no tilted likelihood")
        state = self.evaluate(theta, lam0)
        if state.solution is None:
            raise EtelError("loss is undefined at this point")
        return state.solution

    def log_retel(self, theta: ManifoldPoint) -> float:
        """Σ λ̄ᵀḡ_i − n log Σ exp(λ̄ᵀḡ_j), −∞ when the constraint is infeasible."""
        if self.kind != 'rpetel':
            raise EtelError(f"a {self.kind} posterior has no tilted likelihood")
        solution = self.evaluate(theta).solution
        return -np.inf if solution is None else solution.log_likelihood

    def log_posterior(self, theta: ManifoldPoint) -> float:
        return self.evaluate(theta).log_density

    # ------------------------------------------------------------------
    # Gradient of the potential f = −log posterior
    # ------------------------------------------------------------------

    def potential_rgrad(self, theta: ManifoldPoint, state: Optional[TargetState] = None) -> TangentVector:
        state = state or self.evaluate(theta)
        if not state.finite:
            raise EtelError("potential gradient is undefined where the posterior density is zero")
        theta = state.theta
        prior_part = -self.geometry.project_tangent(theta, self.prior.euclidean_grad(theta))

        if self.kind == 'custom':
            if self.log_density_grad is None:
                raise EtelError("custom posterior has no gradient callable")
            grad = -self.geometry.project_tangent(theta, self.log_density_grad(theta))
        elif self.kind == 'gibbs':
            grad = self.beta * self.loss_fn.loss_rgrads(self.data, theta).sum(axis=0)
        else:
            grad = self._rpetel_potential_grad(state)
        return TangentVector(base=theta, coords=grad + prior_part)

    def _rpetel_potential_grad(self, state: TargetState) -> np.ndarray:
        """α_n grad 𝓡_n − grad log L by implicit differentiation of the dual solution.

        Directional derivatives of the ḡ field are central differences along the
        retraction, one pair per basis direction.
        """
        if not self.loss_fn.model.smooth:
            raise EtelError("the tilted-likelihood gradient needs a smooth loss; use RRWM")
        theta, V = state.theta, state.basis.frame
        g = state.grads
        w = state.solution.weights
        lam = state.solution.lam
        n = self.n
        S = g.sum(axis=0)
        S_coords = V.T @ S

        gc = g @ V
        H = (gc * w[:, None]).T @ gc
        evals = np.linalg.eigvalsh(H)
        if evals[0] <= EtelSolver.SINGULAR_RCOND * max(evals[-1], 1e-300):
            raise EtelError("tilted covariance of the gradients is singular")

        t = self.GRADIENT_FD_STEP
        coefficients = np.empty(V.shape[1])
        for j in range(V.shape[1]):
            eta = V[:, j]
            try:
                forward = self.geometry.retract(theta, t * eta)
                backward = self.geometry.retract(theta, -t * eta)
                Dg = (self.loss_fn.loss_rgrads(self.data, forward)
                      - self.loss_fn.loss_rgrads(self.data, backward)) / (2 * t)
            except (RetractionError, LossDomainError) as e:
                raise EtelError(f"cannot differentiate the gradient field: {e}") from e
            lam_Dg = Dg @ lam
            rhs = w @ Dg + (w * lam_Dg) @ g
            a = -np.linalg.solve(H, V.T @ rhs)
            d_neg_log_lik = -a @ S_coords - lam_Dg.sum() + n * (w @ lam_Dg)
            coefficients[j] = d_neg_log_lik + self.alpha_n / n * (eta @ S)
        return V @ coefficients
