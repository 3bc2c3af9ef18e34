"""Empirical risk minimization on a manifold by Riemannian gradient descent."""
import logging
import warnings
from typing import Optional, Tuple

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import QuantileRegressor

from src.models.errors import LossDomainError, OptimizationError, RetractionError
from src.models.experiment import ErmResult
from src.services.loss_functions import LossFunctions
from src.services.manifold_geometry import to_vectors

logger = logging.getLogger(__name__)


class ErmOracle:
    """Multi-start Riemannian gradient descent with Barzilai–Borwein trial steps and Armijo backtracking.

    The check loss is minimized through a decreasing sequence of Gaussian
    smoothing bandwidths, warm-started from per-level linear quantile fits.
    """

    RESTARTS = 8
    GRAD_TOLERANCE = 1e-10
    CONVERGED_TOLERANCE = 1e-6
    NONSMOOTH_TOLERANCE = 1e-4
    MAX_ITERATIONS = 2000
    ARMIJO_C = 1e-4
    MIN_STEP = 1e-14
    MAX_STEP = 1e4
    ROUNDOFF = 1e-13
    RESTART_SCALE = 0.2
    BANDWIDTHS = (0.5, 0.1, 0.02, 0.005)
    WARM_START_SUBSAMPLE = 5000

    def __init__(self, loss_fn: LossFunctions):
        self.loss_fn = loss_fn
        self.geometry = loss_fn.geometry

    # ------------------------------------------------------------------
    # Starting points
    # ------------------------------------------------------------------

    def initial_guess(self, data: np.ndarray, seed: int = 0) -> np.ndarray:
        """A data-driven start: projected mean, leading eigenspace, or linear quantile fits."""
        model = self.loss_fn.model
        if model.kind == 'spectral-projector':
            w, U = np.linalg.eigh(data.T @ data / data.shape[0])
            top = U[:, -self.geometry.spec.params['r']:]
            return to_vectors(top @ top.T)
        if model.kind == 'multi-quantile':
            return self.geometry.project_to_manifold(self._quantile_warm_start(data, seed))
        return self.geometry.project_to_manifold(data.mean(axis=0))

    def _quantile_warm_start(self, data, seed):
        model = self.loss_fn.model
        p = model.covariate_dim
        rng = np.random.default_rng(seed)
        if data.shape[0] > self.WARM_START_SUBSAMPLE:
            data = data[rng.choice(data.shape[0], self.WARM_START_SUBSAMPLE, replace=False)]
        X, y = data[:, :p], data[:, p]
        intercepts, columns = [], []
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', ConvergenceWarning)
            for tau in model.levels:
                fit = QuantileRegressor(quantile=tau, alpha=0.0, fit_intercept=model.intercept, solver='highs')
                fit.fit(X, y)
                columns.append(fit.coef_)
                intercepts.append(fit.intercept_)
        coef = np.column_stack(columns).T.reshape(-1)
        return np.concatenate([intercepts, coef]) if model.intercept else coef

    def _restart_points(self, init, restarts, seed):
        rng = np.random.default_rng(seed)
        points = [init]
        for _ in range(restarts - 1):
            scale = self.RESTART_SCALE * max(1.0, np.linalg.norm(init))
            try:
                points.append(self.geometry.retract(init, self.geometry.random_tangent(init, rng, scale)))
            except RetractionError:
                points.append(init)
        return points

    # ------------------------------------------------------------------
    # Descent
    # ------------------------------------------------------------------

    def descend(self, loss_fn: LossFunctions, data, theta, tolerance: float) -> Tuple[np.ndarray, float, float]:
        """Riemannian gradient descent from ``theta``; returns (θ, risk, ‖grad‖)."""
        risk = loss_fn.empirical_risk(data, theta)
        grad = loss_fn.risk_rgrad(data, theta)
        step = 1.0
        prev_theta, prev_grad = None, None
        for _ in range(self.MAX_ITERATIONS):
            g2 = grad @ grad
            if np.sqrt(g2) <= tolerance:
                break
            if prev_theta is not None:
                s = self.geometry.project_tangent(theta, theta - prev_theta)
                y = grad - self.geometry.project_tangent(theta, prev_grad)
                sy = s @ y
                step = min(s @ s / sy, self.MAX_STEP) if sy > 0 else min(2.0 * step, self.MAX_STEP)
            candidate_grad = None
            while step >= self.MIN_STEP:
                try:
                    candidate = self.geometry.retract(theta, -step * grad)
                    candidate_risk = loss_fn.empirical_risk(data, candidate)
                except (RetractionError, LossDomainError):
                    step *= 0.5
                    continue
                if candidate_risk <= risk - self.ARMIJO_C * step * g2:
                    candidate_grad = loss_fn.risk_rgrad(data, candidate)
                    break
                # below roundoff the risk cannot rank points; accept a smaller gradient instead
                if abs(candidate_risk - risk) <= self.ROUNDOFF * max(1.0, abs(risk)):
                    trial_grad = loss_fn.risk_rgrad(data, candidate)
                    if trial_grad @ trial_grad < g2:
                        candidate_grad = trial_grad
                        break
                step *= 0.5
            if candidate_grad is None:
                break
            prev_theta, prev_grad = theta, grad
            theta, risk, grad = candidate, candidate_risk, candidate_grad
        return theta, risk, float(np.linalg.norm(grad))

    def _minimize_from(self, data, theta):
        model = self.loss_fn.model
        if model.smooth:
            theta, risk, grad_norm = self.descend(self.loss_fn, data, theta, self.GRAD_TOLERANCE)
            return theta, risk, grad_norm, grad_norm <= self.CONVERGED_TOLERANCE
        scale = float(np.std(data[:, model.covariate_dim])) or 1.0
        grad_norm = np.inf
        for bandwidth in self.BANDWIDTHS:
            smoothed = LossFunctions(model.smoothed(bandwidth * scale), self.geometry)
            theta, _, grad_norm = self.descend(smoothed, data, theta, self.GRAD_TOLERANCE)
        risk = self.loss_fn.empirical_risk(data, theta)
        return theta, risk, grad_norm, grad_norm <= self.NONSMOOTH_TOLERANCE

    def minimize(
        self,
        data,
        init: Optional[np.ndarray] = None,
        restarts: Optional[int] = None,
        seed: int = 0,
    ) -> ErmResult:
        """Best of ``restarts`` descents (the first from ``init`` or the data-driven guess)."""
        data = self.loss_fn.check_data(data)
        restarts = self.RESTARTS if restarts is None else max(1, restarts)
        init = self.initial_guess(data, seed) if init is None else self.geometry.check_point(init)

        best = None
        converged_count = 0
        for index, start in enumerate(self._restart_points(init, restarts, seed)):
            try:
                theta, risk, grad_norm, converged = self._minimize_from(data, start)
            except LossDomainError as e:
                logger.debug("restart %d left the loss domain: %s", index, e)
                continue
            converged_count += int(converged)
            key = (not converged, risk)
            if best is None or key < best[0]:
                best = (key, theta, risk, grad_norm, converged)
            logger.debug("restart %d: risk %.10g, |grad| %.3e", index, risk, grad_norm)

        if best is None or (self.loss_fn.model.smooth and converged_count == 0):
            raise OptimizationError(f"no restart of the {self.loss_fn.model.kind} minimizer converged")
        _, theta, risk, grad_norm, converged = best
        if not converged:
            logger.warning("smoothed check-loss minimizer stopped at |grad| %.3e", grad_norm)
        logger.info("ERM %s: risk %.8g, |grad| %.2e, %d/%d restarts converged",
                    self.loss_fn.model.kind, risk, grad_norm, converged_count, restarts)
        return ErmResult(theta, risk, grad_norm, converged, converged_count)
