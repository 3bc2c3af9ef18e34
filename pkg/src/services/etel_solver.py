"""Dual Newton solver for the exponentially tilted empirical likelihood."""
import logging
from typing import Optional

import numpy as np
from scipy.special import logsumexp, softmax

from src.models.etel import EtelSolution
from src.models.manifold import TangentBasis

logger = logging.getLogger(__name__)


class EtelSolver:
    """Minimizes Σ exp(λᵀg_i) over λ in the tangent space.

    Works in the d basis coordinates of the tangent space. Each Newton step is
    damped by halving until the dual objective stops increasing; the objective
    is tracked on the log scale so large n and large gradients do not overflow.
    """

    STEP_TOLERANCE = 1e-9
    MAX_ITERATIONS = 50
    MIN_DAMPING = 2.0 ** -30
    RESIDUAL_TOLERANCE = 1e-8
    SINGULAR_RCOND = 1e-10

    def solve(
        self,
        grads: np.ndarray,
        basis: TangentBasis,
        lam0: Optional[np.ndarray] = None,
    ) -> EtelSolution:
        """Solve for λ̄(θ) given ḡ(X_i, θ) as the rows of ``grads``.

        ``lam0`` is an ambient warm start (typically the multiplier of the
        previous chain state); it is projected onto the tangent basis and the
        solver falls back to a cold start if the warm run does not converge.
        """
        grads = np.atleast_2d(np.asarray(grads, dtype=float))
        coords = basis.coordinates(grads)
        if lam0 is not None:
            solution = self._newton(grads, coords, basis, basis.coordinates(np.asarray(lam0, dtype=float)))
            if solution.converged:
                return solution
            logger.debug("warm-started ETEL solve failed (residual %.3e), retrying cold", solution.residual)
        return self._newton(grads, coords, basis, np.zeros(basis.dim))

    def _newton(self, grads, coords, basis, a) -> EtelSolution:
        s = coords @ a
        objective = logsumexp(s)
        history = [float(objective)]
        used_lstsq = False
        iteration = 0
        for iteration in range(1, self.MAX_ITERATIONS + 1):
            w = softmax(s)
            gradient = w @ coords
            if not np.any(gradient):
                break
            H = (coords * w[:, None]).T @ coords
            evals = np.linalg.eigvalsh(H)
            if evals[-1] <= 0 or evals[0] <= self.SINGULAR_RCOND * evals[-1]:
                step = np.linalg.lstsq(H, -gradient, rcond=self.SINGULAR_RCOND)[0]
                used_lstsq = True
            else:
                step = np.linalg.solve(H, -gradient)

            gamma = 1.0
            while gamma >= self.MIN_DAMPING:
                a_new = a + gamma * step
                s_new = coords @ a_new
                objective_new = logsumexp(s_new)
                if np.isfinite(objective_new) and objective_new <= objective + 1e-12 * max(1.0, abs(objective)):
                    break
                gamma *= 0.5
            else:
                logger.debug("ETEL damping fell below %.1e at iteration %d", self.MIN_DAMPING, iteration)
                break

            a, s, objective = a_new, s_new, objective_new
            history.append(float(objective))
            if np.linalg.norm(gamma * step) <= self.STEP_TOLERANCE:
                break

        log_weights = s - logsumexp(s)
        weights = np.exp(log_weights)
        weights /= weights.sum()
        residual = float(np.linalg.norm(weights @ grads))
        converged = bool(np.isfinite(residual) and residual <= self.RESIDUAL_TOLERANCE)
        return EtelSolution(
            lam=basis.ambient(a),
            lam_coords=a,
            weights=weights,
            log_weights=log_weights,
            converged=converged,
            residual=residual,
            iterations=iteration,
            used_lstsq=used_lstsq,
            objective_history=history,
        )
