"""Loss functions, their Riemannian (sub)gradient fields and empirical risk.

Every operation is batched over the rows of a 2-d observation array; the
scalar forms are thin wrappers around the batched ones.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.stats import norm

from src.models.errors import DimensionMismatchError, LossDomainError
from src.models.loss import LossModel
from src.models.manifold import TangentVector
from src.services.manifold_geometry import ManifoldGeometry, to_matrices, to_vectors

logger = logging.getLogger(__name__)


class LossFunctions:
    """Evaluates ℓ(x, θ) and ḡ(x, θ) for one LossModel."""

    # c = xᵀθ beyond these limits uses the removable-singularity value / is an error
    COINCIDENT_LIMIT = 1.0 - 1e-9
    ANTIPODAL_LIMIT = -1.0 + 1e-9
    PSD_TOLERANCE = 1e-10

    def __init__(self, model: LossModel, geometry: Optional[ManifoldGeometry] = None):
        self.model = model
        self.geometry = geometry or ManifoldGeometry.for_spec(model.manifold)

    # ------------------------------------------------------------------
    # Input handling
    # ------------------------------------------------------------------

    def check_data(self, data) -> np.ndarray:
        """Observations as an (n, observation_dim) float array."""
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[None, :]
        if data.shape[0] == 0:
            raise ValueError("empirical risk needs at least one observation")
        if data.ndim != 2 or data.shape[1] != self.model.observation_dim:
            raise DimensionMismatchError(
                f"observations have shape {data.shape}, expected (n, {self.model.observation_dim})"
            )
        return data

    def _prepare(self, data, theta) -> Tuple[np.ndarray, np.ndarray]:
        return self.check_data(data), self.geometry.check_point(theta)

    # ------------------------------------------------------------------
    # Batched evaluation
    # ------------------------------------------------------------------

    def loss_values(self, data, theta) -> np.ndarray:
        """ℓ(x_i, θ) for every observation row."""
        data, theta = self._prepare(data, theta)
        kind = self.model.kind
        if kind == 'extrinsic-mean':
            diff = theta - data
            return np.einsum('ij,ij->i', diff, diff)
        if kind in ('frechet-sphere', 'frechet-so2'):
            return np.arccos(np.clip(self._cosines(data, theta), -1.0, 1.0)) ** 2
        if kind == 'bw-barycenter':
            return self._bw_values(data, theta)
        if kind == 'spectral-projector':
            P = to_matrices(theta, data.shape[1], data.shape[1])
            return -np.einsum('ij,jk,ik->i', data, P, data)
        return self._quantile_values(data, theta)

    def euclidean_grads(self, data, theta) -> np.ndarray:
        """Ambient (sub)gradients ∇_θ ℓ(x_i, θ), one row per observation."""
        data, theta = self._prepare(data, theta)
        kind = self.model.kind
        if kind == 'extrinsic-mean':
            return 2.0 * (theta - data)
        if kind == 'frechet-sphere':
            return self._arccos_sq_slope(data @ theta)[:, None] * data
        if kind == 'frechet-so2':
            grads = np.zeros((data.shape[0], theta.size))
            slope = self._arccos_sq_slope(self._cosines(data, theta))
            grads[:, 0] = slope * data[:, 0]
            grads[:, 1] = slope * data[:, 1]
            return grads
        if kind == 'bw-barycenter':
            return self._bw_grads(data, theta)
        if kind == 'spectral-projector':
            return -np.einsum('ij,ik->ikj', data, data).reshape(data.shape[0], -1)
        return self._quantile_grads(data, theta)

    def loss_rgrads(self, data, theta) -> np.ndarray:
        """ḡ(x_i, θ) = P_θ ∇_θ ℓ(x_i, θ), one tangent vector per row."""
        grads = self.euclidean_grads(data, theta)
        return self.geometry.project_tangent(theta, grads)

    # ------------------------------------------------------------------
    # Scalar forms
    # ------------------------------------------------------------------

    def loss_eval(self, x, theta) -> float:
        return float(self.loss_values(np.atleast_2d(x), theta)[0])

    def loss_rgrad(self, x, theta) -> TangentVector:
        theta = np.asarray(theta, dtype=float)
        return TangentVector(base=theta, coords=self.loss_rgrads(np.atleast_2d(x), theta)[0])

    def empirical_risk(self, data, theta) -> float:
        """𝓡_n(θ) = n⁻¹ Σ ℓ(X_i, θ)."""
        return float(np.mean(self.loss_values(data, theta)))

    def risk_rgrad(self, data, theta) -> np.ndarray:
        return self.loss_rgrads(data, theta).mean(axis=0)

    # ------------------------------------------------------------------
    # Geodesic losses
    # ------------------------------------------------------------------

    def _cosines(self, data, theta):
        if self.model.kind == 'frechet-so2':
            return data[:, 0] * theta[0] + data[:, 1] * theta[1]
        return data @ theta

    def _arccos_sq_slope(self, c):
        """d/dc arccos²(c) with the c → 1 limit and an error at c → −1."""
        if np.any(c < self.ANTIPODAL_LIMIT):
            raise LossDomainError("geodesic loss gradient is undefined at antipodal points")
        slope = np.full(c.shape, -2.0)
        inner = c <= self.COINCIDENT_LIMIT
        ci = c[inner]
        slope[inner] = -2.0 * np.arccos(ci) / np.sqrt(1.0 - ci * ci)
        return slope

    # ------------------------------------------------------------------
    # Bures–Wasserstein
    # ------------------------------------------------------------------

    def _matrix_roots(self, theta, p, need_inverse):
        Q = to_matrices(theta, p, p)
        Q = 0.5 * (Q + Q.T)
        w, U = np.linalg.eigh(Q)
        scale = max(1.0, np.abs(w).max())
        if w[0] < -self.PSD_TOLERANCE * scale:
            raise LossDomainError("Bures-Wasserstein loss needs a positive semidefinite θ")
        if need_inverse and w[0] <= self.PSD_TOLERANCE * scale:
            raise LossDomainError("Bures-Wasserstein gradient needs a positive definite θ")
        w = np.clip(w, 0.0, None)
        root = (U * np.sqrt(w)) @ U.T
        inv_root = (U / np.sqrt(w)) @ U.T if need_inverse else None
        return root, inv_root

    def _data_matrices(self, data, p):
        S = to_matrices(data, p, p)
        S = 0.5 * (S + S.swapaxes(-1, -2))
        w = np.linalg.eigvalsh(S)
        if np.any(w[:, 0] < -self.PSD_TOLERANCE * np.maximum(1.0, np.abs(w).max(axis=1))):
            raise LossDomainError("Bures-Wasserstein observations must be positive semidefinite")
        return S

    def _bw_cross_roots(self, data, theta, need_inverse):
        p = self.model.manifold.params['p']
        root, inv_root = self._matrix_roots(theta, p, need_inverse)
        S = self._data_matrices(data, p)
        w, U = np.linalg.eigh(root @ S @ root)
        return p, root, inv_root, S, np.clip(w, 0.0, None), U

    def _bw_values(self, data, theta):
        p, root, _, S, w, _ = self._bw_cross_roots(data, theta, need_inverse=False)
        trace_theta = np.trace(root @ root)
        return trace_theta + np.trace(S, axis1=1, axis2=2) - 2.0 * np.sqrt(w).sum(axis=1)

    def _bw_grads(self, data, theta):
        """I − θ^{-1/2}(θ^{1/2} S θ^{1/2})^{1/2} θ^{-1/2} per observation."""
        p, _, inv_root, _, w, U = self._bw_cross_roots(data, theta, need_inverse=True)
        cross_root = (U * np.sqrt(w)[:, None, :]) @ U.swapaxes(-1, -2)
        transport = inv_root @ cross_root @ inv_root
        return to_vectors(np.eye(p) - transport)

    # ------------------------------------------------------------------
    # Multiple quantile regression
    # ------------------------------------------------------------------

    def _quantile_split(self, data, theta):
        K = len(self.model.levels)
        p = self.model.covariate_dim
        intercepts = theta[:K] if self.model.intercept else np.zeros(K)
        B = to_matrices(theta[K:] if self.model.intercept else theta, p, K)
        covariates, response = data[:, :p], data[:, p]
        residuals = response[:, None] - covariates @ B - intercepts
        return covariates, residuals

    def _quantile_values(self, data, theta):
        _, r = self._quantile_split(data, theta)
        tau = np.asarray(self.model.levels)
        h = self.model.bandwidth
        if h is None:
            return np.sum(r * (tau - (r <= 0)), axis=1)
        return np.sum(r * (tau - norm.cdf(-r / h)) + h * norm.pdf(r / h), axis=1)

    def _quantile_grads(self, data, theta):
        """Check-loss subgradient with 1(t ≤ 0) active at t = 0."""
        covariates, r = self._quantile_split(data, theta)
        tau = np.asarray(self.model.levels)
        h = self.model.bandwidth
        slope = tau - (r <= 0) if h is None else tau - norm.cdf(-r / h)
        n = data.shape[0]
        coef_grads = (-slope[:, :, None] * covariates[:, None, :]).reshape(n, -1)
        if self.model.intercept:
            return np.hstack([-slope, coef_grads])
        return coef_grads
