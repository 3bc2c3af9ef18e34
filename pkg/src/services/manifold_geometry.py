"""Embedded-submanifold geometry: projectors, bases, (phi, psi), retractions, projection.

Every manifold lives in R^D with the induced Euclidean metric. Matrices are
column-vectorized, so a p×k matrix is an ambient vector of length p·k.
"""
import logging
from typing import Dict, Optional, Tuple, Type, Union

import numpy as np
import scipy.linalg

from src.models.errors import (
    DimensionMismatchError,
    FocalPointError,
    MembershipError,
    RankDeficiencyError,
    RetractionError,
)
from src.models.manifold import ManifoldPoint, ManifoldSpec, TangentBasis, TangentVector
from src.services.constraint_registry import ConstraintRegistry

logger = logging.getLogger(__name__)

VectorLike = Union[TangentVector, np.ndarray]


def to_matrices(x: np.ndarray, p: int, k: int) -> np.ndarray:
    """Column-vectorized (..., p*k) array to (..., p, k) matrices."""
    x = np.asarray(x, dtype=float)
    return x.reshape(x.shape[:-1] + (k, p)).swapaxes(-1, -2)


def to_vectors(M: np.ndarray) -> np.ndarray:
    """(..., p, k) matrices to column-vectorized (..., p*k) arrays."""
    return M.swapaxes(-1, -2).reshape(M.shape[:-2] + (-1,))


def sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.swapaxes(-1, -2))


def fix_column_signs(frame: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip columns so that the first entry with magnitude above ``tol`` is positive."""
    frame = frame.copy()
    for j in range(frame.shape[1]):
        nonzero = np.flatnonzero(np.abs(frame[:, j]) > tol)
        if nonzero.size and frame[nonzero[0], j] < 0:
            frame[:, j] = -frame[:, j]
    return frame


class ManifoldGeometry:
    """Geometry callbacks for one ManifoldSpec.

    Subclasses supply the membership residual, the tangent projection, a
    retraction and the nearest-point projection; phi defaults to the
    Riemannian gradient-descent solve of min ||P_θ(y - θ) - v||² over y.
    """

    PHI_TOLERANCE = 1e-10
    PHI_MAX_ITERATIONS = 500
    NEWTON_MAX_ITERATIONS = 100
    ROUND_TRIP_TOLERANCE = 1e-8
    ARMIJO_C = 1e-4
    MIN_STEP = 1e-12
    PINV_RCOND = 1e-10
    DEFAULT_TRUST_RADIUS = 0.5

    _registry: Dict[str, Type['ManifoldGeometry']] = {}

    def __init__(self, spec: ManifoldSpec, trust_radius: Optional[float] = None, phi_method: str = 'gradient'):
        if phi_method not in ('gradient', 'newton'):
            raise ValueError(f"phi_method must be 'gradient' or 'newton', got {phi_method!r}")
        self.spec = spec
        self.trust_radius = self.DEFAULT_TRUST_RADIUS if trust_radius is None else float(trust_radius)
        self.phi_method = phi_method

    def __init_subclass__(cls, kind: Optional[str] = None, **kwargs):
        super().__init_subclass__(**kwargs)
        if kind is not None:
            ManifoldGeometry._registry[kind] = cls

    @classmethod
    def for_spec(cls, spec: ManifoldSpec, **kwargs) -> 'ManifoldGeometry':
        """Geometry instance for ``spec``."""
        return cls._registry[spec.kind](spec, **kwargs)

    @property
    def ambient_dim(self) -> int:
        return self.spec.ambient_dim

    @property
    def intrinsic_dim(self) -> int:
        return self.spec.intrinsic_dim

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def _check_shape(self, x: np.ndarray, what: str = 'point') -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.ambient_dim,):
            raise DimensionMismatchError(
                f"{what} has shape {x.shape}, expected ({self.ambient_dim},) for {self.spec.kind}"
            )
        return x

    def membership_residual(self, theta: ManifoldPoint) -> float:
        return float(self._residual(self._check_shape(theta)))

    def is_member(self, theta: ManifoldPoint) -> bool:
        try:
            return self.membership_residual(theta) <= self.spec.membership_tol
        except (DimensionMismatchError, RankDeficiencyError):
            return False

    def check_point(self, theta: ManifoldPoint) -> np.ndarray:
        """Return ``theta`` as a float array, raising if it is off the manifold."""
        theta = self._check_shape(theta)
        residual = float(self._residual(theta))
        if not residual <= self.spec.membership_tol:
            raise MembershipError(self.spec.kind, residual, self.spec.membership_tol)
        return theta

    def _vector_coords(self, theta: np.ndarray, v: VectorLike) -> np.ndarray:
        coords = v.coords if isinstance(v, TangentVector) else v
        return self._check_shape(coords, 'tangent vector')

    # ------------------------------------------------------------------
    # Tangent spaces
    # ------------------------------------------------------------------

    def project_tangent(self, theta: ManifoldPoint, z: np.ndarray) -> np.ndarray:
        """P_θ applied to an ambient vector or to each row of a 2-d array (no membership check)."""
        return self._project_tangent(np.asarray(theta, dtype=float), np.asarray(z, dtype=float))

    def tangent_projector(self, theta: ManifoldPoint) -> np.ndarray:
        theta = self.check_point(theta)
        P = self._project_tangent(theta, np.eye(self.ambient_dim))
        return sym(P)

    def tangent_basis(self, theta: ManifoldPoint) -> TangentBasis:
        """Orthonormal frame of range(P_θ) by pivoted QR, signs fixed for determinism."""
        P = self.tangent_projector(theta)
        d = self.intrinsic_dim
        if d == 0:
            return TangentBasis(base=theta, frame=np.zeros((self.ambient_dim, 0)))
        Q, _, _ = scipy.linalg.qr(P, pivoting=True)
        return TangentBasis(base=np.asarray(theta, dtype=float), frame=fix_column_signs(Q[:, :d]))

    def random_tangent(self, theta: ManifoldPoint, rng: np.random.Generator, scale: float = 1.0) -> TangentVector:
        """Tangent vector at θ with the given norm and a uniformly random direction."""
        basis = self.tangent_basis(theta)
        a = rng.standard_normal(basis.dim)
        coords = basis.ambient(a / max(np.linalg.norm(a), 1e-300)) * scale
        return TangentVector(base=basis.base, coords=coords)

    def random_point(self, rng: np.random.Generator) -> ManifoldPoint:
        return self._random_point(rng)

    # ------------------------------------------------------------------
    # Unit local parametrization
    # ------------------------------------------------------------------

    def psi(self, theta: ManifoldPoint, y: ManifoldPoint) -> TangentVector:
        """ψ_θ(y) = P_θ(y − θ)."""
        theta = self.check_point(theta)
        y = self.check_point(y)
        return TangentVector(base=theta, coords=self._project_tangent(theta, y - theta))

    def phi(self, theta: ManifoldPoint, v: VectorLike) -> Tuple[ManifoldPoint, bool]:
        """Inverse of ψ_θ. Returns (y, True) on success and (θ, False) otherwise."""
        theta = self.check_point(theta)
        coords = self._vector_coords(theta, v)
        norm_v = float(np.linalg.norm(coords))
        if norm_v == 0.0:
            return theta.copy(), True
        if norm_v > self.trust_radius:
            return theta, False
        try:
            y, ok = self._phi(theta, coords)
        except (RetractionError, FocalPointError, np.linalg.LinAlgError) as e:
            logger.debug("phi failed at |v|=%.3e: %s", norm_v, e)
            return theta, False
        if not ok:
            return theta, False
        residual = np.linalg.norm(self._project_tangent(theta, y - theta) - coords)
        if residual > self.ROUND_TRIP_TOLERANCE * (1.0 + norm_v) or not self.is_member(y):
            return theta, False
        return y, True

    def _phi(self, theta: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, bool]:
        return self._phi_by_descent(theta, v)

    def _phi_by_descent(self, theta: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, bool]:
        """Minimize f(y) = ½||P_θ(y − θ) − v||² from y = θ using the retraction.

        Gradient descent with Armijo backtracking by default; ``phi_method='newton'``
        uses the Gauss–Newton model P_y P_θ on T_y.
        """
        scale = 1.0 + np.linalg.norm(v)

        def residual(y):
            return self._project_tangent(theta, y - theta) - v

        y = theta.copy()
        r = residual(y)
        f = 0.5 * r @ r
        for iteration in range(self.PHI_MAX_ITERATIONS):
            if np.linalg.norm(r) <= self.PHI_TOLERANCE * scale:
                return y, True
            G = self._project_tangent(y, r)
            if self.phi_method == 'newton':
                basis = self.tangent_basis(y).frame
                A = basis.T @ self._project_tangent(theta, basis.T).T
                step = basis @ np.linalg.lstsq(A, -(basis.T @ G), rcond=None)[0]
            else:
                step = -G
            slope = G @ step
            if slope >= 0:
                break
            alpha = 1.0
            while alpha >= self.MIN_STEP:
                try:
                    y_new = self._retract(y, alpha * step)
                except RetractionError:
                    alpha *= 0.5
                    continue
                r_new = residual(y_new)
                f_new = 0.5 * r_new @ r_new
                if f_new <= f + self.ARMIJO_C * alpha * slope:
                    break
                alpha *= 0.5
            else:
                break
            y, r, f = y_new, r_new, f_new
        converged = np.linalg.norm(r) <= self.ROUND_TRIP_TOLERANCE * scale
        if not converged:
            logger.debug("phi descent stopped after %d iterations, residual %.3e", iteration, np.linalg.norm(r))
        return y, converged

    # ------------------------------------------------------------------
    # Retraction and projection
    # ------------------------------------------------------------------

    def retract(self, theta: ManifoldPoint, v: VectorLike) -> ManifoldPoint:
        theta = self.check_point(theta)
        coords = self._vector_coords(theta, v)
        if not np.any(coords):
            return theta.copy()
        return self._retract(theta, coords)

    def project_to_manifold(self, x: np.ndarray) -> ManifoldPoint:
        """Nearest point of the manifold to the ambient vector ``x``."""
        x = self._check_shape(x, 'ambient vector')
        if not np.all(np.isfinite(x)):
            raise FocalPointError("cannot project a non-finite vector")
        return self._project(x)

    # ------------------------------------------------------------------
    # Subclass hooks
    # ------------------------------------------------------------------

    def _residual(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def _project_tangent(self, theta: np.ndarray, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _retract(self, theta: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _random_point(self, rng: np.random.Generator) -> np.ndarray:
        return self._project(rng.standard_normal(self.ambient_dim))


class AmbientGeometry(ManifoldGeometry, kind='ambient'):
    """Flat R^D: the tangent space is R^D and every map is the identity shift."""

    def tangent_basis(self, theta):
        theta = self.check_point(theta)
        return TangentBasis(base=theta, frame=np.eye(self.ambient_dim))

    def _residual(self, theta):
        return 0.0 if np.all(np.isfinite(theta)) else np.inf

    def _project_tangent(self, theta, z):
        return z.copy()

    def _phi(self, theta, v):
        return theta + v, True

    def _retract(self, theta, v):
        return theta + v

    def _project(self, x):
        return x.copy()


class SphereGeometry(ManifoldGeometry, kind='sphere'):
    """Unit sphere S^{D-1} ⊂ R^D."""

    DEFAULT_TRUST_RADIUS = 0.9

    def _residual(self, theta):
        return abs(np.linalg.norm(theta) - 1.0)

    def _project_tangent(self, theta, z):
        return z - np.multiply.outer(z @ theta, theta)

    def _phi(self, theta, v):
        # y = θ + v + aθ with ||y|| = 1
        nv2 = v @ v
        if nv2 >= 1.0:
            return theta, False
        return v + np.sqrt(1.0 - nv2) * theta, True

    def _retract(self, theta, v):
        return self._project(theta + v)

    def _project(self, x):
        norm = np.linalg.norm(x)
        if norm <= 1e-12:
            raise FocalPointError("the origin has no nearest point on the sphere")
        return x / norm


class SymmetricGeometry(ManifoldGeometry, kind='symmetric'):
    """Symmetric p×p matrices, a linear subspace of R^{p²}."""

    def __init__(self, spec, **kwargs):
        super().__init__(spec, **kwargs)
        self.p = spec.params['p']

    def _residual(self, theta):
        M = to_matrices(theta, self.p, self.p)
        return np.linalg.norm(M - M.T)

    def _project_tangent(self, theta, z):
        return to_vectors(sym(to_matrices(z, self.p, self.p)))

    def _phi(self, theta, v):
        return theta + self._project_tangent(theta, v), True

    def _retract(self, theta, v):
        return theta + self._project_tangent(theta, v)

    def _project(self, x):
        return self._project_tangent(x, x)


class SpecialOrthogonalGeometry(ManifoldGeometry, kind='special-orthogonal'):
    """SO(p) with tangent space {XΩ : Ω skew} and a QR retraction."""

    def __init__(self, spec, **kwargs):
        super().__init__(spec, **kwargs)
        self.p = spec.params['p']

    def _residual(self, theta):
        X = to_matrices(theta, self.p, self.p)
        return max(np.linalg.norm(X @ X.T - np.eye(self.p)), abs(np.linalg.det(X) - 1.0))

    def _project_tangent(self, theta, z):
        X = to_matrices(theta, self.p, self.p)
        A = X.T @ to_matrices(z, self.p, self.p)
        return to_vectors(X @ (0.5 * (A - A.swapaxes(-1, -2))))

    def _retract(self, theta, v):
        X = to_matrices(theta + v, self.p, self.p)
        Q, R = np.linalg.qr(X)
        signs = np.sign(np.diag(R))
        if np.any(signs == 0):
            raise RetractionError("QR retraction hit a singular matrix")
        Q = Q * signs
        if np.linalg.det(Q) <= 0:
            raise RetractionError("QR retraction left the identity component")
        return to_vectors(Q)

    def _project(self, x):
        """Orthogonal Procrustes: U diag(1, ..., det(UVᵀ)) Vᵀ."""
        M = to_matrices(x, self.p, self.p)
        U, s, Vt = np.linalg.svd(M)
        if s[0] <= 1e-12:
            raise FocalPointError("zero matrix has no nearest rotation")
        det = np.sign(np.linalg.det(U @ Vt))
        if det < 0 and self.p > 1 and s[-2] - s[-1] <= 1e-10 * s[0]:
            raise FocalPointError("nearest rotation is not unique (tied smallest singular values)")
        if self.p > 1 and s[-2] <= 1e-12 * s[0]:
            raise FocalPointError("nearest rotation is not unique (rank deficiency)")
        D = np.ones(self.p)
        D[-1] = det
        return to_vectors((U * D) @ Vt)


class GrassmannGeometry(ManifoldGeometry, kind='grassmann'):
    """Rank-r orthogonal projectors P (P² = P = Pᵀ, tr P = r) in R^{p²}."""

    def __init__(self, spec, **kwargs):
        super().__init__(spec, **kwargs)
        self.p = spec.params['p']
        self.r = spec.params['r']

    def _residual(self, theta):
        P = to_matrices(theta, self.p, self.p)
        return max(
            np.linalg.norm(P @ P - P),
            np.linalg.norm(P - P.T),
            abs(np.trace(P) - self.r),
        )

    def _project_tangent(self, theta, z):
        # symmetric Δ with ΔP + PΔ = Δ: PS(I − P) + (I − P)SP
        P = to_matrices(theta, self.p, self.p)
        S = sym(to_matrices(z, self.p, self.p))
        Q = np.eye(self.p) - P
        return to_vectors(P @ S @ Q + Q @ S @ P)

    def _retract(self, theta, v):
        try:
            return self._project(theta + v)
        except FocalPointError as e:
            raise RetractionError(str(e)) from e

    def _project(self, x):
        S = sym(to_matrices(x, self.p, self.p))
        w, U = np.linalg.eigh(S)
        gap = w[-self.r] - w[-self.r - 1]
        if gap <= 1e-10 * max(1.0, np.abs(w).max()):
            raise FocalPointError("r-th and (r+1)-th eigenvalues are tied")
        top = U[:, -self.r:]
        return to_vectors(top @ top.T)


class FixedRankGeometry(ManifoldGeometry, kind='fixed-rank'):
    """p×k matrices of rank exactly r with the orthographic retraction."""

    RANK_GAP = 1e-8

    def __init__(self, spec, **kwargs):
        super().__init__(spec, **kwargs)
        self.p = spec.params['p']
        self.k = spec.params['k']
        self.r = spec.params['r']

    def _factors(self, theta):
        U, s, Vt = np.linalg.svd(to_matrices(theta, self.p, self.k), full_matrices=False)
        return U[:, :self.r], s, Vt[:self.r].T

    def _residual(self, theta):
        s = np.linalg.svd(to_matrices(theta, self.p, self.k), compute_uv=False)
        if not np.all(np.isfinite(s)) or s[self.r - 1] <= 1e-12 * max(s[0], 1e-300):
            return np.inf
        if self.r == len(s):
            return 0.0
        return s[self.r] / s[self.r - 1]

    def _project_tangent(self, theta, z):
        U, _, V = self._factors(theta)
        Z = to_matrices(z, self.p, self.k)
        UUt = U @ U.T
        VVt = V @ V.T
        return to_vectors(UUt @ Z + Z @ VVt - UUt @ Z @ VVt)

    def _retract(self, theta, v):
        """Orthographic retraction Z V (Uᵀ Z V)⁻¹ Uᵀ Z with Z = θ + v."""
        U, _, V = self._factors(theta)
        Z = to_matrices(theta + v, self.p, self.k)
        core = U.T @ Z @ V
        if np.linalg.cond(core) > 1e12:
            raise RetractionError("orthographic retraction core block is singular; reduce the step")
        return to_vectors(Z @ V @ np.linalg.solve(core, U.T @ Z))

    def _project(self, x):
        U, s, Vt = np.linalg.svd(to_matrices(x, self.p, self.k), full_matrices=False)
        r = self.r
        if s[r - 1] <= 1e-12 * max(s[0], 1e-300):
            raise FocalPointError(f"matrix has rank below {r}")
        if r < len(s) and s[r - 1] - s[r] <= 1e-10 * s[0]:
            raise FocalPointError("r-th and (r+1)-th singular values are tied")
        return to_vectors((U[:, :r] * s[:r]) @ Vt[:r])


class SolutionGeometry(ManifoldGeometry, kind='solution'):
    """Zero set of a registered constraint q with Newton-based phi."""

    def __init__(self, spec, **kwargs):
        super().__init__(spec, **kwargs)
        params = {k: v for k, v in spec.params.items() if k != 'constraint'}
        self.constraint = ConstraintRegistry.get(spec.params['constraint'], **params)

    def _jacobian(self, theta):
        J = self.constraint.jacobian(theta)
        s = np.linalg.svd(J, compute_uv=False)
        rank = int(np.sum(s > self.PINV_RCOND * s[0])) if s.size and s[0] > 0 else 0
        if rank != self.constraint.expected_rank:
            raise RankDeficiencyError(
                f"constraint Jacobian has rank {rank}, expected {self.constraint.expected_rank}"
            )
        return J

    def _residual(self, theta):
        return np.linalg.norm(self.constraint.value(theta))

    def _project_tangent(self, theta, z):
        J = self._jacobian(theta)
        P = np.eye(self.ambient_dim) - np.linalg.pinv(J, rcond=self.PINV_RCOND) @ J
        return z @ P

    def _phi(self, theta, v):
        """Newton–Raphson on q(θ + v + Q_θᵀ a) = 0 for a ∈ R^k."""
        Q = self._jacobian(theta)
        base = theta + v
        a = np.zeros(Q.shape[0])
        y = base
        for _ in range(self.NEWTON_MAX_ITERATIONS):
            q = self.constraint.value(y)
            if np.linalg.norm(q) <= self.PHI_TOLERANCE:
                return y, True
            A = self.constraint.jacobian(y) @ Q.T
            a = a + np.linalg.lstsq(A, -q, rcond=None)[0]
            y = base + Q.T @ a
            if not np.all(np.isfinite(y)):
                return theta, False
        return y, bool(np.linalg.norm(self.constraint.value(y)) <= self.PHI_TOLERANCE)

    def _retract(self, theta, v):
        y, ok = self._phi(theta, v)
        if not ok:
            raise RetractionError("Newton projection onto the constraint set did not converge")
        return y

    def _project(self, x, start: Optional[np.ndarray] = None):
        """Gauss–Newton landing on q = 0, then Riemannian descent on ½||y − x||²."""
        y = x.copy() if start is None else np.asarray(start, dtype=float).copy()
        for _ in range(self.NEWTON_MAX_ITERATIONS):
            q = self.constraint.value(y)
            if np.linalg.norm(q) <= 1e-12:
                break
            J = self.constraint.jacobian(y)
            y = y - np.linalg.lstsq(J, q, rcond=None)[0]
            if not np.all(np.isfinite(y)):
                raise FocalPointError("Gauss-Newton projection diverged")
        else:
            raise FocalPointError("Gauss-Newton projection did not reach the constraint set")
        for _ in range(self.PHI_MAX_ITERATIONS):
            grad = self._project_tangent(y, y - x)
            g2 = grad @ grad
            if np.sqrt(g2) <= self.PHI_TOLERANCE:
                break
            f = 0.5 * (y - x) @ (y - x)
            alpha = 1.0
            while alpha >= self.MIN_STEP:
                try:
                    y_new = self._retract(y, -alpha * grad)
                    if 0.5 * (y_new - x) @ (y_new - x) <= f - self.ARMIJO_C * alpha * g2:
                        break
                except RetractionError:
                    pass
                alpha *= 0.5
            else:
                break
            y = y_new
        return y

    def project_to_manifold(self, x: np.ndarray, start: Optional[np.ndarray] = None) -> ManifoldPoint:
        x = self._check_shape(x, 'ambient vector')
        return self._project(x, start=start)


class ProductGeometry(ManifoldGeometry, kind='product'):
    """Cartesian product of component manifolds; every map acts blockwise."""

    def __init__(self, spec, **kwargs):
        super().__init__(spec, **kwargs)
        self.parts = [ManifoldGeometry.for_spec(c, **kwargs) for c in spec.components]
        offsets = np.cumsum([0] + [c.ambient_dim for c in spec.components])
        self.slices = [slice(a, b) for a, b in zip(offsets[:-1], offsets[1:])]

    def _blocks(self, x):
        return [x[..., s] for s in self.slices]

    def _residual(self, theta):
        return max(g._residual(b) for g, b in zip(self.parts, self._blocks(theta)))

    def _project_tangent(self, theta, z):
        return np.concatenate(
            [g._project_tangent(t, b) for g, t, b in zip(self.parts, self._blocks(theta), self._blocks(z))],
            axis=-1,
        )

    def _phi(self, theta, v):
        blocks = []
        for g, t, b in zip(self.parts, self._blocks(theta), self._blocks(v)):
            if not np.any(b):
                blocks.append(t.copy())
                continue
            y, ok = g._phi(t, b)
            if not ok:
                return theta, False
            blocks.append(y)
        return np.concatenate(blocks), True

    def _retract(self, theta, v):
        return np.concatenate(
            [g._retract(t, b) if np.any(b) else t.copy()
             for g, t, b in zip(self.parts, self._blocks(theta), self._blocks(v))]
        )

    def _project(self, x):
        return np.concatenate([g._project(b) for g, b in zip(self.parts, self._blocks(x))])

    def _random_point(self, rng):
        return np.concatenate([g._random_point(rng) for g in self.parts])
