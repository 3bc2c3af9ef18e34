"""Synthetic scenarios: generative laws, population targets and interval functionals."""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional

import numpy as np
from scipy import stats
from scipy.interpolate import BSpline

from src.models.errors import ScenarioError
from src.models.experiment import ScenarioDataset
from src.models.loss import LossModel
from src.models.manifold import ManifoldSpec
from src.services.manifold_geometry import to_matrices, to_vectors

logger = logging.getLogger(__name__)

Functional = Callable[[np.ndarray], float]


def rotation(angle) -> np.ndarray:
    """Column-vectorized 2×2 rotation matrices, one row per angle."""
    c, s = np.cos(angle), np.sin(angle)
    return np.stack([c, s, -s, c], axis=-1)


def rotation_angle(theta: np.ndarray) -> float:
    return float(np.arctan2(theta[1], theta[0]))


def _coordinate(j: int) -> Functional:
    return lambda theta: float(theta[j])


def _bw_trace(theta):
    return float(theta[0] + theta[3])


def _bw_max_eigenvalue(theta):
    return float(np.linalg.eigvalsh(to_matrices(theta, 2, 2))[-1])


def _frobenius(theta):
    return float(np.linalg.norm(theta))


@dataclass
class Scenario:
    """One registered scenario: manifold, loss and the simulation law behind them."""
    name: str
    description: str
    manifold: ManifoldSpec
    loss: LossModel
    sample: Callable[[np.random.Generator, int], np.ndarray]
    gibbs_beta: float = 1.0
    closed_form_truth: Optional[Callable[[], np.ndarray]] = None
    functionals: Dict[str, Functional] = field(default_factory=dict)

    def to_dict(self):
        return {
            'name': self.name,
            'description': self.description,
            'manifold': self.manifold.to_dict(),
            'loss': self.loss.to_dict(),
            'gibbs_beta': self.gibbs_beta,
            'functionals': list(self.functionals),
            'closed_form_truth': self.closed_form_truth is not None,
        }


class ScenarioSimulator:
    """Registry of the simulation scenarios and their data generators."""

    SPHERE_MEAN = np.array([1.0, 2.0, 3.0])
    SPHERE_COV = np.array([
        [1.0, 0.45, 0.55],
        [0.45, 2.0, 0.85],
        [0.55, 0.85, 3.0],
    ])
    SO2_ANGLE_MEAN = np.pi / 4
    SO2_ANGLE_SD = 0.5
    BW_NOISE_SD = 0.3
    BW_EIGENVALUES = np.array([1.0, 2.0])
    PROJECTOR_COV = np.array([
        [1.0, 0.15, 0.1],
        [0.15, 1.2, 0.1],
        [0.1, 0.1, 0.3],
    ])
    QUANTILE_BETA = np.array([1.0, 2.0, 3.0])
    QUANTILE_LEVELS = (0.2, 0.5)
    PARKING_LEVELS = (0.4, 0.5, 0.6)
    PARKING_INTERCEPT = 0.3
    PARKING_INTERCEPT_SCALE = 0.05
    PARKING_BETA = np.array([0.4, 0.2])
    PARKING_SCALE = 0.3
    PARKING_DEGREE = 2
    PARKING_KNOTS = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])

    ORACLE_SAMPLE_SIZE = 500_000
    ORACLE_SEED = 20240607
    ORACLE_RESTARTS = 2

    def __init__(self):
        self._scenarios: Dict[str, Scenario] = {}
        for scenario in self._build():
            self._scenarios[scenario.name] = scenario

    @property
    def names(self):
        return list(self._scenarios)

    def get(self, name: str) -> Scenario:
        if name not in self._scenarios:
            raise ScenarioError(f"unknown scenario '{name}'; choose from {', '.join(self._scenarios)}")
        return self._scenarios[name]

    def generate(self, name: str, n: int, seed: int = 0, with_truth: bool = True) -> ScenarioDataset:
        """n observations from the scenario law; identical for identical (name, n, seed)."""
        scenario = self.get(name)
        if n < 1:
            raise ValueError("n must be positive")
        data = scenario.sample(np.random.default_rng(seed), n)
        truth = self.truth(name) if with_truth else np.full(scenario.manifold.ambient_dim, np.nan)
        return ScenarioDataset(name, n, seed, data, truth, scenario.manifold, scenario.loss)

    def truth(self, name: str) -> np.ndarray:
        self.get(name)
        return _cached_truth(name).copy()

    def functionals(self, name: str) -> Dict[str, Functional]:
        return dict(self.get(name).functionals)

    def gibbs_beta(self, name: str) -> float:
        return self.get(name).gibbs_beta

    def compute_truth(self, name: str) -> np.ndarray:
        """Closed-form population target, or the ERM over a large oracle sample."""
        from src.services.erm_oracle import ErmOracle
        from src.services.loss_functions import LossFunctions

        scenario = self.get(name)
        if scenario.closed_form_truth is not None:
            return scenario.closed_form_truth()
        logger.info("approximating %s truth by ERM on %d draws", name, self.ORACLE_SAMPLE_SIZE)
        data = scenario.sample(np.random.default_rng(self.ORACLE_SEED), self.ORACLE_SAMPLE_SIZE)
        oracle = ErmOracle(LossFunctions(scenario.loss))
        return oracle.minimize(data, restarts=self.ORACLE_RESTARTS, seed=self.ORACLE_SEED).theta

    # ------------------------------------------------------------------
    # Generative laws
    # ------------------------------------------------------------------

    def sphere_raw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.multivariate_normal(self.SPHERE_MEAN, self.SPHERE_COV, size=n)

    def _sample_sphere(self, rng, n):
        x = self.sphere_raw(rng, n)
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    def _sample_degenerate(self, rng, n):
        return np.tile(self.SPHERE_MEAN / np.linalg.norm(self.SPHERE_MEAN), (n, 1))

    def _sample_so2(self, rng, n):
        return rotation(rng.normal(self.SO2_ANGLE_MEAN, self.SO2_ANGLE_SD, size=n))

    def _sample_bw(self, rng, n):
        angles = rng.normal(0.0, self.BW_NOISE_SD, size=n)
        noise = rng.normal(0.0, self.BW_NOISE_SD, size=n)
        R = to_matrices(rotation(angles), 2, 2)
        eigenvalues = np.abs(self.BW_EIGENVALUES[None, :] + noise[:, None])
        X = R @ (eigenvalues[:, :, None] * R.swapaxes(-1, -2))
        return to_vectors(X)

    def _sample_projector(self, rng, n):
        gaussian = rng.multivariate_normal(np.zeros(3), self.PROJECTOR_COV, size=n)
        uniform = rng.uniform(-1.0, 1.0, size=(n, 3))
        pick = rng.random(n) < 0.5
        return np.where(pick[:, None], gaussian, uniform)

    def _sample_quantile(self, rng, n):
        X = rng.uniform(0.0, 1.0, size=(n, 3))
        eps = rng.standard_normal(n)
        y = (X @ self.QUANTILE_BETA) * (1.0 + eps)
        return np.column_stack([X, y])

    def parking_design(self, t: np.ndarray) -> np.ndarray:
        """Quadratic B-spline basis on [0, 1] without its first function."""
        basis = BSpline.design_matrix(np.asarray(t, dtype=float), self.PARKING_KNOTS, self.PARKING_DEGREE)
        return basis.toarray()[:, 1:]

    def _sample_parking(self, rng, n):
        t = rng.uniform(0.0, 1.0, size=n)
        B = self.parking_design(t)
        eps = rng.standard_normal(n)
        y = self.PARKING_INTERCEPT + self.PARKING_INTERCEPT_SCALE * eps + (B @ self.PARKING_BETA) * (1.0 + self.PARKING_SCALE * eps)
        return np.column_stack([B, y])

    # ------------------------------------------------------------------
    # Closed-form targets
    # ------------------------------------------------------------------

    def _projector_truth(self):
        cov = 0.5 * self.PROJECTOR_COV + np.eye(3) / 6.0
        _, U = np.linalg.eigh(cov)
        top = U[:, -2:]
        return to_vectors(top @ top.T)

    def _quantile_truth(self):
        q = stats.norm.ppf(self.QUANTILE_LEVELS)
        return np.outer(self.QUANTILE_BETA, 1.0 + q).T.reshape(-1)

    def _parking_truth(self):
        q = stats.norm.ppf(self.PARKING_LEVELS)
        intercepts = self.PARKING_INTERCEPT + self.PARKING_INTERCEPT_SCALE * q
        coef = np.outer(self.PARKING_BETA, 1.0 + self.PARKING_SCALE * q)
        return np.concatenate([intercepts, coef.T.reshape(-1)])

    # ------------------------------------------------------------------
    # Registry
    # ------------------------------------------------------------------

    def _build(self):
        sphere = ManifoldSpec.sphere(3)
        so2 = ManifoldSpec.special_orthogonal(2)
        symmetric = ManifoldSpec.symmetric(2)
        grassmann = ManifoldSpec.grassmann(3, 2)
        rank_one = ManifoldSpec.fixed_rank(3, 2, 1)
        flat = ManifoldSpec.ambient(6)
        parking = ManifoldSpec.product(ManifoldSpec.ambient(3), ManifoldSpec.fixed_rank(2, 3, 1))
        sphere_functionals = {f'theta{j + 1}': _coordinate(j) for j in range(3)}
        so2_truth = lambda: rotation(self.SO2_ANGLE_MEAN)

        return [
            Scenario(
                'sphere-extrinsic', 'extrinsic mean on S^2 of projected trivariate normals',
                sphere, LossModel('extrinsic-mean', sphere), self._sample_sphere,
                functionals=sphere_functionals,
            ),
            Scenario(
                'sphere-frechet', 'Fréchet mean on S^2 under the arc-length distance',
                sphere, LossModel('frechet-sphere', sphere), self._sample_sphere,
                functionals=sphere_functionals,
            ),
            Scenario(
                'so2-extrinsic', 'extrinsic mean of rotations with normal angles',
                so2, LossModel('extrinsic-mean', so2), self._sample_so2,
                closed_form_truth=so2_truth, functionals={'angle': rotation_angle},
            ),
            Scenario(
                'so2-frechet', 'Fréchet mean of rotations with normal angles',
                so2, LossModel('frechet-so2', so2), self._sample_so2,
                closed_form_truth=so2_truth, functionals={'angle': rotation_angle},
            ),
            Scenario(
                'bw-barycenter', 'Bures–Wasserstein barycenter of random 2×2 SPD matrices',
                symmetric, LossModel('bw-barycenter', symmetric), self._sample_bw, gibbs_beta=25.0,
                functionals={'trace': _bw_trace, 'max_eigenvalue': _bw_max_eigenvalue},
            ),
            Scenario(
                'spectral-projector', 'rank-2 principal projector of a normal/uniform mixture',
                grassmann, LossModel('spectral-projector', grassmann), self._sample_projector, gibbs_beta=0.95,
                closed_form_truth=self._projector_truth,
                functionals={'theta1': _coordinate(0), 'theta5': _coordinate(4), 'theta9': _coordinate(8)},
            ),
            Scenario(
                'quantile', 'rank-1 multiple linear quantile regression at levels 0.2 and 0.5',
                rank_one, LossModel('multi-quantile', rank_one, self.QUANTILE_LEVELS, 3), self._sample_quantile,
                gibbs_beta=0.5, closed_form_truth=self._quantile_truth, functionals={'frobenius': _frobenius},
            ),
            Scenario(
                'quantile-ambient', 'the quantile scenario without the rank constraint',
                flat, LossModel('multi-quantile', flat, self.QUANTILE_LEVELS, 3), self._sample_quantile,
                gibbs_beta=0.5, closed_form_truth=self._quantile_truth, functionals={'frobenius': _frobenius},
            ),
            Scenario(
                'sphere-degenerate', 'every observation equal to one point of S^2',
                sphere, LossModel('extrinsic-mean', sphere), self._sample_degenerate,
                closed_form_truth=lambda: self.SPHERE_MEAN / np.linalg.norm(self.SPHERE_MEAN),
                functionals=sphere_functionals,
            ),
            Scenario(
                'synthetic-parking', 'B-spline quantile curves with intercepts and a rank-1 slope matrix',
                parking,
                LossModel('multi-quantile', parking, self.PARKING_LEVELS, 2, intercept=True),
                self._sample_parking, gibbs_beta=0.5, closed_form_truth=self._parking_truth,
                functionals={'frobenius': lambda theta: float(np.linalg.norm(theta[3:]))},
            ),
        ]


@lru_cache(maxsize=None)
def _cached_truth(name: str) -> np.ndarray:
    return ScenarioSimulator().compute_truth(name)
