"""Manifold descriptors and tangent-space records."""
from dataclasses import dataclass, field
from typing import Dict, Tuple, Any

import numpy as np

from src.models.errors import ConfigError

# Points are ambient vectors of length D; matrices are stored column-vectorized.
ManifoldPoint = np.ndarray

MANIFOLD_KINDS = (
    'sphere',
    'special-orthogonal',
    'symmetric',
    'grassmann',
    'fixed-rank',
    'solution',
    'ambient',
    'product',
)


@dataclass(frozen=True)
class ManifoldSpec:
    """Embedded submanifold descriptor: kind, dimension parameters and tolerances."""
    kind: str
    params: Dict[str, Any]
    ambient_dim: int
    intrinsic_dim: int
    membership_tol: float = 1e-8
    components: Tuple['ManifoldSpec', ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in MANIFOLD_KINDS:
            raise ConfigError(f"unknown manifold kind '{self.kind}'")
        if not 0 <= self.intrinsic_dim <= self.ambient_dim:
            raise ConfigError(
                f"intrinsic dimension {self.intrinsic_dim} incompatible with ambient {self.ambient_dim}"
            )

    @classmethod
    def sphere(cls, D: int, membership_tol: float = 1e-8) -> 'ManifoldSpec':
        return cls('sphere', {'D': D}, D, D - 1, membership_tol)

    @classmethod
    def special_orthogonal(cls, p: int, membership_tol: float = 1e-8) -> 'ManifoldSpec':
        return cls('special-orthogonal', {'p': p}, p * p, p * (p - 1) // 2, membership_tol)

    @classmethod
    def symmetric(cls, p: int, membership_tol: float = 1e-8) -> 'ManifoldSpec':
        return cls('symmetric', {'p': p}, p * p, p * (p + 1) // 2, membership_tol)

    @classmethod
    def grassmann(cls, p: int, r: int, membership_tol: float = 1e-8) -> 'ManifoldSpec':
        if not 0 < r < p:
            raise ConfigError(f"grassmann rank must satisfy 0 < r < p, got r={r}, p={p}")
        return cls('grassmann', {'p': p, 'r': r}, p * p, r * (p - r), membership_tol)

    @classmethod
    def fixed_rank(cls, p: int, k: int, r: int, membership_tol: float = 1e-8) -> 'ManifoldSpec':
        if not 0 < r <= min(p, k):
            raise ConfigError(f"fixed-rank needs 0 < r <= min(p, k), got r={r}")
        return cls('fixed-rank', {'p': p, 'k': k, 'r': r}, p * k, (p + k) * r - r * r, membership_tol)

    @classmethod
    def ambient(cls, D: int) -> 'ManifoldSpec':
        return cls('ambient', {'D': D}, D, D, 0.0)

    @classmethod
    def solution(cls, constraint: str, membership_tol: float = 1e-8, **params) -> 'ManifoldSpec':
        """Solution manifold {θ : q(θ) = 0} for a registered constraint function."""
        from src.services.constraint_registry import ConstraintRegistry

        constraint_fn = ConstraintRegistry.get(constraint, **params)
        return cls(
            'solution',
            {'constraint': constraint, **params},
            constraint_fn.ambient_dim,
            constraint_fn.ambient_dim - constraint_fn.codimension,
            membership_tol,
        )

    @classmethod
    def product(cls, *components: 'ManifoldSpec') -> 'ManifoldSpec':
        if len(components) < 2:
            raise ConfigError("a product manifold needs at least two components")
        return cls(
            'product',
            {},
            sum(c.ambient_dim for c in components),
            sum(c.intrinsic_dim for c in components),
            max(c.membership_tol for c in components),
            tuple(components),
        )

    def to_dict(self) -> Dict[str, Any]:
        data = {'kind': self.kind, 'params': dict(self.params), 'membership_tol': self.membership_tol}
        if self.components:
            data['components'] = [c.to_dict() for c in self.components]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'ManifoldSpec':
        """Build a spec from the config form ``{"kind": ..., "params": {...}}``."""
        kind = data.get('kind')
        params = dict(data.get('params', {}))
        tol = data.get('membership_tol')
        extra = {} if tol is None else {'membership_tol': tol}
        try:
            if kind == 'sphere':
                return cls.sphere(int(params['D']), **extra)
            if kind == 'special-orthogonal':
                return cls.special_orthogonal(int(params['p']), **extra)
            if kind == 'symmetric':
                return cls.symmetric(int(params['p']), **extra)
            if kind == 'grassmann':
                return cls.grassmann(int(params['p']), int(params['r']), **extra)
            if kind == 'fixed-rank':
                return cls.fixed_rank(int(params['p']), int(params['k']), int(params['r']), **extra)
            if kind == 'ambient':
                return cls.ambient(int(params['D']))
            if kind == 'solution':
                constraint = params.pop('constraint')
                return cls.solution(constraint, **extra, **params)
            if kind == 'product':
                return cls.product(*(cls.from_dict(c) for c in data.get('components', [])))
        except KeyError as e:
            raise ConfigError(f"manifold '{kind}' is missing parameter {e}") from e
        raise ConfigError(f"unknown manifold kind '{kind}'")


@dataclass
class TangentVector:
    """A tangent vector in ambient coordinates, carrying its base point."""
    base: ManifoldPoint
    coords: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def to_dict(self):
        return {'base': self.base.tolist(), 'coords': self.coords.tolist()}


@dataclass
class TangentBasis:
    """Orthonormal D×d frame of the tangent space at ``base``."""
    base: ManifoldPoint
    frame: np.ndarray

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def coordinates(self, ambient: np.ndarray) -> np.ndarray:
        """Basis coordinates of ambient vectors (rows of a 2-d array or a single vector)."""
        return ambient @ self.frame

    def ambient(self, coordinates: np.ndarray) -> np.ndarray:
        return coordinates @ self.frame.T
