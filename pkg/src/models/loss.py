"""Loss model descriptor."""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from src.models.errors import ConfigError
from src.models.manifold import ManifoldSpec

LOSS_KINDS = (
    'extrinsic-mean',
    'frechet-sphere',
    'frechet-so2',
    'bw-barycenter',
    'spectral-projector',
    'multi-quantile',
)


@dataclass(frozen=True)
class LossModel:
    """Loss ℓ(x, θ) on a manifold, with the parameters its kind needs.

    ``levels`` and ``covariate_dim`` only apply to multi-quantile; ``bandwidth``
    switches the check loss to its Gaussian-smoothed version.
    """
    kind: str
    manifold: ManifoldSpec
    levels: Tuple[float, ...] = field(default_factory=tuple)
    covariate_dim: Optional[int] = None
    intercept: bool = False
    bandwidth: Optional[float] = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind '{self.kind}'")
        m = self.manifold
        if self.kind == 'frechet-sphere':
            ok = m.kind == 'sphere' or (m.kind == 'solution' and m.params.get('constraint') == 'unit-sphere')
        elif self.kind == 'frechet-so2':
            ok = m.kind == 'special-orthogonal' and m.params['p'] == 2
        elif self.kind == 'bw-barycenter':
            ok = m.kind == 'symmetric'
        elif self.kind == 'spectral-projector':
            ok = m.kind == 'grassmann' or (m.kind == 'solution' and m.params.get('constraint') == 'grassmann')
        elif self.kind == 'multi-quantile':
            ok = self._check_quantile()
        else:
            ok = m.kind != 'product'
        if not ok:
            raise ConfigError(f"loss '{self.kind}' is not defined on a {m.kind} manifold")

    def _check_quantile(self) -> bool:
        levels = self.levels
        if not levels or any(not 0 < t < 1 for t in levels):
            raise ConfigError("quantile levels must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigError("quantile levels must be strictly increasing")
        if self.covariate_dim is None or self.covariate_dim < 1:
            raise ConfigError("multi-quantile needs a positive covariate_dim")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        K = len(levels)
        coef_dim = self.covariate_dim * K
        m = self.manifold
        if self.intercept:
            if m.kind != 'product' or len(m.components) != 2 or m.components[0].kind != 'ambient':
                return False
            intercept_part, coef_part = m.components
            return intercept_part.ambient_dim == K and self._coefficient_manifold_ok(coef_part, coef_dim)
        return self._coefficient_manifold_ok(m, coef_dim)

    def _coefficient_manifold_ok(self, m: ManifoldSpec, coef_dim: int) -> bool:
        if m.kind == 'fixed-rank':
            return m.params['p'] == self.covariate_dim and m.params['k'] == len(self.levels)
        return m.kind == 'ambient' and m.ambient_dim == coef_dim

    @property
    def smooth(self) -> bool:
        """True when ḡ is the Riemannian gradient of a differentiable loss."""
        return self.kind != 'multi-quantile' or self.bandwidth is not None

    @property
    def observation_dim(self) -> int:
        """Width of one observation row."""
        m = self.manifold
        if self.kind == 'multi-quantile':
            return self.covariate_dim + 1
        if self.kind == 'frechet-so2':
            return 4
        if self.kind == 'spectral-projector':
            return m.params['p']
        return m.ambient_dim

    def smoothed(self, bandwidth: float) -> 'LossModel':
        return LossModel(self.kind, self.manifold, self.levels, self.covariate_dim, self.intercept, bandwidth)

    def to_dict(self) -> Dict[str, Any]:
        params: Dict[str, Any] = {}
        if self.kind == 'multi-quantile':
            params = {'levels': list(self.levels), 'covariate_dim': self.covariate_dim, 'intercept': self.intercept}
            if self.bandwidth is not None:
                params['bandwidth'] = self.bandwidth
        return {'kind': self.kind, 'params': params}

    @classmethod
    def from_dict(cls, data: dict, manifold: ManifoldSpec) -> 'LossModel':
        params = data.get('params', {})
        return cls(
            kind=data.get('kind'),
            manifold=manifold,
            levels=tuple(float(t) for t in params.get('levels', ())),
            covariate_dim=params.get('covariate_dim'),
            intercept=bool(params.get('intercept', False)),
            bandwidth=params.get('bandwidth'),
        )
