"""Exception types raised by the geometry, loss, posterior and experiment layers."""


class ManifoldError(ValueError):
    """Base class for geometry failures."""


class MembershipError(ManifoldError):
    """A point is not on the manifold within its membership tolerance."""

    def __init__(self, kind: str, residual: float, tolerance: float):
        super().__init__(
            f"point is off the {kind} manifold: residual {residual:.3e} > tolerance {tolerance:.1e}"
        )
        self.kind = kind
        self.residual = residual
        self.tolerance = tolerance


class DimensionMismatchError(ManifoldError):
    """An array does not have the ambient dimension of the manifold."""


class RankDeficiencyError(ManifoldError):
    """The constraint Jacobian of a solution manifold lost rank."""


class FocalPointError(ManifoldError):
    """Nearest-point projection is not unique at the given ambient point."""


class RetractionError(ManifoldError):
    """The retraction is undefined for this step; retry with a smaller step."""


class LossDomainError(ValueError):
    """A loss was evaluated outside of its domain (non-PSD input, antipodal points)."""


class EtelError(ValueError):
    """The tilted-likelihood gradient cannot be formed at this point."""


class PreconditionerError(ValueError):
    """The preconditioner estimate is singular; fall back to the identity method."""


class ScenarioError(KeyError):
    """Unknown scenario name."""


class ConfigError(ValueError):
    """Malformed run configuration."""


class DiagnosticsError(ValueError):
    """Series or chains unusable for convergence diagnostics."""


class OptimizationError(ValueError):
    """No restart of the empirical risk minimizer reached its gradient tolerance."""
