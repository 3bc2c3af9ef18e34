"""Built-in constraint functions q: R^D -> R^k for solution manifolds."""
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from src.models.errors import ConfigError


def vec_index(i: int, j: int, p: int) -> int:
    """Position of matrix entry (i, j) in the column-vectorized p-row matrix."""
    return j * p + i


@dataclass(frozen=True)
class ConstraintFunction:
    """Constraint q with its Jacobian; ``expected_rank`` is the codimension D - d."""
    name: str
    ambient_dim: int
    codimension: int
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]

    @property
    def expected_rank(self) -> int:
        return self.codimension


class ConstraintRegistry:
    """Registry of named constraint families; no runtime code loading."""

    NAMES = ('unit-sphere', 'symmetric', 'grassmann')

    @classmethod
    def get(cls, name: str, **params) -> ConstraintFunction:
        builders: Dict[str, Callable[..., ConstraintFunction]] = {
            'unit-sphere': cls._unit_sphere,
            'symmetric': cls._symmetric,
            'grassmann': cls._grassmann,
        }
        if name not in builders:
            raise ConfigError(f"unknown constraint '{name}', expected one of {cls.NAMES}")
        try:
            return builders[name](**{k: int(v) for k, v in params.items()})
        except TypeError as e:
            raise ConfigError(f"bad parameters for constraint '{name}': {e}") from e

    @staticmethod
    def _unit_sphere(D: int) -> ConstraintFunction:
        return ConstraintFunction(
            name='unit-sphere',
            ambient_dim=D,
            codimension=1,
            value=lambda x: np.array([x @ x - 1.0]),
            jacobian=lambda x: 2.0 * x[None, :],
        )

    @staticmethod
    def _symmetric_rows(p: int) -> np.ndarray:
        rows = []
        for j in range(p):
            for i in range(j):
                row = np.zeros(p * p)
                row[vec_index(i, j, p)] = 1.0
                row[vec_index(j, i, p)] = -1.0
                rows.append(row)
        return np.array(rows).reshape(len(rows), p * p)

    @classmethod
    def _symmetric(cls, p: int) -> ConstraintFunction:
        A = cls._symmetric_rows(p)
        return ConstraintFunction(
            name='symmetric',
            ambient_dim=p * p,
            codimension=p * (p - 1) // 2,
            value=lambda x: A @ x,
            jacobian=lambda x: A,
        )

    @classmethod
    def _grassmann(cls, p: int, r: int) -> ConstraintFunction:
        """Symmetry, idempotence (upper triangle of P^2 - P) and trace(P) = r.

        The rows are redundant; only the rank D - d of the Jacobian is meaningful.
        """
        A = cls._symmetric_rows(p)
        upper = [(i, j) for j in range(p) for i in range(j + 1)]

        def value(x):
            M = x.reshape(p, p).T
            S = M @ M - M
            return np.concatenate([A @ x, [S[i, j] for i, j in upper], [np.trace(M) - r]])

        def jacobian(x):
            M = x.reshape(p, p).T
            rows = [A]
            idem = np.zeros((len(upper), p * p))
            for row, (i, j) in enumerate(upper):
                G = np.zeros((p, p))
                G[i, :] += M[:, j]
                G[:, j] += M[i, :]
                G[i, j] -= 1.0
                idem[row] = G.T.reshape(-1)
            rows.append(idem)
            rows.append(np.eye(p).T.reshape(1, -1))
            return np.vstack(rows)

        return ConstraintFunction(
            name='grassmann',
            ambient_dim=p * p,
            codimension=p * p - r * (p - r),
            value=value,
            jacobian=jacobian,
        )
