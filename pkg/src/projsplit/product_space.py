"""The collective primal-dual space H_0 x H_1 x ... x H_{n-1}.

Points are stored as a primal vector ``z`` plus the list of dual vectors
``w_1, ..., w_{n-1}``. The last dual ``w_n`` is never stored; it is derived
from the others through :func:`derived_dual`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "PrimalDualPoint",
    "GammaMetric",
    "derived_dual",
    "gamma_norm_sq",
    "gamma_inner",
    "gamma_distance",
]


@dataclass
class PrimalDualPoint:
    z: np.ndarray
    w: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.w = [np.asarray(wi, dtype=float) for wi in self.w]

    @classmethod
    def zeros(cls, dim: int, dual_dims: Sequence[int]) -> "PrimalDualPoint":
        return cls(np.zeros(dim), [np.zeros(k) for k in dual_dims])

    @property
    def n_blocks(self) -> int:
        """Number of operators n, i.e. one more than the stored duals."""
        return len(self.w) + 1

    def copy(self) -> "PrimalDualPoint":
        return PrimalDualPoint(self.z.copy(), [wi.copy() for wi in self.w])

    def __sub__(self, other: "PrimalDualPoint") -> "PrimalDualPoint":
        _check_compatible(self, other)
        return PrimalDualPoint(self.z - other.z, [a - b for a, b in zip(self.w, other.w)])

    def __add__(self, other: "PrimalDualPoint") -> "PrimalDualPoint":
        _check_compatible(self, other)
        return PrimalDualPoint(self.z + other.z, [a + b for a, b in zip(self.w, other.w)])

    def scale(self, alpha: float) -> "PrimalDualPoint":
        return PrimalDualPoint(alpha * self.z, [alpha * wi for wi in self.w])


@dataclass(frozen=True)
class GammaMetric:
    """Primal weight of the product-space inner product."""

    gamma: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ParameterError(f"gamma must be positive and finite, got {self.gamma}")


def _check_compatible(p: PrimalDualPoint, q: PrimalDualPoint) -> None:
    if p.z.shape != q.z.shape or len(p.w) != len(q.w):
        raise DimensionError("points live in different product spaces")
    for i, (a, b) in enumerate(zip(p.w, q.w)):
        if a.shape != b.shape:
            raise DimensionError(f"dual block {i + 1} has shapes {a.shape} and {b.shape}")


def derived_dual(p: PrimalDualPoint, maps) -> np.ndarray:
    """Return ``w_n = -sum_i G_i^* w_i``; the zero vector when n = 1."""
    if len(maps) != len(p.w):
        raise DimensionError(f"expected {len(p.w)} linear maps, got {len(maps)}")
    out = np.zeros_like(p.z)
    for G, wi in zip(maps, p.w):
        gw = G.adjoint(wi)
        if gw.shape != out.shape:
            raise DimensionError(
                f"adjoint output has shape {gw.shape}, primal space has {out.shape}"
            )
        out -= gw
    return out


def gamma_norm_sq(p: PrimalDualPoint, metric: GammaMetric) -> float:
    return float(metric.gamma * (p.z @ p.z) + sum(wi @ wi for wi in p.w))


def gamma_inner(p: PrimalDualPoint, q: PrimalDualPoint, metric: GammaMetric) -> float:
    _check_compatible(p, q)
    return float(metric.gamma * (p.z @ q.z) + sum(a @ b for a, b in zip(p.w, q.w)))


def gamma_distance(p: PrimalDualPoint, q: PrimalDualPoint, metric: GammaMetric) -> float:
    return float(np.sqrt(gamma_norm_sq(p - q, metric)))
