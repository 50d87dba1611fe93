"""Linear maps, monotone operators and the blocks (G_i, T_i) built from them.

An :class:`OperatorBlock` pairs a linear map with an operator and a capability
tag saying how the solver may process it: by forward evaluation (with a known
Lipschitz constant or an affine structure) or through its resolvent (exactly,
or inexactly by conjugate gradients under a relative error criterion).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import CapabilityError, DimensionError, InexactnessError, ParameterError

__all__ = [
    "LinearMap",
    "IdentityMap",
    "MatrixMap",
    "RowSubmatrixMap",
    "LeastSquaresOperator",
    "AffineOperator",
    "LipschitzOperator",
    "L1Norm",
    "ProxOperator",
    "ForwardLipschitz",
    "ForwardAffine",
    "ProxExact",
    "ProxInexact",
    "OperatorBlock",
    "InexactProxResult",
    "forward_eval",
    "prox_exact",
    "prox_inexact_cg",
    "check_relative_error",
]


# --------------------------------------------------------------------------
# Linear maps G_i : H_0 -> H_i
# --------------------------------------------------------------------------


class LinearMap:
    """Bounded linear map with an adjoint.

    Subclasses set ``in_dim`` and ``out_dim`` and implement ``apply`` and
    ``adjoint``.
    """

    in_dim: int
    out_dim: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_identity(self) -> bool:
        return False


class IdentityMap(LinearMap):
    def __init__(self, dim: int):
        self.in_dim = self.out_dim = int(dim)

    def apply(self, x):
        return x

    def adjoint(self, y):
        return y

    @property
    def is_identity(self):
        return True

    def __repr__(self):
        return f"IdentityMap({self.in_dim})"


class MatrixMap(LinearMap):
    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            raise DimensionError(f"matrix map needs a 2-D array, got shape {A.shape}")
        self.A = A
        self.out_dim, self.in_dim = A.shape

    def apply(self, x):
        return self.A @ x

    def adjoint(self, y):
        return self.A.T @ y


class RowSubmatrixMap(MatrixMap):
    """The rows ``rows`` of a larger matrix, kept as a view when contiguous."""

    def __init__(self, Q, rows):
        Q = np.asarray(Q, dtype=float)
        if isinstance(rows, slice):
            sub = Q[rows]
        else:
            rows = np.asarray(rows, dtype=int)
            if rows.size and np.all(np.diff(rows) == 1):
                sub = Q[rows[0] : rows[-1] + 1]
            else:
                sub = Q[rows]
        super().__init__(sub)
        self.rows = rows


# --------------------------------------------------------------------------
# Monotone operators
# --------------------------------------------------------------------------


class LeastSquaresOperator:
    """``T(x) = Q^T (Q x - b)``, the gradient of ``0.5 * ||Q x - b||^2``.

    Each evaluation of ``T`` or of its linear part costs two matrix multiplies
    (one by ``Q``, one by ``Q^T``).
    """

    multiplies_per_eval = 2

    def __init__(self, Q, b):
        self.Q = np.asarray(Q, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.Q.ndim != 2 or self.b.shape != (self.Q.shape[0],):
            raise DimensionError(f"Q has shape {self.Q.shape} but b has shape {self.b.shape}")
        self.dim = self.Q.shape[1]
        self._Qtb = self.Q.T @ self.b

    def __call__(self, x):
        return self.Q.T @ (self.Q @ x - self.b)

    def linear(self, v):
        return self.Q.T @ (self.Q @ v)

    @property
    def constant(self):
        return -self._Qtb

    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.Q, 2) ** 2) if self.Q.size else 0.0

    def prox(self, a, rho):
        """Exact resolvent by a dense solve; meant for checks, not the hot path."""
        H = np.eye(self.dim) + rho * (self.Q.T @ self.Q)
        return np.linalg.solve(H, a + rho * self._Qtb)


class AffineOperator:
    """``T(x) = A x + c`` with ``A + A^T`` positive semidefinite."""

    multiplies_per_eval = 0

    def __init__(self, A, c=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        if self.A.shape[0] != self.A.shape[1]:
            raise DimensionError(f"affine operator needs a square matrix, got {self.A.shape}")
        self.dim = self.A.shape[0]
        self.c = np.zeros(self.dim) if c is None else np.asarray(c, dtype=float).reshape(self.dim)

    def __call__(self, x):
        return self.A @ x + self.c

    def linear(self, v):
        return self.A @ v

    @property
    def constant(self):
        return self.c

    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.A, 2))

    def prox(self, a, rho):
        return np.linalg.solve(np.eye(self.dim) + rho * self.A, a - rho * self.c)


class LipschitzOperator:
    """A single-valued operator given by a callable, with optional constant ``L``."""

    multiplies_per_eval = 0

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], L: Optional[float] = None):
        self.fn = fn
        self.L = L

    def __call__(self, x):
        return self.fn(x)

    def lipschitz(self):
        return self.L


class L1Norm:
    """Subdifferential of ``lam * ||x||_1``; its resolvent is soft thresholding."""

    multiplies_per_eval = 0

    def __init__(self, lam: float):
        if lam < 0:
            raise ParameterError(f"lambda must be nonnegative, got {lam}")
        self.lam = float(lam)

    def prox(self, a, rho):
        t = rho * self.lam
        return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)

    def contains(self, x, y, tol=1e-10) -> bool:
        """Whether ``y`` lies in ``lam * d||.||_1 (x)`` up to ``tol``."""
        x = np.asarray(x)
        y = np.asarray(y)
        nz = x != 0
        ok_nz = np.all(np.abs(y[nz] - self.lam * np.sign(x[nz])) <= tol * (1 + self.lam))
        ok_z = np.all(np.abs(y[~nz]) <= self.lam + tol * (1 + self.lam))
        return bool(ok_nz and ok_z)


class ProxOperator:
    """A maximal monotone operator known only through its resolvent."""

    multiplies_per_eval = 0

    def __init__(self, prox: Callable[[np.ndarray, float], np.ndarray]):
        self._prox = prox

    def prox(self, a, rho):
        return self._prox(a, rho)


# --------------------------------------------------------------------------
# Capabilities and blocks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ForwardLipschitz:
    L: Optional[float] = None


@dataclass(frozen=True)
class ForwardAffine:
    """The operator exposes ``linear(v)`` and ``constant``."""

    L: Optional[float] = None


@dataclass(frozen=True)
class ProxExact:
    pass


@dataclass(frozen=True)
class ProxInexact:
    sigma: float = 0.9
    cg_max_iter: int = 200

    def __post_init__(self):
        if not 0 <= self.sigma < 1:
            raise ParameterError(f"sigma must lie in [0, 1), got {self.sigma}")
        if self.cg_max_iter < 0:
            raise ParameterError("cg_max_iter must be nonnegative")


Capability = Union[ForwardLipschitz, ForwardAffine, ProxExact, ProxInexact]


@dataclass
class OperatorBlock:
    map: LinearMap
    op: object
    capability: Capability
    cost_weight: float = 0.0

    def __post_init__(self):
        if not isinstance(self.capability, (ForwardLipschitz, ForwardAffine, ProxExact, ProxInexact)):
            raise CapabilityError(f"unknown capability {self.capability!r}")
        if self.cost_weight < 0:
            raise ParameterError("cost_weight must be nonnegative")
        if isinstance(self.capability, ForwardAffine) and not hasattr(self.op, "linear"):
            raise CapabilityError("ForwardAffine blocks need an operator with a linear part")
        if isinstance(self.capability, (ProxExact,)) and not hasattr(self.op, "prox"):
            raise CapabilityError("ProxExact blocks need an operator with a prox method")
        if isinstance(self.capability, ProxInexact) and not (
            hasattr(self.op, "linear") and hasattr(self.op, "constant")
        ):
            raise CapabilityError("ProxInexact blocks need an affine operator with symmetric linear part")

    @property
    def is_forward(self) -> bool:
        return isinstance(self.capability, (ForwardLipschitz, ForwardAffine))

    @property
    def lipschitz(self) -> Optional[float]:
        return getattr(self.capability, "L", None)

    @property
    def multiplies_per_eval(self) -> int:
        return getattr(self.op, "multiplies_per_eval", 0)

    @property
    def dim(self) -> int:
        return self.map.out_dim


@dataclass
class InexactProxResult:
    x: np.ndarray
    y: np.ndarray
    e: np.ndarray
    inner_iterations: int
    multiplies: int = 0


def forward_eval(block: OperatorBlock, x: np.ndarray) -> np.ndarray:
    if not block.is_forward:
        raise CapabilityError(f"block with capability {block.capability!r} is not forward-evaluable")
    return block.op(x)


def prox_exact(block: OperatorBlock, a: np.ndarray, rho: float):
    """Return ``(x, y)`` with ``x = (I + rho T)^{-1} a`` and ``y = (a - x) / rho``."""
    if not rho > 0:
        raise ParameterError(f"prox stepsize must be positive, got {rho}")
    if not hasattr(block.op, "prox"):
        raise CapabilityError("operator has no resolvent")
    x = block.op.prox(a, rho)
    y = (a - x) / rho
    return x, y


def check_relative_error(gz, x, y, w, e, rho, sigma) -> bool:
    """Both relative error inequalities for an inexact resolvent step.

    ``<gz - x, e> >= -sigma ||gz - x||^2`` and
    ``<e, y - w> <= rho * sigma * ||y - w||^2``.
    """
    dx = gz - x
    dy = y - w
    first = float(dx @ e) >= -sigma * float(dx @ dx)
    second = float(e @ dy) <= rho * sigma * float(dy @ dy)
    return first and second


def prox_inexact_cg(
    block: OperatorBlock,
    a: np.ndarray,
    rho: float,
    gz: np.ndarray,
    w: np.ndarray,
    warm_start: Optional[np.ndarray] = None,
) -> InexactProxResult:
    """Approximate resolvent of an affine operator by conjugate gradients.

    Solves ``(I + rho A) x = a - rho c`` for ``T x = A x + c`` with ``A``
    symmetric positive semidefinite, stopping at the first iterate whose
    defect ``e = x + rho T x - a`` passes :func:`check_relative_error`. The
    returned ``y`` is recomputed as ``T x`` at every check, so it is always a
    true element of the operator's graph; the CG residual is then exactly
    ``-e`` and is taken from it rather than from the usual recursion.
    """
    cap = block.capability
    if not isinstance(cap, ProxInexact):
        raise CapabilityError("prox_inexact_cg needs a ProxInexact block")
    if not rho > 0:
        raise ParameterError(f"prox stepsize must be positive, got {rho}")
    op = block.op
    cost = op.multiplies_per_eval
    x = np.array(a if warm_start is None else warm_start, dtype=float)
    multiplies = 0
    p = None
    rr_old = None
    best = None
    for it in range(cap.cg_max_iter + 1):
        y = op(x)
        multiplies += cost
        e = x + rho * y - a
        if check_relative_error(gz, x, y, w, e, rho, cap.sigma):
            return InexactProxResult(x, y, e, it, multiplies)
        best = InexactProxResult(x, y, e, it, multiplies)
        if it == cap.cg_max_iter:
            break
        r = -e
        rr = float(r @ r)
        p = r.copy() if p is None else r + (rr / rr_old) * p
        Ap = p + rho * op.linear(p)
        multiplies += cost
        x = x + (rr / float(p @ Ap)) * p
        rr_old = rr
    raise InexactnessError(
        f"CG did not meet the relative error criteria within {cap.cg_max_iter} iterations",
        best=best,
    )
