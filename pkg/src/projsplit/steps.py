"""Per-block update engines.

Each engine takes a block, the (possibly delayed) primal point ``z_used`` and
dual ``w_used`` it should respond to, plus stepsize inputs, and returns a
:class:`StepResult` whose ``(x, y)`` lies in the graph of the block operator
and separates ``(G z_used, w_used)`` from the solution set:

    <G z_used - x, y - w_used> >= c * ||G z_used - x||^2

with ``c = 1/rho`` for exact backward steps, ``1/rho - L`` for plain forward
steps, and ``delta`` for backtracking and affine steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BacktrackError, CapabilityError, ParameterError
from .operators import (
    ForwardAffine,
    OperatorBlock,
    ProxExact,
    ProxInexact,
    prox_exact,
    prox_inexact_cg,
)

__all__ = [
    "StepsizeState",
    "BlockGraphPoint",
    "StepResult",
    "backward_step",
    "forward_step_plain",
    "backtracking_forward",
    "affine_autostep",
    "backtrack_bound",
    "separation_gap",
    "MAX_BACKTRACKS",
]

MAX_BACKTRACKS = 60


@dataclass
class StepsizeState:
    """Stepsize bookkeeping owned by one block.

    ``rho`` is the stepsize for backward and plain forward steps and the
    initial trial for backtracking. ``rho_hat_last`` is the last stepsize
    actually used (``inf`` before the first step).
    """

    rho: float = 1.0
    rho_hat_last: float = math.inf
    delta: float = 1.0
    rho_bar_fallback: Optional[float] = None

    def __post_init__(self):
        if not self.rho > 0:
            raise ParameterError(f"stepsize must be positive, got {self.rho}")
        if not self.delta > 0:
            raise ParameterError(f"delta must be positive, got {self.delta}")


@dataclass
class BlockGraphPoint:
    x: np.ndarray
    y: np.ndarray
    ever_updated: bool = False
    last_processed: int = 0

    @classmethod
    def zeros(cls, dim: int) -> "BlockGraphPoint":
        return cls(np.zeros(dim), np.zeros(dim))


@dataclass
class StepResult:
    x: np.ndarray
    y: np.ndarray
    rho: float
    e: Optional[np.ndarray] = None
    backtracks: int = 0
    inner_iterations: int = 0
    multiplies: int = 0
    rho_tilde: Optional[float] = None
    extra: dict = field(default_factory=dict)


def separation_gap(gz, w_used, x, y) -> float:
    """``<G z - x, y - w>``, the block's contribution to the separator."""
    return float((gz - x) @ (y - w_used))


def _require_forward(block: OperatorBlock):
    if not block.is_forward:
        raise CapabilityError(f"block with capability {block.capability!r} cannot take forward steps")


def backward_step(
    block: OperatorBlock, z_used, w_used, rho: float, warm_start=None, exact: Optional[bool] = None
) -> StepResult:
    """Resolvent step at ``a = G z_used + rho w_used``.

    With ``exact=None`` the block capability decides between the exact
    resolvent and conjugate gradients; ``exact=True`` forces the operator's
    own ``prox`` even on an inexact-capable block.
    """
    if not rho > 0:
        raise ParameterError(f"stepsize must be positive, got {rho}")
    gz = block.map.apply(z_used)
    a = gz + rho * w_used
    cap = block.capability
    if exact or (exact is None and isinstance(cap, ProxExact)):
        x, y = prox_exact(block, a, rho)
        return StepResult(x, y, rho, e=np.zeros_like(a))
    if not exact and isinstance(cap, ProxInexact):
        res = prox_inexact_cg(block, a, rho, gz, w_used, warm_start)
        return StepResult(
            res.x, res.y, rho, e=res.e, inner_iterations=res.inner_iterations, multiplies=res.multiplies
        )
    raise CapabilityError(f"block with capability {cap!r} has no resolvent")


def forward_step_plain(block: OperatorBlock, z_used, w_used, rho: float, allow_large: bool = False) -> StepResult:
    """Two forward evaluations with a fixed stepsize; needs ``rho < 1/L``."""
    _require_forward(block)
    if not rho > 0:
        raise ParameterError(f"stepsize must be positive, got {rho}")
    L = block.lipschitz
    if L is not None and rho * L >= 1 and not allow_large:
        raise ParameterError(f"forward stepsize {rho} violates rho < 1/L = {1 / L if L else math.inf}")
    theta = block.map.apply(z_used)
    zeta = block.op(theta)
    x = theta - rho * (zeta - w_used)
    y = block.op(x)
    return StepResult(x, y, rho, multiplies=2 * block.multiplies_per_eval)


def backtrack_bound(delta: float, L: float, rho_initial: float) -> int:
    """Worst-case number of trials for halving backtracking."""
    return max(math.ceil(1 + math.log2((delta + L) * rho_initial)), 1)


def backtracking_forward(
    block: OperatorBlock,
    z_used,
    w_used,
    rho_initial: float,
    delta: float,
    max_backtracks: int = MAX_BACKTRACKS,
) -> StepResult:
    """Halve the trial stepsize until ``<theta - x, y - w> >= delta ||theta - x||^2``."""
    _require_forward(block)
    if not rho_initial > 0 or not delta > 0:
        raise ParameterError("rho_initial and delta must be positive")
    theta = block.map.apply(z_used)
    zeta = block.op(theta)
    xi = zeta - w_used
    rho = rho_initial
    for j in range(1, max_backtracks + 1):
        x = theta - rho * xi
        y = block.op(x)
        d = theta - x
        if delta * float(d @ d) - float(d @ (y - w_used)) <= 0:
            return StepResult(x, y, rho, backtracks=j, multiplies=(1 + j) * block.multiplies_per_eval)
        rho = rho / 2
    raise BacktrackError(f"backtracking did not terminate after {max_backtracks} halvings")


def affine_autostep(
    block: OperatorBlock,
    z_used,
    w_used,
    delta: float,
    rho_prev: float = math.inf,
    rho_bar_fallback: Optional[float] = None,
    modified: bool = True,
) -> StepResult:
    """Closed-form stepsize for an affine operator ``T x = T_l x + c``.

    The largest stepsize passing the backtracking test is
    ``rho_tilde = ||xi||^2 / (delta ||xi||^2 + <xi, T_l xi>)`` with
    ``xi = T G z - w``. With ``modified`` the step uses
    ``min(rho_tilde / 2, rho_prev)`` instead, which is nonincreasing over calls.
    Costs one application of ``G`` and two of ``T_l``.
    """
    _require_forward(block)
    if not isinstance(block.capability, ForwardAffine):
        raise CapabilityError("affine_autostep needs a ForwardAffine block")
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    cost = block.multiplies_per_eval
    theta = block.map.apply(z_used)
    zeta = block.op(theta)
    xi = zeta - w_used
    xi_sq = float(xi @ xi)
    if math.sqrt(xi_sq) <= 1e-14 * (1 + float(np.linalg.norm(zeta))):
        if rho_bar_fallback is None:
            rho_bar_fallback = rho_prev if math.isfinite(rho_prev) else 1 / delta
        return StepResult(theta.copy(), zeta, rho_bar_fallback, multiplies=cost)
    Tl_xi = block.op.linear(xi)
    rho_tilde = xi_sq / (delta * xi_sq + float(xi @ Tl_xi))
    rho = min(rho_tilde / 2, rho_prev) if modified else rho_tilde
    x = theta - rho * xi
    y = zeta - rho * Tl_xi
    return StepResult(x, y, rho, multiplies=2 * cost, rho_tilde=rho_tilde)
