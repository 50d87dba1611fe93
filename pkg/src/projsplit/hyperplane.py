"""Separating affine function and the relaxed projection onto its halfspace."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .product_space import PrimalDualPoint, derived_dual
from .steps import BlockGraphPoint

__all__ = [
    "ProjectionComputation",
    "compute_projection",
    "apply_projection",
    "separator_value",
    "gradient_point",
    "PI_ZERO_TOL",
]

PI_ZERO_TOL = 1e-28


@dataclass
class ProjectionComputation:
    u: list[np.ndarray]
    v: np.ndarray
    pi: float
    phi: float
    alpha: float
    beta: float


def compute_projection(
    blocks: Sequence[BlockGraphPoint],
    maps: Sequence,
    p: PrimalDualPoint,
    gamma: float,
    beta: float = 1.0,
    pi_zero_tol: float = PI_ZERO_TOL,
) -> ProjectionComputation:
    """Build the separator at ``p`` from the current graph points.

    ``blocks`` holds all n graph points, the last one belonging to the
    operator on H_0; ``maps`` holds the n - 1 maps G_1..G_{n-1}. The
    separator is evaluated in its grouped form

        phi(p) = <z, v> + sum_i <w_i, u_i> - sum_{i<=n} <x_i, y_i>

    with ``u_i = x_i - G_i x_n`` and ``v = sum_i G_i^* y_i + y_n``.
    """
    xn, yn = blocks[-1].x, blocks[-1].y
    u = []
    v = yn.copy()
    phi = -float(xn @ yn)
    for G, pt, wi in zip(maps, blocks[:-1], p.w):
        ui = pt.x - G.apply(xn)
        u.append(ui)
        v += G.adjoint(pt.y)
        phi += float(wi @ ui) - float(pt.x @ pt.y)
    phi += float(p.z @ v)
    pi = float(sum(ui @ ui for ui in u) + (v @ v) / gamma)
    if pi > pi_zero_tol:
        alpha = beta * max(0.0, phi) / pi
    else:
        alpha = 0.0
    return ProjectionComputation(u=u, v=v, pi=pi, phi=phi, alpha=alpha, beta=beta)


def apply_projection(p: PrimalDualPoint, pc: ProjectionComputation, gamma: float) -> PrimalDualPoint:
    """``z - alpha v / gamma`` and ``w_i - alpha u_i``; ``w_n`` stays derived."""
    if pc.alpha == 0.0:
        return p.copy()
    z = p.z - (pc.alpha / gamma) * pc.v
    w = [wi - pc.alpha * ui for wi, ui in zip(p.w, pc.u)]
    return PrimalDualPoint(z, w)


def separator_value(blocks: Sequence[BlockGraphPoint], maps: Sequence, p: PrimalDualPoint) -> float:
    """Evaluate the separator from its defining sum of per-block terms.

    Independent of :func:`compute_projection`; the two agree up to rounding.
    """
    wn = derived_dual(p, maps)
    total = 0.0
    for G, pt, wi in zip(maps, blocks[:-1], p.w):
        total += float((G.apply(p.z) - pt.x) @ (pt.y - wi))
    last = blocks[-1]
    total += float((p.z - last.x) @ (last.y - wn))
    return total


def gradient_point(pc: ProjectionComputation, gamma: float) -> PrimalDualPoint:
    """The gradient of the separator with respect to the gamma inner product."""
    return PrimalDualPoint(pc.v / gamma, list(pc.u))
