"""Lasso as a projective splitting instance, with metrics and baselines.

The problem ``min 0.5 ||Q x - b||^2 + lam ||x||_1`` is split by a row
partition R_1..R_r into r least-squares operators ``Q_i^T (Q_i x - b_i)``
plus the l1 subdifferential, all with identity maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError
from .operators import ForwardAffine, IdentityMap, L1Norm, LeastSquaresOperator, OperatorBlock, ProxExact, ProxInexact
from .product_space import PrimalDualPoint
from .solver import IterationRecord, Problem, RunRecord, Status

__all__ = [
    "LassoProblem",
    "LassoMetrics",
    "contiguous_partition",
    "build_splitting",
    "objective",
    "subgrad_residual",
    "soft_threshold",
    "oracle_solution",
    "calibrate_lambda",
    "kkt_point",
    "fista",
]


def soft_threshold(a, t):
    return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)


@dataclass
class LassoProblem:
    Q: np.ndarray
    b: np.ndarray
    lam: float
    partition: Optional[list[np.ndarray]] = None

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.Q.ndim != 2 or self.b.shape != (self.Q.shape[0],):
            raise ParameterError(f"Q has shape {self.Q.shape} but b has shape {self.b.shape}")
        if self.lam < 0:
            raise ParameterError("lambda must be nonnegative")
        if self.partition is not None:
            _check_partition(self.partition, self.m)

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def d(self) -> int:
        return self.Q.shape[1]

    def gradient(self, x):
        return self.Q.T @ (self.Q @ x - self.b)

    def objective(self, x) -> float:
        r = self.Q @ x - self.b
        return float(0.5 * (r @ r) + self.lam * np.abs(x).sum())

    def subgrad_residual(self, x) -> float:
        return _min_norm_subgrad(self.gradient(x), x, self.lam)

    def with_lambda(self, lam: float) -> "LassoProblem":
        return LassoProblem(self.Q, self.b, lam, self.partition)


def _min_norm_subgrad(grad, x, lam) -> float:
    g = np.where(x != 0, grad + lam * np.sign(x), grad - np.clip(grad, -lam, lam))
    return float(np.linalg.norm(g))


def objective(problem: LassoProblem, x) -> float:
    return problem.objective(x)


def subgrad_residual(problem: LassoProblem, x) -> float:
    """Norm of the minimum-norm element of the lasso subdifferential at ``x``."""
    return problem.subgrad_residual(x)


class LassoMetrics:
    """Callable handed to the solvers; evaluates both residual metrics at ``x``."""

    def __init__(self, problem: LassoProblem):
        self.problem = problem

    def __call__(self, x):
        p = self.problem
        r = p.Q @ x - p.b
        grad = p.Q.T @ r
        return {
            "objective": float(0.5 * (r @ r) + p.lam * np.abs(x).sum()),
            "subgrad_residual": _min_norm_subgrad(grad, x, p.lam),
        }


def _check_partition(partition, m):
    seen = np.concatenate([np.asarray(R, dtype=int) for R in partition]) if partition else np.array([], int)
    if seen.size != m or not np.array_equal(np.sort(seen), np.arange(m)):
        raise ParameterError("row blocks must partition {0, ..., m-1}")


def contiguous_partition(m: int, r: int, rng: Optional[np.random.Generator] = None) -> list[np.ndarray]:
    """Split ``m`` rows into ``r`` blocks whose sizes differ by at most one.

    With ``rng`` the rows are shuffled first.
    """
    if r < 1 or r > m:
        raise ParameterError(f"need 1 <= r <= m, got r={r}, m={m}")
    rows = np.arange(m) if rng is None else rng.permutation(m)
    return [np.sort(R) if rng is not None else R for R in np.array_split(rows, r)]


def build_splitting(
    problem: LassoProblem,
    r: int,
    mode: str = "psfor",
    sigma: float = 0.9,
    cg_max_iter: int = 200,
    partition: Optional[Sequence[np.ndarray]] = None,
) -> tuple[Problem, dict]:
    """Blocks for the row-partitioned lasso.

    ``mode="psfor"`` makes the least-squares blocks affine forward blocks;
    ``mode="psback"`` makes them inexact (CG) resolvent blocks. The l1 block is
    last. Returns the problem and the solver settings the mode implies.
    """
    mode = mode.lower()
    if mode not in ("psfor", "psback"):
        raise ParameterError(f"unknown splitting mode {mode!r}")
    m, d = problem.Q.shape
    if partition is None:
        partition = problem.partition or contiguous_partition(m, r)
    partition = list(partition)
    if len(partition) != r:
        raise ParameterError(f"partition has {len(partition)} blocks, expected {r}")
    _check_partition(partition, m)
    blocks = []
    for R in partition:
        R = np.asarray(R)
        if R.size and np.all(np.diff(R) == 1):
            Qi, bi = problem.Q[R[0] : R[-1] + 1], problem.b[R[0] : R[-1] + 1]
        else:
            Qi, bi = problem.Q[R], problem.b[R]
        cap = ForwardAffine() if mode == "psfor" else ProxInexact(sigma=sigma, cg_max_iter=cg_max_iter)
        blocks.append(OperatorBlock(IdentityMap(d), LeastSquaresOperator(Qi, bi), cap, cost_weight=R.size / m))
    blocks.append(OperatorBlock(IdentityMap(d), L1Norm(problem.lam), ProxExact(), cost_weight=0.0))
    settings = {
        "last_block_rho": "forward_average" if mode == "psfor" else "fixed",
        "always_active": frozenset({r}),
    }
    return Problem(blocks), settings


def kkt_point(split: Problem, x_star) -> PrimalDualPoint:
    """The solution-set point ``(x*, (T_1 x*, ..., T_r x*))`` for a lasso minimizer."""
    return PrimalDualPoint(np.array(x_star, dtype=float), [blk.op(x_star) for blk in split.blocks[:-1]])


# --------------------------------------------------------------------------
# Reference solvers
# --------------------------------------------------------------------------


def oracle_solution(
    problem: LassoProblem,
    tol: float = 1e-12,
    max_iter: int = 200_000,
    x0=None,
    polish: bool = True,
) -> np.ndarray:
    """High-accuracy minimizer by proximal gradient.

    Runs accelerated proximal gradient with a fixed ``1/L`` step and adaptive
    restart until the subgradient residual drops below ``tol``. With
    ``polish``, the support found is then refined by solving the optimality
    equations on it exactly, and kept only if that lowers the residual.
    """
    Q, b, lam = problem.Q, problem.b, problem.lam
    L = float(np.linalg.norm(Q, 2) ** 2) or 1.0
    x = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=float)
    y = x.copy()
    t = 1.0
    for it in range(max_iter):
        g = Q.T @ (Q @ y - b)
        x_new = soft_threshold(y - g / L, lam / L)
        if (y - x_new) @ (x_new - x) > 0:
            # gradient-based restart
            t = 1.0
            y = x.copy()
            continue
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if it % 25 == 0 and problem.subgrad_residual(x) <= tol:
            break
    if polish:
        x = _polish_support(problem, x)
    return x


def _polish_support(problem: LassoProblem, x):
    S = np.flatnonzero(x)
    if S.size == 0 or S.size > problem.m:
        return x
    QS = problem.Q[:, S]
    s = np.sign(x[S])
    try:
        xs = np.linalg.solve(QS.T @ QS, QS.T @ problem.b - problem.lam * s)
    except np.linalg.LinAlgError:
        return x
    if np.any(np.sign(xs) != s):
        return x
    cand = np.zeros_like(x)
    cand[S] = xs
    return cand if problem.subgrad_residual(cand) < problem.subgrad_residual(x) else x


def calibrate_lambda(
    Q,
    b,
    target_fraction: float = 0.1,
    band: float = 0.1,
    iterations: int = 30,
    tol: float = 1e-9,
) -> float:
    """Largest ``lam`` whose solution keeps at least ``(1 - band)`` of the
    target nonzero count ``target_fraction * d``.

    Bisects on ``log(lam)`` below ``lam_max = ||Q^T b||_inf`` (where the
    solution becomes zero), warm-starting each oracle solve. Taking the
    largest such ``lam`` avoids the nearly interpolating regime when the
    target count is close to the number of rows.
    """
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float)
    d = Q.shape[1]
    need = math.ceil((1 - band) * target_fraction * d)
    lam_max = float(np.max(np.abs(Q.T @ b)))
    lo, hi = math.log(lam_max * 1e-6), math.log(lam_max)
    x = np.zeros(d)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        x = oracle_solution(LassoProblem(Q, b, math.exp(mid)), tol=tol, x0=x, polish=False, max_iter=20_000)
        if np.count_nonzero(x) >= need:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def fista(
    problem: LassoProblem,
    max_iterations: int = 1000,
    max_q_equivalents: Optional[float] = None,
    step0: float = 1.0,
    shrink: float = 0.5,
    x0=None,
    metrics=None,
    f_star: Optional[float] = None,
    target_subgrad_residual: Optional[float] = None,
    metrics_every: int = 1,
) -> RunRecord:
    """FISTA with backtracking on ``0.5 ||Q x - b||^2``.

    Cost accounting in full-matrix multiplies: one ``Q^T`` per gradient and
    one ``Q`` per trial point, so an iteration whose first trial is accepted
    costs 2 and each rejected trial adds 1. ``Q y`` for the extrapolated point
    is formed from stored products, and a zero start costs nothing.
    """
    Q, b, lam = problem.Q, problem.b, problem.lam
    if not 0 < shrink < 1 or not step0 > 0:
        raise ParameterError("need step0 > 0 and 0 < shrink < 1")
    x = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=float)
    q = 0.0
    if np.any(x):
        Qx = Q @ x
        q += 1
    else:
        Qx = np.zeros(problem.m)
    y, Qy = x.copy(), Qx.copy()
    t = 1.0
    step = step0
    records = []
    status = Status.BUDGET_EXHAUSTED
    for k in range(1, max_iterations + 1):
        ry = Qy - b
        fy = 0.5 * float(ry @ ry)
        g = Q.T @ ry
        q += 1
        rejected = 0
        while True:
            xn = soft_threshold(y - step * g, step * lam)
            Qxn = Q @ xn
            q += 1
            r = Qxn - b
            dx = xn - y
            dx_sq = float(dx @ dx)
            # the slack absorbs rounding once the iterates stall
            if dx_sq == 0 or 0.5 * float(r @ r) <= fy + float(g @ dx) + dx_sq / (2 * step) + 1e-15 * abs(fy):
                break
            step *= shrink
            rejected += 1
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        mom = (t - 1) / t_new
        y = xn + mom * (xn - x)
        Qy = Qxn + mom * (Qxn - Qx)
        x, Qx, t = xn, Qxn, t_new
        rec = IterationRecord(
            k=k, active=(0,), delays={}, phi=math.nan, pi=math.nan, alpha=math.nan, q_equivalents=q,
            backtracks={0: rejected} if rejected else {}, stepsizes={0: step},
        )
        if metrics is not None and (k % metrics_every == 0 or k == 1):
            mvals = metrics(x)
            rec.objective = mvals.get("objective")
            rec.subgrad_residual = mvals.get("subgrad_residual")
            if f_star is not None and rec.objective is not None and f_star != 0:
                rec.objective_residual = (rec.objective - f_star) / abs(f_star)
        records.append(rec)
        if (
            target_subgrad_residual is not None
            and rec.subgrad_residual is not None
            and rec.subgrad_residual <= target_subgrad_residual
        ):
            status = Status.CONVERGED
            break
        if max_q_equivalents is not None and q >= max_q_equivalents:
            break
    return RunRecord(records=records, status=status, x=x, seed=0, q_equivalents=q)
