"""The asynchronous block-iterative projective splitting driver.

Solves ``0 in sum_i G_i^* T_i(G_i z) + T_n(z)`` given as a :class:`Problem`
whose last block is the operator on the primal space (its map must be the
identity). Each iteration processes an activation set of blocks against
possibly delayed copies of the iterate, builds the separating affine
function from the resulting graph points and projects onto its halfspace.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DimensionError, ParameterError
from .hyperplane import PI_ZERO_TOL, apply_projection, compute_projection
from .operators import ForwardAffine, ForwardLipschitz, OperatorBlock, ProxExact, ProxInexact
from .product_space import PrimalDualPoint, derived_dual
from .scheduler import DelayModel, SchedulePolicy, select_blocks
from .steps import (
    MAX_BACKTRACKS,
    BlockGraphPoint,
    StepResult,
    StepsizeState,
    affine_autostep,
    backtracking_forward,
    backward_step,
    forward_step_plain,
)

__all__ = [
    "Mode",
    "Status",
    "Problem",
    "SolverConfig",
    "IterationRecord",
    "RunRecord",
    "MultiplyEvent",
    "count_q_equivalents",
    "greedy_scores",
    "solve",
]


class Mode(str, enum.Enum):
    BACKWARD = "backward"
    BACKWARD_INEXACT = "backward_inexact"
    FORWARD_PLAIN = "forward_plain"
    FORWARD_BACKTRACK = "forward_backtrack"
    FORWARD_AFFINE_AUTO = "forward_affine_auto"


class Status(str, enum.Enum):
    CONVERGED = "converged"
    FINITE_TERMINATION = "finite_termination"
    BUDGET_EXHAUSTED = "budget_exhausted"


_FORWARD_MODES = {Mode.FORWARD_PLAIN, Mode.FORWARD_BACKTRACK, Mode.FORWARD_AFFINE_AUTO}


def default_mode(block: OperatorBlock) -> Mode:
    cap = block.capability
    if isinstance(cap, ForwardAffine):
        return Mode.FORWARD_AFFINE_AUTO
    if isinstance(cap, ForwardLipschitz):
        return Mode.FORWARD_PLAIN if cap.L is not None else Mode.FORWARD_BACKTRACK
    if isinstance(cap, ProxInexact):
        return Mode.BACKWARD_INEXACT
    return Mode.BACKWARD


def _mode_allowed(block: OperatorBlock, mode: Mode) -> bool:
    cap = block.capability
    if mode == Mode.FORWARD_AFFINE_AUTO:
        return isinstance(cap, ForwardAffine)
    if mode == Mode.FORWARD_PLAIN:
        return block.is_forward and block.lipschitz is not None
    if mode == Mode.FORWARD_BACKTRACK:
        return block.is_forward
    if mode == Mode.BACKWARD_INEXACT:
        return isinstance(cap, ProxInexact)
    return isinstance(cap, ProxExact) or hasattr(block.op, "prox")


@dataclass
class Problem:
    """Blocks ``(G_1, T_1), ..., (G_n, T_n)``; ``G_n`` is the identity."""

    blocks: list[OperatorBlock]

    def __post_init__(self):
        if not self.blocks:
            raise DimensionError("a problem needs at least one block")
        last = self.blocks[-1].map
        if not last.is_identity:
            raise DimensionError("the last block must act on the primal space through the identity")
        d = last.in_dim
        for i, blk in enumerate(self.blocks):
            if blk.map.in_dim != d:
                raise DimensionError(f"block {i} map takes dimension {blk.map.in_dim}, primal is {d}")
            op_dim = getattr(blk.op, "dim", None)
            if op_dim is not None and op_dim != blk.map.out_dim:
                raise DimensionError(f"block {i} operator acts on {op_dim}, map outputs {blk.map.out_dim}")

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def dim(self) -> int:
        return self.blocks[-1].map.in_dim

    @property
    def maps(self) -> list:
        return [b.map for b in self.blocks[:-1]]

    @property
    def dual_dims(self) -> list[int]:
        return [b.map.out_dim for b in self.blocks[:-1]]

    def zero_point(self) -> PrimalDualPoint:
        return PrimalDualPoint.zeros(self.dim, self.dual_dims)


Stepsizes = Union[None, float, Sequence[float], Mapping[int, float]]


@dataclass
class SolverConfig:
    """Parameters of one run.

    ``rho`` gives per-block stepsizes (a scalar, a sequence or a mapping from
    block index); for backtracking blocks it is the initial trial. Blocks with
    no entry get 1, except plain forward blocks which get ``0.9 / L``.
    ``last_block_rho`` chooses how the final block's stepsize evolves:
    ``"fixed"`` or ``"forward_average"`` (mean of the latest stepsizes used by
    forward blocks).
    """

    gamma: float = 1.0
    beta: float = 1.0
    delta: float = 1.0
    modes: Optional[Mapping[int, Mode]] = None
    rho: Stepsizes = None
    rho_min: float = 1e-12
    rho_max: float = 1e12
    last_block_rho: str = "fixed"
    policy: SchedulePolicy = field(default_factory=SchedulePolicy)
    max_delay: int = 0
    seed: int = 0
    max_iterations: int = 1000
    max_q_equivalents: Optional[float] = None
    target_subgrad_residual: Optional[float] = None
    pi_zero_tol: float = PI_ZERO_TOL
    autostep_modified: bool = True
    max_backtracks: int = MAX_BACKTRACKS
    plain_forward_factor: float = 0.9
    initial_full_sweep: bool = True
    metrics_every: int = 1
    threads: Optional[int] = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError("gamma must be positive")
        if not 0 < self.beta < 2:
            raise ParameterError("beta must lie in (0, 2)")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if not 0 < self.rho_min <= self.rho_max < math.inf:
            raise ParameterError("need 0 < rho_min <= rho_max < inf")
        if self.last_block_rho not in ("fixed", "forward_average"):
            raise ParameterError(f"unknown last_block_rho rule {self.last_block_rho!r}")
        if self.max_delay < 0:
            raise ParameterError("max_delay must be nonnegative")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be at least 1")
        if self.max_q_equivalents is not None and not self.max_q_equivalents > 0:
            raise ParameterError("max_q_equivalents must be positive")


@dataclass(frozen=True)
class MultiplyEvent:
    block: int
    multiplies: int
    weight: float


def count_q_equivalents(event: MultiplyEvent) -> float:
    """Cost of an event in units of one full data-matrix multiply."""
    return event.multiplies * event.weight


@dataclass
class IterationRecord:
    k: int
    active: tuple
    delays: dict
    phi: float
    pi: float
    alpha: float
    q_equivalents: float
    objective: Optional[float] = None
    objective_residual: Optional[float] = None
    subgrad_residual: Optional[float] = None
    backtracks: dict = field(default_factory=dict)
    cg_iterations: dict = field(default_factory=dict)
    stepsizes: dict = field(default_factory=dict)


@dataclass
class RunRecord:
    """Telemetry of a run.

    ``x`` is the primal output; for projective splitting it is the graph
    point of the last block, and ``point``/``graph`` hold the final iterate
    and all graph points.
    """

    records: list[IterationRecord]
    status: Status
    x: np.ndarray
    seed: int
    q_equivalents: float = 0.0
    point: Optional[PrimalDualPoint] = None
    graph: Optional[list[BlockGraphPoint]] = None

    @property
    def iterations(self) -> int:
        return len(self.records)

    def history(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) if getattr(r, name) is not None else np.nan for r in self.records])


def greedy_scores(problem: Problem, p: PrimalDualPoint, graph: Sequence[BlockGraphPoint]) -> list[float]:
    """``<G_i z - x_i, y_i - w_i>`` for every block at the current iterate."""
    wn = derived_dual(p, problem.maps)
    duals = list(p.w) + [wn]
    return [
        float((blk.map.apply(p.z) - pt.x) @ (pt.y - wi))
        for blk, pt, wi in zip(problem.blocks, graph, duals)
    ]


def _resolve_rho(config: SolverConfig, problem: Problem, modes: list[Mode]) -> list[float]:
    rho = config.rho
    out = []
    for i, blk in enumerate(problem.blocks):
        if rho is None:
            val = None
        elif isinstance(rho, Mapping):
            val = rho.get(i)
        elif np.isscalar(rho):
            val = float(rho)
        else:
            val = float(rho[i])
        if val is None:
            if modes[i] == Mode.FORWARD_PLAIN:
                val = config.plain_forward_factor / blk.lipschitz
            else:
                val = 1.0
        if not config.rho_min <= val <= config.rho_max:
            raise ParameterError(f"stepsize {val} for block {i} outside [{config.rho_min}, {config.rho_max}]")
        out.append(val)
    return out


def _resolve_modes(config: SolverConfig, problem: Problem) -> list[Mode]:
    modes = []
    for i, blk in enumerate(problem.blocks):
        mode = Mode(config.modes[i]) if config.modes and i in config.modes else default_mode(blk)
        if not _mode_allowed(blk, mode):
            raise ParameterError(f"mode {mode.value} incompatible with block {i} capability {blk.capability!r}")
        modes.append(mode)
    return modes


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("PROJSPLIT_THREADS", "1")))
    except ValueError:
        return 1


def solve(
    problem: Problem,
    config: Optional[SolverConfig] = None,
    metrics: Optional[Callable[[np.ndarray], dict]] = None,
    f_star: Optional[float] = None,
    initial: Optional[PrimalDualPoint] = None,
    on_step: Optional[Callable] = None,
    on_iterate: Optional[Callable] = None,
) -> RunRecord:
    """Run the projective splitting loop.

    ``metrics(x)`` may return ``objective`` and ``subgrad_residual`` for the
    primal output ``x``; with ``f_star`` the relative objective residual is
    recorded too. ``on_step(k, i, z_used, w_used, result)`` fires after every
    block step and ``on_iterate(k, p_next, pc)`` after every projection.
    """
    config = config or SolverConfig()
    n = problem.n
    maps = problem.maps
    modes = _resolve_modes(config, problem)
    rho0 = _resolve_rho(config, problem, modes)
    states = [StepsizeState(rho=r, delta=config.delta) for r in rho0]
    last = n - 1
    forward_blocks = [i for i in range(n) if modes[i] in _FORWARD_MODES]

    root = np.random.default_rng(config.seed)
    policy_rng, delay_rng = root.spawn(2)
    delays = DelayModel(n, config.max_delay, delay_rng)

    p = problem.zero_point() if initial is None else initial.copy()
    if p.z.shape != (problem.dim,) or [wi.shape[0] for wi in p.w] != problem.dual_dims:
        raise DimensionError("initial point does not match the problem dimensions")
    graph = [BlockGraphPoint.zeros(b.dim) for b in problem.blocks]
    delays.record(1, p)

    threads = config.threads or _default_threads()
    executor = ThreadPoolExecutor(threads) if threads > 1 else None
    covered: set[int] = set()
    records: list[IterationRecord] = []
    q_total = 0.0
    status = Status.BUDGET_EXHAUSTED

    def run_step(i, z_used, w_used, rho) -> StepResult:
        blk = problem.blocks[i]
        mode = modes[i]
        if mode == Mode.BACKWARD:
            return backward_step(blk, z_used, w_used, rho, exact=True)
        if mode == Mode.BACKWARD_INEXACT:
            warm = graph[i].x if graph[i].ever_updated else None
            return backward_step(blk, z_used, w_used, rho, warm_start=warm, exact=False)
        if mode == Mode.FORWARD_PLAIN:
            return forward_step_plain(blk, z_used, w_used, rho)
        if mode == Mode.FORWARD_BACKTRACK:
            return backtracking_forward(blk, z_used, w_used, rho, config.delta, config.max_backtracks)
        return affine_autostep(
            blk, z_used, w_used, config.delta, rho_prev=states[i].rho_hat_last, modified=config.autostep_modified
        )

    try:
        for k in range(1, config.max_iterations + 1):
            if k == 1 and config.initial_full_sweep:
                active = list(range(n))
            else:
                scores = greedy_scores(problem, p, graph) if config.policy.mode == "greedy" else None
                last_processed = [pt.last_processed for pt in graph]
                active = select_blocks(config.policy, k, last_processed, scores, policy_rng)

            # The last block may depend on stepsizes chosen by this iteration's forward steps.
            deferred = config.last_block_rho == "forward_average" and last in active
            first_wave = [i for i in active if not (deferred and i == last)]

            used = {}
            for i in active:
                snap, d = delays.delayed_point(i, k)
                w_used = snap.w[i] if i < last else derived_dual(snap, maps)
                used[i] = (snap.z, w_used, d)

            def job(i, rho):
                z_used, w_used, _ = used[i]
                return run_step(i, z_used, w_used, rho)

            results: dict[int, StepResult] = {}
            rhos = [states[i].rho for i in first_wave]
            if executor is not None and len(first_wave) > 1:
                for i, res in zip(first_wave, executor.map(job, first_wave, rhos)):
                    results[i] = res
            else:
                for i, rho in zip(first_wave, rhos):
                    results[i] = job(i, rho)
            for i in first_wave:
                states[i].rho_hat_last = results[i].rho
            if deferred:
                recent = [states[j].rho_hat_last for j in forward_blocks]
                recent = [r for r in recent if math.isfinite(r)]
                rho_last = float(np.mean(recent)) if recent else states[last].rho
                results[last] = job(last, rho_last)
                states[last].rho_hat_last = results[last].rho

            for i in active:
                res = results[i]
                graph[i] = BlockGraphPoint(res.x, res.y, ever_updated=True, last_processed=k)
                q_total += count_q_equivalents(
                    MultiplyEvent(i, res.multiplies, problem.blocks[i].cost_weight)
                )
                if on_step is not None:
                    on_step(k, i, used[i][0], used[i][1], res)
            covered.update(active)

            pc = compute_projection(graph, maps, p, config.gamma, config.beta, config.pi_zero_tol)
            terminated = pc.pi <= config.pi_zero_tol and len(covered) == n
            if terminated:
                p_next = PrimalDualPoint(graph[last].x.copy(), [graph[i].y.copy() for i in range(last)])
            else:
                p_next = apply_projection(p, pc, config.gamma)

            rec = IterationRecord(
                k=k,
                active=tuple(active),
                delays={i: used[i][2] for i in active},
                phi=pc.phi,
                pi=pc.pi,
                alpha=pc.alpha,
                q_equivalents=q_total,
                backtracks={i: results[i].backtracks for i in active if results[i].backtracks},
                cg_iterations={i: results[i].inner_iterations for i in active if modes[i] == Mode.BACKWARD_INEXACT},
                stepsizes={i: results[i].rho for i in active},
            )
            if metrics is not None and (k % config.metrics_every == 0 or k == 1 or terminated):
                m = metrics(graph[last].x)
                rec.objective = m.get("objective")
                rec.subgrad_residual = m.get("subgrad_residual")
                if f_star is not None and rec.objective is not None and f_star != 0:
                    rec.objective_residual = (rec.objective - f_star) / abs(f_star)
            records.append(rec)
            if on_iterate is not None:
                on_iterate(k, p_next, pc)
            p = p_next

            if terminated:
                status = Status.FINITE_TERMINATION
                break
            if (
                config.target_subgrad_residual is not None
                and rec.subgrad_residual is not None
                and rec.subgrad_residual <= config.target_subgrad_residual
            ):
                status = Status.CONVERGED
                break
            if config.max_q_equivalents is not None and q_total >= config.max_q_equivalents:
                status = Status.BUDGET_EXHAUSTED
                break
            delays.record(k + 1, p)
    finally:
        if executor is not None:
            executor.shutdown()

    return RunRecord(
        records=records,
        status=status,
        x=graph[last].x,
        seed=config.seed,
        q_equivalents=q_total,
        point=p,
        graph=graph,
    )
