import math

import numpy as np
import pytest
from conftest import random_lasso
from factories import random_problem

from projsplit.errors import DimensionError, ParameterError
from projsplit.lasso import LassoMetrics, build_splitting, oracle_solution
from projsplit.operators import IdentityMap, L1Norm, LeastSquaresOperator, MatrixMap, OperatorBlock, ProxExact
from projsplit.product_space import GammaMetric, PrimalDualPoint, gamma_distance
from projsplit.scheduler import SchedulePolicy
from projsplit.solver import Mode, Problem, SolverConfig, Status, solve
from projsplit.steps import separation_gap

EXACT_KINDS = ("affine", "lipschitz", "backtrack", "prox", "l1")


def abs_problem():
    return Problem([OperatorBlock(IdentityMap(1), L1Norm(1.0), ProxExact())])


def test_single_block_trace_ends_in_finite_termination():
    # prox of |.| with rho = 1 moves z by one: 2 -> 1 -> 0, then the graph point is (0, 0)
    seen = []
    run = solve(
        abs_problem(),
        SolverConfig(rho=1.0, max_iterations=10),
        initial=PrimalDualPoint(np.array([2.0]), []),
        on_iterate=lambda k, p, pc: seen.append(float(p.z[0])),
    )
    assert seen == [1.0, 0.0, 0.0]
    assert run.status == Status.FINITE_TERMINATION and run.iterations == 3
    assert run.records[-1].pi == 0.0


def test_kkt_start_terminates_at_first_iteration(rng):
    # pi_zero_tol is an absolute squared norm at rounding level, so keep instances small
    for _ in range(20):
        d, n = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        kinds = [EXACT_KINDS[j] for j in rng.integers(0, len(EXACT_KINDS), n - 1)]
        problem, p_star = random_problem(rng, d, n, kinds=kinds, last_kind=EXACT_KINDS[int(rng.integers(0, 4))])
        run = solve(problem, SolverConfig(max_iterations=5), initial=p_star)
        assert run.status == Status.FINITE_TERMINATION and run.iterations == 1
        np.testing.assert_allclose(run.point.z, p_star.z, atol=1e-12)


def test_problem_validation():
    fwd = OperatorBlock(IdentityMap(2), L1Norm(1.0), ProxExact())
    with pytest.raises(DimensionError):
        Problem([])
    with pytest.raises(DimensionError):
        Problem([OperatorBlock(MatrixMap(np.eye(2)), L1Norm(1.0), ProxExact())])
    with pytest.raises(DimensionError):
        Problem([OperatorBlock(IdentityMap(3), L1Norm(1.0), ProxExact()), fwd])


def test_config_validation():
    for bad in ({"gamma": 0}, {"beta": 2.0}, {"delta": 0}, {"last_block_rho": "mean"}, {"max_delay": -1}):
        with pytest.raises(ParameterError):
            SolverConfig(**bad)
    with pytest.raises(ParameterError):
        solve(abs_problem(), SolverConfig(modes={0: Mode.FORWARD_PLAIN}))
    with pytest.raises(ParameterError):
        solve(abs_problem(), SolverConfig(rho=1e20))
    with pytest.raises(DimensionError):
        solve(abs_problem(), initial=PrimalDualPoint(np.zeros(2), []))


def lasso_run(problem, mode="psfor", policy="greedy", r=5, **kw):
    split, settings = build_splitting(problem, r, mode)
    cfg = SolverConfig(
        last_block_rho=settings["last_block_rho"],
        policy=SchedulePolicy(policy, 1, settings["always_active"]),
        **kw,
    )
    return split, solve(split, cfg, LassoMetrics(problem))


def test_psfor_cost_accounting(rng):
    problem = random_lasso(rng, 40, 30)
    _, run = lasso_run(problem, r=10, max_iterations=3)
    # first sweep: ten affine steps of 4 multiplies at weight 1/10 each
    assert run.records[0].q_equivalents == pytest.approx(4.0)
    assert run.records[1].q_equivalents == pytest.approx(4.4)
    assert run.records[2].q_equivalents == pytest.approx(4.8)


def test_forward_average_sets_last_stepsize(rng):
    problem = random_lasso(rng, 30, 20)
    _, run = lasso_run(problem, max_iterations=5)
    first = run.records[0].stepsizes
    assert first[5] == pytest.approx(np.mean([first[i] for i in range(5)]))


def test_same_seed_same_run(rng):
    problem = random_lasso(rng, 30, 40)
    runs = [lasso_run(problem, policy="random", max_delay=3, seed=7, max_iterations=60)[1] for _ in range(2)]
    other = lasso_run(problem, policy="random", max_delay=3, seed=8, max_iterations=60)[1]
    assert np.array_equal(runs[0].history("phi"), runs[1].history("phi"))
    assert [r.active for r in runs[0].records] == [r.active for r in runs[1].records]
    assert [r.active for r in runs[0].records] != [r.active for r in other.records]


def test_threads_do_not_change_results(rng):
    problem = random_lasso(rng, 30, 40)
    one = lasso_run(problem, max_iterations=30, threads=1)[1]
    two = lasso_run(problem, max_iterations=30, threads=2)[1]
    assert np.array_equal(one.history("phi"), two.history("phi"))
    assert np.array_equal(one.x, two.x)


@pytest.mark.parametrize("mode", ["psfor", "psback"])
def test_small_lasso_converges(rng, mode):
    problem = random_lasso(rng, 20, 40)
    x_star = oracle_solution(problem)
    _, run = lasso_run(problem, mode=mode, rho=1.0, max_iterations=20000, target_subgrad_residual=1e-8)
    assert run.status == Status.CONVERGED
    assert problem.objective(run.x) <= problem.objective(x_star) * (1 + 1e-8)


def test_delays_are_bounded_in_runs(rng):
    problem = random_lasso(rng, 30, 40)
    _, run = lasso_run(problem, policy="random", max_delay=4, max_iterations=100)
    for rec in run.records:
        assert all(rec.k - 4 <= d <= rec.k for d in rec.delays.values())


def test_steps_separate_and_iterates_are_fejer(rng):
    for _ in range(10):
        d, n = int(rng.integers(2, 7)), int(rng.integers(2, 5))
        problem, p_star = random_problem(rng, d, n)
        metric = GammaMetric(0.5)
        gaps, dist = [], [gamma_distance(problem.zero_point(), p_star, metric)]

        def on_step(k, i, z_used, w_used, res):
            gz = problem.blocks[i].map.apply(z_used)
            gaps.append(separation_gap(gz, w_used, res.x, res.y))

        cfg = SolverConfig(
            gamma=0.5, policy=SchedulePolicy("random", 1), max_delay=2, max_iterations=150, seed=int(rng.integers(1000))
        )
        solve(problem, cfg, on_step=on_step, on_iterate=lambda k, p, pc: dist.append(gamma_distance(p, p_star, metric)))
        assert min(gaps) >= -1e-10
        assert all(b <= a * (1 + 1e-10) + 1e-10 for a, b in zip(dist, dist[1:]))


def test_budget_stop(rng):
    problem = random_lasso(rng, 30, 40)
    _, run = lasso_run(problem, max_iterations=10**6, max_q_equivalents=10.0)
    assert run.status == Status.BUDGET_EXHAUSTED
    assert 10.0 <= run.q_equivalents < 10.0 + 4.0 + 1e-9


def test_problem_with_matrix_maps_converges():
    # min 0.5 ||x - a||^2 + ||D x||_1 through a difference map
    rng = np.random.default_rng(5)
    d = 6
    a = rng.standard_normal(d) * 3
    D = np.diff(np.eye(d), axis=0)
    blocks = [
        OperatorBlock(MatrixMap(D), L1Norm(0.5), ProxExact()),
        OperatorBlock(IdentityMap(d), LeastSquaresOperator(np.eye(d), a), ProxExact()),
    ]
    run = solve(Problem(blocks), SolverConfig(max_iterations=20000))
    x = run.x
    f = lambda v: 0.5 * np.sum((v - a) ** 2) + 0.5 * np.abs(D @ v).sum()
    # local perturbation oracle: no coordinate direction improves f
    for j in range(d):
        for s in (1e-5, -1e-5):
            e = np.zeros(d)
            e[j] = s
            assert f(x + e) >= f(x) - 1e-9
    assert math.isfinite(run.records[-1].phi)
