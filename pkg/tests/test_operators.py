import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from projsplit.errors import CapabilityError, DimensionError, InexactnessError, ParameterError
from projsplit.operators import (
    AffineOperator,
    ForwardAffine,
    ForwardLipschitz,
    IdentityMap,
    L1Norm,
    LeastSquaresOperator,
    LipschitzOperator,
    MatrixMap,
    OperatorBlock,
    ProxExact,
    ProxInexact,
    RowSubmatrixMap,
    check_relative_error,
    forward_eval,
    prox_exact,
    prox_inexact_cg,
)

vec = lambda n: arrays(np.float64, n, elements=st.floats(-10, 10, allow_nan=False, allow_subnormal=False))


def test_adjoint_identity_on_random_pairs(rng):
    worst = 0.0
    for _ in range(100):
        m, d = rng.integers(1, 12, size=2)
        G = MatrixMap(rng.standard_normal((m, d)))
        x, y = rng.standard_normal(d), rng.standard_normal(m)
        lhs, rhs = G.apply(x) @ y, x @ G.adjoint(y)
        worst = max(worst, abs(lhs - rhs) / (1 + abs(lhs)))
    assert worst < 1e-12


def test_identity_map():
    I = IdentityMap(3)
    x = np.array([1.0, -2.0, 3.0])
    assert I.is_identity and not MatrixMap(np.eye(3)).is_identity
    np.testing.assert_array_equal(I.apply(x), x)
    np.testing.assert_array_equal(I.adjoint(x), x)


def test_row_submatrix_is_view_when_contiguous(rng):
    Q = rng.standard_normal((10, 4))
    contiguous = RowSubmatrixMap(Q, [3, 4, 5])
    scattered = RowSubmatrixMap(Q, [0, 5, 7])
    assert np.shares_memory(contiguous.A, Q)
    np.testing.assert_array_equal(scattered.A, Q[[0, 5, 7]])


def test_least_squares_example():
    # Qx - b = (2, 0), Q^T (2, 0) = (2, 4)
    T = LeastSquaresOperator([[1.0, 2.0], [0.0, 1.0]], [1.0, 1.0])
    np.testing.assert_allclose(T(np.array([1.0, 1.0])), [2.0, 4.0])


def test_least_squares_affine_parts(rng):
    Q, b = rng.standard_normal((6, 4)), rng.standard_normal(6)
    T = LeastSquaresOperator(Q, b)
    x = rng.standard_normal(4)
    np.testing.assert_allclose(T(x) - T(np.zeros(4)), T.linear(x), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(T(np.zeros(4)), T.constant, rtol=1e-12)
    assert T.lipschitz() == pytest.approx(np.linalg.eigvalsh(Q.T @ Q).max())


def test_least_squares_shape_mismatch():
    with pytest.raises(DimensionError):
        LeastSquaresOperator(np.ones((3, 2)), np.ones(2))


def test_soft_threshold_example():
    a = np.array([2.0, -0.5, -3.0])
    blk = OperatorBlock(IdentityMap(3), L1Norm(1.0), ProxExact())
    x, y = prox_exact(blk, a, 1.0)
    np.testing.assert_allclose(x, [1.0, 0.0, -2.0])
    np.testing.assert_allclose(y, [1.0, -0.5, -1.0])
    assert blk.op.contains(x, y)


def test_soft_threshold_matches_grid_minimizer():
    # oracle: brute-force minimization of rho*lam*|t| + (t - a)^2 / 2 per coordinate
    grid = np.linspace(-5, 5, 200001)
    op = L1Norm(0.7)
    for a in (-3.1, -0.4, 0.0, 0.69, 2.5):
        for rho in (0.5, 1.0, 2.0):
            t = grid[np.argmin(rho * op.lam * np.abs(grid) + 0.5 * (grid - a) ** 2)]
            assert op.prox(np.array([a]), rho)[0] == pytest.approx(t, abs=1e-4)


def test_affine_prox_solves_resolvent(rng):
    B = rng.standard_normal((4, 4))
    op = AffineOperator(B @ B.T + (B - B.T), rng.standard_normal(4))
    a = rng.standard_normal(4)
    x = op.prox(a, 0.3)
    np.testing.assert_allclose(x + 0.3 * op(x), a, atol=1e-12)


def test_l1_rejects_negative_lambda():
    with pytest.raises(ParameterError):
        L1Norm(-1.0)


def test_capability_validation():
    with pytest.raises(ParameterError):
        ProxInexact(sigma=1.0)
    with pytest.raises(CapabilityError):
        OperatorBlock(IdentityMap(2), LipschitzOperator(lambda x: x, 1.0), ProxExact())
    with pytest.raises(CapabilityError):
        OperatorBlock(IdentityMap(2), LipschitzOperator(lambda x: x, 1.0), ForwardAffine())
    with pytest.raises(CapabilityError):
        OperatorBlock(IdentityMap(2), L1Norm(1.0), ProxInexact())


def test_forward_eval_needs_forward_capability():
    blk = OperatorBlock(IdentityMap(2), L1Norm(1.0), ProxExact())
    with pytest.raises(CapabilityError):
        forward_eval(blk, np.zeros(2))
    fwd = OperatorBlock(IdentityMap(2), LipschitzOperator(lambda x: 2 * x, 2.0), ForwardLipschitz(2.0))
    np.testing.assert_array_equal(forward_eval(fwd, np.ones(2)), [2.0, 2.0])


def test_check_relative_error_examples():
    one, zero = np.array([1.0]), np.array([0.0])
    # <gz - x, e> = -0.95 < -0.9 ||gz - x||^2
    assert not check_relative_error(one, zero, zero, zero, np.array([-0.95]), 1.0, 0.9)
    assert check_relative_error(one, zero, zero, zero, np.array([-0.85]), 1.0, 0.9)
    # <e, y - w> = 0.5 > rho * sigma * ||y - w||^2 = 0.45
    assert not check_relative_error(one, one, one, zero, np.array([0.5]), 0.5, 0.9)
    assert check_relative_error(one, zero, one, zero, np.zeros(1), 1.0, 0.0)


def _cg_block(rng, m=8, d=5, sigma=0.9, cg_max_iter=200):
    Q, b = rng.standard_normal((m, d)), rng.standard_normal(m)
    return OperatorBlock(IdentityMap(d), LeastSquaresOperator(Q, b), ProxInexact(sigma, cg_max_iter))


@pytest.mark.parametrize("sigma", [0.1, 0.5, 0.9])
def test_cg_meets_error_criteria(rng, sigma):
    blk = _cg_block(rng, sigma=sigma)
    for _ in range(20):
        gz, w = rng.standard_normal(5), rng.standard_normal(5)
        rho = float(10 ** rng.uniform(-2, 1))
        a = gz + rho * w
        res = prox_inexact_cg(blk, a, rho, gz, w)
        assert check_relative_error(gz, res.x, res.y, w, res.e, rho, sigma)
        assert np.array_equal(res.e, res.x + rho * res.y - a)
        np.testing.assert_array_equal(res.y, blk.op(res.x))


def test_cg_with_tiny_sigma_hits_exact_resolvent(rng):
    blk = _cg_block(rng, sigma=1e-8, cg_max_iter=50)
    gz, w = rng.standard_normal(5), rng.standard_normal(5)
    res = prox_inexact_cg(blk, gz + w, 1.0, gz, w)
    np.testing.assert_allclose(res.x, blk.op.prox(gz + w, 1.0), atol=1e-6)


def test_cg_cost_counts_two_products_per_iteration(rng):
    blk = _cg_block(rng)
    gz, w = rng.standard_normal(5), rng.standard_normal(5)
    res = prox_inexact_cg(blk, gz + w, 1.0, gz, w)
    assert res.multiplies == 2 + 4 * res.inner_iterations


def test_cg_budget_failure_carries_best_iterate(rng):
    blk = _cg_block(rng, sigma=0.0, cg_max_iter=0)
    gz, w = rng.standard_normal(5), rng.standard_normal(5)
    with pytest.raises(InexactnessError) as info:
        prox_inexact_cg(blk, gz + w, 1.0, gz, w)
    assert info.value.best is not None and info.value.best.inner_iterations == 0


@settings(max_examples=60, deadline=None)
@given(vec(4), vec(4), st.integers(0, 2**32 - 1))
def test_least_squares_is_monotone(x, y, seed):
    r = np.random.default_rng(seed)
    T = LeastSquaresOperator(r.standard_normal((3, 4)), r.standard_normal(3))
    assert (T(x) - T(y)) @ (x - y) >= -1e-9 * (1 + np.abs(x - y).sum() ** 2)


@settings(max_examples=60, deadline=None)
@given(vec(5), vec(5), st.floats(0.01, 10), st.floats(0, 5))
def test_soft_threshold_firmly_nonexpansive(a, c, rho, lam):
    op = L1Norm(lam)
    pa, pc = op.prox(a, rho), op.prox(c, rho)
    assert (pa - pc) @ (pa - pc) <= (pa - pc) @ (a - c) + 1e-9
    # graph membership of the resolvent output
    assert op.contains(pa, (a - pa) / rho, tol=1e-9)
