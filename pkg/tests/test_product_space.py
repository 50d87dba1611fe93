import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from projsplit.errors import DimensionError, ParameterError
from projsplit.operators import IdentityMap, MatrixMap
from projsplit.product_space import GammaMetric, PrimalDualPoint, derived_dual, gamma_inner, gamma_norm_sq

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False).filter(lambda v: v == 0 or abs(v) > 1e-100)


def test_derived_dual_single_block_is_zero():
    p = PrimalDualPoint(np.array([1.0]), [])
    np.testing.assert_array_equal(derived_dual(p, []), [0.0])


def test_derived_dual_identity_flips_sign():
    p = PrimalDualPoint(np.array([0.0]), [np.array([3.0])])
    np.testing.assert_array_equal(derived_dual(p, [IdentityMap(1)]), [-3.0])


def test_derived_dual_hand_sum():
    p = PrimalDualPoint(np.array([0.0]), [np.array([1.0]), np.array([2.0])])
    maps = [IdentityMap(1), MatrixMap([[2.0]])]
    np.testing.assert_allclose(derived_dual(p, maps), [-5.0])


def test_derived_dual_dimension_mismatch():
    p = PrimalDualPoint(np.zeros(2), [np.zeros(3)])
    with pytest.raises(DimensionError):
        derived_dual(p, [MatrixMap(np.ones((3, 3)))])
    with pytest.raises(DimensionError):
        derived_dual(p, [])


@pytest.mark.parametrize(
    "gamma, z, w, expected",
    [
        (1.0, [0.0], [], 0.0),
        (2.0, [1.0], [[1.0]], 3.0),
        (100.0, [0.3], [[0.4]], 9.16),
    ],
)
def test_gamma_norm_sq(gamma, z, w, expected):
    p = PrimalDualPoint(np.array(z), [np.array(wi) for wi in w])
    assert gamma_norm_sq(p, GammaMetric(gamma)) == pytest.approx(expected, rel=1e-12)


def test_gamma_inner_examples():
    zero = PrimalDualPoint(np.zeros(1), [np.zeros(1)])
    assert gamma_inner(zero, zero, GammaMetric(1.0)) == 0.0
    p = PrimalDualPoint(np.array([1.0]), [np.array([0.0])])
    q = PrimalDualPoint(np.array([0.0]), [np.array([5.0])])
    assert gamma_inner(p, q, GammaMetric(1.0)) == 0.0
    p = PrimalDualPoint(np.array([2.0]), [np.array([1.0])])
    q = PrimalDualPoint(np.array([1.0]), [np.array([4.0])])
    assert gamma_inner(p, q, GammaMetric(3.0)) == pytest.approx(10.0)


def test_gamma_metric_rejects_nonpositive():
    with pytest.raises(ParameterError):
        GammaMetric(0.0)


def test_gamma_inner_shape_mismatch():
    p = PrimalDualPoint(np.zeros(2), [np.zeros(1)])
    q = PrimalDualPoint(np.zeros(2), [np.zeros(2)])
    with pytest.raises(DimensionError):
        gamma_inner(p, q, GammaMetric())


def points(d=3, dims=(2, 4)):
    return st.builds(
        lambda z, ws: PrimalDualPoint(z, ws),
        arrays(float, d, elements=finite),
        st.tuples(*[arrays(float, k, elements=finite) for k in dims]).map(list),
    )


@settings(max_examples=200, deadline=None)
@given(points(), st.floats(1e-3, 1e3))
def test_norm_nonnegative_and_matches_inner(p, gamma):
    m = GammaMetric(gamma)
    nsq = gamma_norm_sq(p, m)
    assert nsq >= 0
    assert gamma_inner(p, p, m) == pytest.approx(nsq, rel=1e-12, abs=1e-300)
    allzero = not p.z.any() and not any(wi.any() for wi in p.w)
    assert (nsq == 0) == allzero


@settings(max_examples=200, deadline=None)
@given(points(), points(), st.floats(1e-3, 1e3))
def test_cauchy_schwarz(p, q, gamma):
    m = GammaMetric(gamma)
    lhs = gamma_inner(p, q, m) ** 2
    rhs = gamma_norm_sq(p, m) * gamma_norm_sq(q, m)
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


@settings(max_examples=100, deadline=None)
@given(points(), points(), finite, finite)
def test_derived_dual_is_linear(p, q, a, b):
    rng = np.random.default_rng(0)
    maps = [MatrixMap(rng.standard_normal((2, 3))), MatrixMap(rng.standard_normal((4, 3)))]
    combo = p.scale(a) + q.scale(b)
    lhs = derived_dual(combo, maps)
    rhs = a * derived_dual(p, maps) + b * derived_dual(q, maps)
    scale = 1 + np.abs(lhs).max() + abs(a) * np.abs(derived_dual(p, maps)).max() + abs(b) * np.abs(derived_dual(q, maps)).max()
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * scale)
