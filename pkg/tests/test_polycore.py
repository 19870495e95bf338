from math import factorial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P

from cvforge.polycore import (
    IdealPolys,
    ParamVector,
    build_polys,
    eval_polys,
    identity_residual,
    momentum_polys,
    order_condition_residuals,
    supnorm_error,
    taylor_mismatch,
)

entries = st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=8).map(
    lambda v: v if len(v) % 2 == 0 else v + [0.0])


def _matrix_product(pv, s):
    """Heisenberg map of the second mode as an explicit product of 2x2 shears."""
    M = np.eye(2)
    for lam, mu in pv.pairs():
        shear_p = np.array([[1.0, mu * s], [0.0, 1.0]])  # x -> x + mu s p
        shear_x = np.array([[1.0, 0.0], [-lam * s, 1.0]])  # p -> p - lam s x
        M = M @ shear_p @ shear_x
    return M


def test_param_vector_validation():
    with pytest.raises(ValueError):
        ParamVector([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ParamVector([1.0, np.nan])
    with pytest.raises(ValueError):
        ParamVector([1.0, 1.0], repetitions=0)


def test_pairs_order_and_repetitions():
    pv = ParamVector([1.0, 2.0, 3.0, 4.0], repetitions=2)
    # stored (lam_2, mu_2, lam_1, mu_1): the last pair acts first
    np.testing.assert_allclose(pv.pairs(), [[1.5, 2.0], [0.5, 1.0], [1.5, 2.0], [0.5, 1.0]])
    assert pv.total_gates == 8
    assert ParamVector([0.5, 0.0]).active_gates == 1
    rev = ParamVector([3.0, 4.0, 1.0, 2.0], reverse=True)
    np.testing.assert_allclose(rev.pairs(), ParamVector([1.0, 2.0, 3.0, 4.0]).pairs())


def test_empty_vector_rejected():
    with pytest.raises(ValueError):
        build_polys(ParamVector([]))


@given(entries, st.floats(-3, 3))
def test_polys_match_matrix_product(e, s):
    pv = ParamVector(e)
    xx, xp, px, pp = eval_polys(build_polys(pv), s)
    M = _matrix_product(pv, s)
    # x_out = M[0,0] x + M[0,1] p, p_out = M[1,0] x + M[1,1] p
    np.testing.assert_allclose([xx, xp, px, pp], M.ravel(), atol=1e-9 * max(1.0, np.abs(M).max()))


@given(entries)
def test_symplectic_identity(e):
    assert identity_residual(build_polys(ParamVector(e))) < 1e-9 * max(1.0, np.max(np.abs(e)) ** (2 * len(e)))


@given(entries, st.integers(1, 4))
def test_repetitions_equal_tiled_sequence(e, r):
    a = build_polys(ParamVector(e, r))
    tiled = np.tile(np.asarray(e, float).reshape(-1, 2), (r, 1)).ravel() / r
    b = build_polys(ParamVector(tiled))
    for u, v in zip(a.as_tuple(), b.as_tuple()):
        np.testing.assert_allclose(u, v, atol=1e-12)


@given(entries, st.floats(-2, 2))
def test_bogoliubov_normalization(e, s):
    mu, nu = build_polys(ParamVector(e)).mu_nu(s)
    assert abs(abs(mu) ** 2 - abs(nu) ** 2 - 1) < 1e-8 * max(1.0, abs(mu) ** 2)


def test_ideal_polys():
    s = np.linspace(-3, 3, 7)
    xx, xp, px, pp = IdealPolys().evaluate(s)
    np.testing.assert_allclose(xx * pp - xp * px, 1.0)
    mu, nu = IdealPolys().mu_nu(s)
    np.testing.assert_allclose(np.abs(mu), 1.0)
    np.testing.assert_allclose(nu, 0.0)


def test_single_pair_closed_form():
    polys = build_polys([0.7, 0.3])
    np.testing.assert_allclose(polys.pxx, [1.0, 0.0, -0.21])
    np.testing.assert_allclose(polys.pxp, [0.0, 0.3])
    np.testing.assert_allclose(polys.ppx, [0.0, -0.7])
    np.testing.assert_allclose(polys.ppp, [1.0])


def test_momentum_polys_definition():
    polys = build_polys([0.3, 0.5, 0.2, 0.4])
    m = momentum_polys(polys)
    d = P.polyder
    ref = P.polysub(P.polymul(d(polys.pxx), polys.ppx), P.polymul(polys.pxx, d(polys.ppx)))
    np.testing.assert_allclose(P.polytrim(m.p1), P.polytrim(ref))


@pytest.mark.parametrize("order", [1, 2, 3])
def test_order_conditions_of_uniform_trotter(order):
    # (1, 1) meets only the first-order conditions
    res = order_condition_residuals([1.0, 1.0], order)
    assert np.all(np.abs(res[:2]) < 1e-15)
    if order > 1:
        assert np.any(np.abs(res[2:]) > 0.1)


def test_taylor_mismatch_agrees_with_residuals():
    e = [0.397, -0.794, -0.0325, 1.54, 0.636, 0.254]
    tm = taylor_mismatch(build_polys(e), 3)
    assert np.all(tm[0] == 0)
    r = order_condition_residuals(e, 3)
    # odd order 3: pxp and -ppx carry sign (-1)
    assert abs(-tm[3, 1] - r[4]) < 1e-12
    assert abs(tm[1, 1] - r[0]) < 1e-12


def test_quoted_third_order_set_meets_conditions():
    r = order_condition_residuals([0.397, -0.794, -0.0325, 1.54, 0.636, 0.254], 3)
    assert np.max(np.abs(r)) < 1e-3


def test_supnorm_error_inputs():
    with pytest.raises(ValueError):
        supnorm_error(build_polys([1.0, 1.0]), 0.0)
    assert supnorm_error(IdealPolys(), 3.0) < 1e-15


def test_symplectic_residual_1000_random_vectors():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 9))
        e = rng.uniform(-1, 1, size=2 * m)
        worst = max(worst, identity_residual(build_polys(ParamVector(e))))
    assert worst < 1e-9


def test_trotter_first_order_slope():
    ms = np.array([4, 8, 16, 32, 64, 128])
    errs = [supnorm_error(build_polys(ParamVector(np.full(2 * m, 1.0 / m))), 1.0) for m in ms]
    slope = np.polyfit(np.log(ms), np.log(errs), 1)[0]
    assert -1.2 <= slope <= -0.8


def test_taylor_coefficients_of_high_order_product():
    # many tiny symmetric steps converge to the trigonometric series
    m = 400
    polys = build_polys(ParamVector(np.full(2 * m, 1.0 / m)))
    for n in range(4):
        target = (-1) ** (n // 2) / factorial(n) if n % 2 == 0 else 0.0
        assert abs(polys.pxx[n] - target) < 5 / m
