from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jv

from itoprop.chebyshev import (
    LocalTimeGrid,
    apply_operator_series,
    cheb_to_taylor,
    chebyshev_matrix,
    chebyshev_roots,
    exp_function,
    exp_series_bessel,
    fm_values,
    monomial_table,
    samples_to_cheb,
    scalar_func_series,
    taylor_eval,
    truncate,
)
from itoprop.errors import (
    BoundsViolationError,
    InsufficientSamplesError,
    OrderLimitError,
    SeriesConvergenceError,
)


# -- roots and local grid ----------------------------------------------------------
def test_roots_small_orders():
    np.testing.assert_array_equal(chebyshev_roots(1), [0.0])
    np.testing.assert_allclose(chebyshev_roots(2), [-np.sqrt(0.5), np.sqrt(0.5)], rtol=1e-15)


@pytest.mark.parametrize("n", [3, 8, 17, 64])
def test_roots_are_zeros_and_sorted(n):
    x = chebyshev_roots(n)
    assert np.all(np.diff(x) > 0)
    p = chebyshev_matrix(n + 1, x)[n]
    assert np.max(np.abs(p)) < 1e-14 * max(1, n / 8)


def test_roots_reject_zero_order():
    with pytest.raises(ValueError):
        chebyshev_roots(0)


def test_local_grid_inside_interval():
    g = LocalTimeGrid(5.0, 0.5, 9)
    assert np.all(g.tau > 5.0) and np.all(g.tau < 5.5)
    assert np.all(np.diff(g.tau) > 0)
    np.testing.assert_allclose(g.scaled(g.tau), g.roots, atol=1e-14)


# -- cosine transform ------------------------------------------------------------------
def test_constant_samples():
    c = samples_to_cheb(np.full(6, 2.5)).coeffs
    np.testing.assert_allclose(c, [2.5, 0, 0, 0, 0, 0], atol=1e-15)


def test_vector_samples_of_p1():
    x = chebyshev_roots(5)
    v = np.array([1.0, -2.0j, 0.5])
    c = samples_to_cheb(x[:, None] * v[None, :]).coeffs
    want = np.zeros((5, 3), complex)
    want[1] = v
    np.testing.assert_allclose(c, want, atol=1e-15)


def test_cube_identity():
    # x^3 = (3 P1 + P3) / 4
    x = chebyshev_roots(4)
    np.testing.assert_allclose(samples_to_cheb(x**3).coeffs, [0, 0.75, 0, 0.25], atol=1e-15)


def test_empty_samples():
    with pytest.raises(ValueError):
        samples_to_cheb(np.zeros(0))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**31 - 1))
def test_quadrature_exactness(n, seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, n)
    x = chebyshev_roots(n)
    samples = np.polynomial.chebyshev.chebval(x, c)
    assert np.max(np.abs(samples_to_cheb(samples).coeffs - c)) <= 1e-13


@pytest.mark.parametrize("n", [4, 16, 33])
def test_orthogonality(n):
    x = chebyshev_roots(n)
    p = chebyshev_matrix(n, x)
    for k in range(n):
        c = samples_to_cheb(p[k]).coeffs
        e = np.zeros(n)
        e[k] = 1.0
        assert np.max(np.abs(c - e)) <= 1e-13


# -- truncation ------------------------------------------------------------------------------
def test_truncate_first_subthreshold_index():
    c = np.array([1, 1e-3, 1e-8, 1e-15, 1e-16, 1e-17])
    assert truncate(c, 1e-12) == 3
    assert truncate(c, 1e-12, reference="first") == 3


def test_truncate_constant_and_zero():
    assert truncate(samples_to_cheb(np.full(5, 3.0)), 1e-12) == 1
    assert truncate(np.zeros(4), 1e-12) == 1


def test_truncate_reference_choice():
    # near-odd sample function: c0 tiny, c1 dominant
    c = np.array([1e-9, 1.0, 1e-6, 1e-13, 1e-17])
    assert truncate(c, 1e-12) == 3
    with pytest.raises(InsufficientSamplesError):
        truncate(c, 1e-12, reference="first")


def test_truncate_signals_more_samples():
    with pytest.raises(InsufficientSamplesError) as info:
        truncate(np.array([1.0, 0.5, 0.25, 0.125]), 1e-12)
    assert info.value.ratio == pytest.approx(0.125)


# -- monomial table ------------------------------------------------------------------------------
def test_table_low_rows():
    c = monomial_table(3)
    np.testing.assert_array_equal(c[0], [1, 0, 0])
    np.testing.assert_array_equal(c[1], [0, 1, 0])
    np.testing.assert_array_equal(c[2], [-1, 0, 4])


def test_table_diagonal_and_row_sums():
    m = 25
    c = monomial_table(m, exact=True)
    for j in range(1, m):
        assert c[j, j] == 2 ** (j - 1) * factorial(j)
    for j in range(m):
        assert sum(Fraction(int(c[j, k]), factorial(k)) for k in range(j + 1)) == 1


def test_table_reproduces_polynomials_exactly():
    rng = np.random.default_rng(5)
    c = monomial_table(41, exact=True)
    xs = [Fraction(v).limit_denominator(10**12) for v in rng.uniform(-1, 1, 20)]
    for j in range(41):
        for x in xs:
            poly = sum(Fraction(int(c[j, k]), factorial(k)) * x**k for k in range(j + 1))
            want = np.cos(j * np.arccos(float(x)))
            assert abs(float(poly) - want) <= 1e-9 * max(1.0, abs(want))


def test_table_float_matches_exact():
    exact = monomial_table(40, exact=True)
    approx = monomial_table(40)
    rel = np.abs(approx - exact.astype(float)) / np.maximum(1.0, np.abs(exact.astype(float)))
    assert rel.max() < 1e-15


def test_table_order_limit():
    with pytest.raises(OrderLimitError):
        monomial_table(61)


# -- Chebychev to Taylor ---------------------------------------------------------------------
def test_taylor_order_one():
    v = np.array([1.0 + 2j, 3.0])
    np.testing.assert_allclose(cheb_to_taylor(v[None, :], 1, 0.7), v[None, :])


def test_taylor_order_two():
    t = 0.6
    c = np.array([[1.0, 2.0], [0.5, -1.0]])
    tay = cheb_to_taylor(c, 2, t)
    np.testing.assert_allclose(tay[1], 2 / t * c[1], rtol=1e-15)
    np.testing.assert_allclose(tay[0], c[0] - c[1], rtol=1e-15)


@pytest.mark.parametrize("m", [1, 4, 8])
def test_taylor_round_trip_generic_coefficients(m):
    # compare Taylor terms by their contribution v_j dt^j / j! on the interval
    rng = np.random.default_rng(m)
    dt = 0.37
    v = rng.standard_normal((m, 3)) + 1j * rng.standard_normal((m, 3))
    tau = 0.5 * dt * (chebyshev_roots(m) + 1)
    cheb = samples_to_cheb(taylor_eval(v, tau))
    back = cheb_to_taylor(cheb, m, dt)
    w = np.array([dt**j / factorial(j) for j in range(m)])[:, None]
    assert np.max(np.abs((back - v) * w)) <= 1e-10 * np.max(np.abs(v * w))


@pytest.mark.parametrize("m", [10, 20, 30])
def test_taylor_round_trip_decaying_series(m):
    rng = np.random.default_rng(m)
    dt = 2.5
    c = rng.standard_normal((m, 4)) * (10.0 ** (-0.6 * np.arange(m)))[:, None]
    tay = cheb_to_taylor(c, m, dt)
    tau = 0.5 * dt * (chebyshev_roots(m) + 1)
    back = samples_to_cheb(taylor_eval(tay, tau)).coeffs
    assert np.max(np.abs(back - c)) <= 1e-10 * np.max(np.abs(c))


def test_taylor_rejects_large_order():
    with pytest.raises(OrderLimitError):
        cheb_to_taylor(np.ones((70, 2)), 61, 1.0)
    with pytest.raises(ValueError):
        cheb_to_taylor(np.ones((3, 2)), 4, 1.0)


# -- scalar functions ---------------------------------------------------------------------------
def test_constant_function_series():
    s = scalar_func_series(lambda x: np.full_like(x, 3.0), 2.0, 5.0, 1e-14)
    assert len(s) == 1 and s.coeffs[0] == pytest.approx(3.0)


@pytest.mark.parametrize("dtau", [0.01, 0.3, 2.0])
def test_exp_series_bessel_oracle(dtau):
    center, half = 40.0, 130.0
    s = scalar_func_series(exp_function(dtau), center, half, 1e-15, n_start=64)
    j = np.arange(len(s))
    want = (2 - (j == 0)) * (-1j) ** j * jv(j, half * dtau) * np.exp(-1j * center * dtau)
    np.testing.assert_allclose(s.coeffs, want, atol=1e-10)
    b = exp_series_bessel(dtau, center, half, 1e-16)
    n = min(len(b), len(s))
    np.testing.assert_allclose(b.coeffs[:n], want[:n], atol=1e-14)


def test_exp_series_long_step_stays_accurate():
    # argument range 650: rounding grows like |arg| * macheps
    s = exp_series_bessel(5.0, 40.0, 130.0, 1e-16)
    x = np.linspace(-90, 170, 101)
    np.testing.assert_allclose(s(x), np.exp(-5j * x), atol=1e-12)


def test_series_nonconvergence_reports_ratio():
    with pytest.raises(SeriesConvergenceError) as info:
        scalar_func_series(exp_function(50.0), 0.0, 100.0, 1e-14, n_max=64)
    assert info.value.ratio is not None


@pytest.mark.parametrize("m", [1, 3, 8])
def test_fm_zero_limit(m):
    t = 0.8
    s = scalar_func_series(lambda x: fm_values(x, t, m), 0.0, 0.5, 1e-16)
    assert s(0.0) == pytest.approx(t**m / factorial(m), rel=1e-11)


@pytest.mark.parametrize("m", [1, 2, 5, 12])
def test_fm_branches_agree_with_high_precision(m):
    from mpmath import mp, mpf, mpc, exp

    # the closed form cancels to ~|x s|^m / m! at small x, so use many digits
    mp.dps = 200
    s = 0.37
    x = np.array([-200.0, -20.0, -3.0, -0.2, 0.0, 1e-6, 0.7, 5.0, 40.0, 300.0])
    got = fm_values(x, s, m)
    for xi, gi in zip(x, got):
        if xi == 0.0:
            want = mpf(s) ** m / factorial(m)
        else:
            z = mpc(0, -xi) * s
            partial = sum(z**j / factorial(j) for j in range(m))
            want = (exp(z) - partial) / mpc(0, -xi) ** m
        assert abs(complex(want) - gi) <= 1e-14 * max(abs(complex(want)), s**m / factorial(m))


# -- operator series ---------------------------------------------------------------------------
def test_identity_series():
    psi = np.array([1.0, 2j, -0.5])
    out = apply_operator_series(np.array([1.0, 0, 0]), lambda v: v * [1, 2, 3], 2.0, 1.5, psi)
    np.testing.assert_allclose(out, psi)


def test_exp_on_diagonal_operator():
    ev = np.array([-1.3, 0.4])
    center, half = 0.0, 1.5
    dt = 0.9
    s = exp_series_bessel(dt, center, half, 1e-16)
    psi = np.array([0.6, 0.8j])
    out = apply_operator_series(s.coeffs, lambda v: ev * v, center, half, psi)
    np.testing.assert_allclose(out, np.exp(-1j * ev * dt) * psi, atol=1e-12)
    assert abs(np.linalg.norm(out) - 1.0) < 1e-11


def test_shared_recurrence_matches_individual():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((4, 4))
    h = a + a.T
    bound = np.abs(np.linalg.eigvalsh(h)).max() * 1.05
    psi = rng.standard_normal(4) + 0j
    series = [exp_series_bessel(d, 0.0, bound, 1e-16) for d in (0.1, 0.5, 1.0)]
    n = max(len(s) for s in series)
    cmat = np.zeros((3, n), complex)
    for i, s in enumerate(series):
        cmat[i, :len(s)] = s.coeffs
    many = apply_operator_series(cmat, lambda v: h @ v, 0.0, bound, psi)
    for i, s in enumerate(series):
        one = apply_operator_series(s.coeffs, lambda v: h @ v, 0.0, bound, psi)
        np.testing.assert_allclose(many[i], one, atol=1e-14)


def test_bounds_violation_detected():
    s = exp_series_bessel(20.0, 0.0, 1.0, 1e-16)
    with pytest.raises(BoundsViolationError):
        apply_operator_series(s.coeffs, lambda v: 5.0 * v, 0.0, 1.0, np.ones(2, complex))


def test_truncate_absolute_floor():
    c = np.array([1e-6, 1.0e-6, 1e-9, 1e-17, 3e-17, 2e-17])
    with pytest.raises(InsufficientSamplesError):
        truncate(c, 1e-12)
    assert truncate(c, 1e-12, floor=1e-16) == 3
    assert truncate(np.full(4, 1e-18), 1e-12, floor=1e-16) == 1
