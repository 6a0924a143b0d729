import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lasso_phase_lab import theory
from lasso_phase_lab.ensemble import CovarianceKind, CovarianceSpec, build_covariance
from lasso_phase_lab.errors import (
    DegenerateGeometry,
    DegenerateSparsity,
    InsufficientDof,
    InvalidConstants,
    InvalidRho,
)


def test_thresholds_identity_exact():
    pair = theory.thresholds(1.0, 1.0, 1.0)
    assert pair.theta_l == 1.0 and pair.theta_u == 1.0


def test_thresholds_hand_values():
    pair = theory.thresholds(1.0, 1.0, 0.5)
    assert pair.theta_u == pytest.approx(4.0, rel=1e-15)
    assert pair.theta_l == pytest.approx(4.0 / 9.0, rel=1e-15)
    assert theory.thresholds(0.8, 1.25, 0.9).theta_u == pytest.approx(1.25 / (0.81 * 0.8), rel=1e-15)
    assert theory.thresholds(0.8, 1.25, 0.9).theta_u == pytest.approx(1.92901, abs=1e-5)


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (2.0, 1.5, 0.5), (0.5, 0.9, 0.5), (1.0, 1.0, 0.0), (1.0, 1.0, 1.2)])
def test_thresholds_invalid(args):
    with pytest.raises(InvalidConstants):
        theory.thresholds(*args)


constants = st.tuples(
    st.floats(0.01, 10.0), st.floats(1.0, 50.0), st.floats(0.01, 1.0)
).filter(lambda t: t[0] <= t[1])


@settings(max_examples=300)
@given(constants)
def test_thresholds_bracket_one(c):
    pair = theory.thresholds(*c)
    assert pair.theta_l <= 1.0 <= pair.theta_u


@settings(max_examples=200)
@given(constants, st.floats(1.01, 2.0))
def test_theta_u_monotone(c, k):
    c_min, c_max, eps = c
    base = theory.thresholds(c_min, c_max, eps).theta_u
    if eps * k <= 1:
        assert theory.thresholds(c_min, c_max, eps * k).theta_u < base
    if c_min * k <= c_max:
        assert theory.thresholds(c_min * k, c_max, eps).theta_u < base
    assert theory.thresholds(c_min, c_max * k, eps).theta_u > base


def test_sample_size_examples():
    assert theory.sample_size(1.0, 10, 128) == 107
    assert theory.sample_size(1e-9, 5, 100) == 7
    with pytest.raises(DegenerateGeometry):
        theory.sample_size(1.0, 9, 10)


@settings(max_examples=200)
@given(st.floats(0.01, 3.0), st.integers(1, 200), st.integers(2, 2000))
def test_sample_size_linear_in_theta(theta, s, extra):
    p = s + extra
    n1 = theory.sample_size(theta, s, p)
    n2 = theory.sample_size(2 * theta, s, p)
    term = 2 * theta * s * math.log(p - s)
    if n1 > s + 2:
        assert abs((n2 - n1) - term) <= 1
    assert n1 >= s + 2 and n1 >= 2 * theta * s * math.log(p - s) + s + 1


def test_lambda_schedule_example():
    lam = theory.lambda_schedule(107, 128, 10)
    assert lam == pytest.approx(math.sqrt(math.log(118) * math.log(10) / 107), rel=1e-15)
    assert lam == pytest.approx(0.32041, abs=1e-5)


def test_lambda_schedule_decreasing():
    vals = [theory.lambda_schedule(n, 128, 10) for n in range(12, 5000, 37)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_lambda_schedule_degenerate():
    with pytest.raises(DegenerateSparsity):
        theory.lambda_schedule(100, 50, 1)


@settings(max_examples=500)
@given(st.integers(1, 10**6), st.integers(2, 5000), st.integers(2, 10**5))
def test_lambda_identity(n, s, extra):
    p = s + extra
    lam = theory.lambda_schedule(n, p, s)
    assert n * lam**2 / math.log(p - s) == pytest.approx(math.log(s), rel=1e-12)


def test_mn_moments_example():
    mom = theory.mn_moments(0.3, 50, 5, 0.25, 5.0)
    assert mom.mean == pytest.approx(0.45 / 44 + 0.25 * 45 / 2500, rel=1e-14)
    assert mom.mean == pytest.approx(0.0147273, abs=1e-7)


def test_mn_moments_variance_closed_form():
    # identity Sigma: b'(X_S'X_S)^{-1}b = q / chi2_{n-s+1}, whose variance is
    # 2 q^2 / ((n-s-1)^2 (n-s-3)); the noise term contributes 2(n-s) sigma^4 / n^4
    lam, n, s, sig2, q = 0.3, 50, 5, 0.25, 5.0
    k = n - s
    expected = lam**4 * 2 * q**2 / ((k - 1) ** 2 * (k - 3)) + 2 * k * sig2**2 / n**4
    assert theory.mn_moments(lam, n, s, sig2, q).variance == pytest.approx(expected, rel=1e-12)


def test_mn_moments_degenerate_cases():
    mom = theory.mn_moments(0.0, 40, 4, 0.5, 4.0)
    assert mom.mean == pytest.approx(0.5 * 36 / 1600)
    assert mom.variance == pytest.approx(2 * 36 * 0.25 / 40**4)
    zero = theory.mn_moments(0.0, 40, 4, 0.0, 4.0)
    assert zero.mean == 0.0 and zero.variance == 0.0
    with pytest.raises(InsufficientDof):
        theory.mn_moments(0.3, 8, 5, 0.25, 5.0)


def test_u_stat_moments_identity():
    inv = np.eye(5)
    b = np.array([1.0, -1.0, 1.0, 1.0, -1.0])
    m = theory.u_stat_moments(0.3, 50, 5, 0.25, inv, b, 0, d_max=1.0, c_max=1.0)
    assert m.mean_Y == pytest.approx(-0.340909, abs=1e-6)
    assert m.mean_Yprime == pytest.approx(0.0056818, abs=1e-7)
    assert m.bound_Y == pytest.approx(0.681818, abs=1e-6)
    assert abs(m.mean_Y) <= m.bound_Y
    lo, hi = m.bounds_Yprime
    assert lo <= m.mean_Yprime <= hi
    m1 = theory.u_stat_moments(0.3, 50, 5, 0.25, inv, b, 1)
    assert m1.mean_Y == pytest.approx(0.3 * 50 / 44)


def test_u_stat_moments_toeplitz_bounds():
    cov = build_covariance(CovarianceSpec(CovarianceKind.TOEPLITZ, 6, rho=0.4))
    inv = np.linalg.inv(cov.matrix[:4, :4])
    b = np.array([1.0, 1.0, -1.0, 1.0])
    c_max = np.linalg.eigvalsh(cov.matrix)[-1]
    for i in range(4):
        m = theory.u_stat_moments(0.2, 30, 4, 1.0, inv, b, i, c_max=c_max)
        assert abs(m.mean_Y) <= m.bound_Y
    with pytest.raises(InsufficientDof):
        theory.u_stat_moments(0.2, 5, 4, 1.0, inv, b, 0)


def test_gaussian_max_bound_values():
    assert theory.gaussian_max_bound(math.e, 1.0) == pytest.approx(3.0)
    assert theory.gaussian_max_bound(100, 0.5) == pytest.approx(1.5 * math.sqrt(math.log(100)), rel=1e-15)
    assert theory.gaussian_max_bound(100, 0.5) == pytest.approx(3.21895, abs=1e-5)


def test_gaussian_max_bound_monte_carlo():
    rng = np.random.default_rng(8)
    emp = np.abs(rng.standard_normal((10000, 100))).max(axis=1).mean()
    assert emp <= theory.gaussian_max_bound(100, 1.0)


def test_inverse_wishart_mean_formula():
    assert np.allclose(theory.inverse_wishart_mean(np.eye(3), 5), np.eye(3))
    assert np.allclose(theory.inverse_wishart_mean(np.eye(2), 12), np.eye(2) / 9)
    with pytest.raises(InsufficientDof):
        theory.inverse_wishart_mean(np.eye(3), 4)


def test_inverse_wishart_mean_monte_carlo():
    rng = np.random.default_rng(12)
    sigma = np.array([[1.0, 0.3], [0.3, 1.0]])
    L = np.linalg.cholesky(sigma)
    X = rng.standard_normal((20000, 30, 2)) @ L.T
    emp = np.linalg.inv(np.einsum("rki,rkj->rij", X, X)).mean(axis=0)
    expected = theory.inverse_wishart_mean(sigma, 30)
    assert np.all(np.abs(emp - expected) <= 0.05 * np.abs(expected))


def test_toeplitz_extremes():
    assert theory.toeplitz_eigen_extremes(0.0) == (1.0, 1.0)
    lo, hi = theory.toeplitz_eigen_extremes(0.1)
    assert lo == pytest.approx(0.81818, abs=1e-5) and hi == pytest.approx(1.22222, abs=1e-5)
    with pytest.raises(InvalidRho):
        theory.toeplitz_eigen_extremes(-1.0)


@pytest.mark.parametrize("rho,p", [(0.1, 64), (-0.5, 30), (0.8, 100)])
def test_toeplitz_finite_sections_inside(rho, p):
    lo, hi = theory.toeplitz_eigen_extremes(rho)
    w = np.linalg.eigvalsh(build_covariance(CovarianceSpec(CovarianceKind.TOEPLITZ, p, rho=rho)).matrix)
    assert lo < w[0] and w[-1] < hi
