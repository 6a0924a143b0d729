import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lasso_phase_lab.ensemble import SparseSignal
from lasso_phase_lab.errors import DimensionMismatch, Underdetermined
from lasso_phase_lab.solver import (
    SolverOptions,
    kkt_residual,
    lasso_objective,
    recovery_success,
    sign_pattern,
    solve_lasso,
)
from oracles import enumerate_lasso


def small_instance(seed, n=20, p=8, s=3, sigma=0.5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    support = rng.choice(p, s, replace=False)
    beta[support] = rng.choice([-1.0, 1.0], s) * rng.uniform(0.3, 1.5, s)
    return X, X @ beta + sigma * rng.standard_normal(n)


def test_zero_solution_above_lambda_max(rng):
    X = rng.standard_normal((15, 6))
    Y = rng.standard_normal(15)
    lam_max = np.abs(X.T @ Y).max() / 15
    for lam in (lam_max, 1.5 * lam_max):
        sol = solve_lasso(X, Y, lam)
        assert np.array_equal(sol.beta_hat, np.zeros(6))
        assert sol.kkt_residual == 0.0


def test_least_squares_identity_design():
    sol = solve_lasso(np.eye(3), np.array([1.0, -2.0, 3.0]), 0.0)
    assert np.allclose(sol.beta_hat, [1.0, -2.0, 3.0], atol=1e-14)


def test_lambda_zero_underdetermined(rng):
    with pytest.raises(Underdetermined):
        solve_lasso(rng.standard_normal((3, 5)), rng.standard_normal(3), 0.0)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("lam", [0.01, 0.1, 0.5])
def test_matches_enumeration_oracle(seed, lam):
    X, Y = small_instance(seed)
    oracle_obj, _ = enumerate_lasso(X, Y, lam)
    sol = solve_lasso(X, Y, lam)
    assert sol.objective <= oracle_obj + 1e-8
    assert abs(sol.objective - oracle_obj) <= 1e-8
    assert sol.kkt_residual <= 1e-8


def test_objective_recomputed(rng):
    X, Y = small_instance(42, n=40, p=30)
    sol = solve_lasso(X, Y, 0.05)
    assert sol.objective == pytest.approx(lasso_objective(X, Y, 0.05, sol.beta_hat), rel=1e-12)
    assert kkt_residual(X, Y, 0.05, sol.beta_hat) <= 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_objective_nonincreasing_per_sweep(seed):
    X, Y = small_instance(seed, n=30, p=60, s=5)
    sol = solve_lasso(X, Y, 0.05, SolverOptions(record_history=True))
    h = np.array(sol.history)
    assert len(h) >= 1
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]).max())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0), st.sampled_from([0.02, 0.1, 0.3]))
def test_scaling_homogeneity(seed, c, lam):
    X, Y = small_instance(seed)
    a = solve_lasso(X, Y, lam, SolverOptions(tol_kkt=1e-13))
    b = solve_lasso(X, c * Y, c * lam, SolverOptions(tol_kkt=1e-13 * c))
    assert np.allclose(b.beta_hat, c * a.beta_hat, rtol=0, atol=1e-10 * max(1.0, c))


def test_kkt_residual_cases(rng):
    X = rng.standard_normal((10, 4))
    Y = X @ np.array([1.0, 0.0, -1.0, 0.5])
    g = np.abs(X.T @ Y).max() / 10
    assert kkt_residual(X, Y, g, np.zeros(4)) == 0.0
    assert kkt_residual(X, Y, 0.0, np.zeros(4)) == pytest.approx(g, rel=1e-14)
    with pytest.raises(DimensionMismatch):
        kkt_residual(X, Y, 0.1, np.zeros(3))


def test_max_iters_flagged(rng):
    X, Y = small_instance(3, n=30, p=60)
    with pytest.warns(RuntimeWarning):
        sol = solve_lasso(X, Y, 0.01, SolverOptions(max_iters=1, tol_kkt=1e-14))
    assert not sol.converged and sol.iterations == 1


def test_sign_pattern():
    assert sign_pattern([0.5, -0.2, 0.0]).tolist() == [1, -1, 0]
    assert sign_pattern([1e-9, 1.0], 1e-6).tolist() == [0, 1]
    sig = SparseSignal.from_beta([0.0, 2.0, 0.0, -1.0])
    assert np.flatnonzero(sign_pattern(sig.beta_star)).tolist() == sig.support.tolist()


def test_recovery_success():
    sig = SparseSignal.from_beta([0.0, 2.0, 0.0, -1.0])
    assert recovery_success(sig.beta_star, sig)
    flipped = sig.beta_star.copy()
    flipped[1] = -2.0
    assert not recovery_success(flipped, sig)
    tau = 1e-6
    spurious = sig.beta_star.copy()
    spurious[0] = 2 * tau
    assert not recovery_success(spurious, sig, tau)
    with pytest.raises(DimensionMismatch):
        recovery_success(np.zeros(3), sig)
