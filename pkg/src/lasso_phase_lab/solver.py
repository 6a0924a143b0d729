"""Cyclic coordinate descent for the Lasso with a KKT-based stopping rule.

The objective is ``(1/2n)||Y - X beta||^2 + lam * ||beta||_1``. Sweeps work on
the Gram matrix ``G = X'X/n`` and correlations ``c = X'Y/n`` and keep the
gradient ``G beta - c`` up to date with rank-one corrections; after every
full sweep the gradient is recomputed from scratch before the KKT test so
accumulated drift never leaks into the reported residual.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .ensemble import SparseSignal
from .errors import DimensionMismatch, NotConverged, Underdetermined


@dataclass(frozen=True)
class SolverOptions:
    tol_kkt: float = 1e-8
    max_iters: int = 100_000
    zero_threshold: float = 0.0
    record_history: bool = False

    def __post_init__(self):
        if not self.tol_kkt > 0:
            raise ValueError("tol_kkt must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.zero_threshold < 0:
            raise ValueError("zero_threshold must be >= 0")


@dataclass(frozen=True)
class LassoSolution:
    beta_hat: np.ndarray
    lam: float
    kkt_residual: float
    iterations: int
    objective: float
    converged: bool = True
    # objective after each sweep, only filled when ``record_history`` is set
    history: tuple = ()


def lasso_objective(X: np.ndarray, Y: np.ndarray, lam: float, beta: np.ndarray) -> float:
    r = Y - X @ beta
    return float(r @ r / (2 * X.shape[0]) + lam * np.abs(beta).sum())


def _check_dims(X, Y, beta=None):
    if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X {X.shape} and Y {Y.shape} do not conform")
    if beta is not None and beta.shape != (X.shape[1],):
        raise DimensionMismatch(f"beta has shape {beta.shape}, expected ({X.shape[1]},)")


def _kkt_from_gradient(g: np.ndarray, beta: np.ndarray, lam: float) -> float:
    nz = beta != 0
    viol = np.where(nz, np.abs(g + lam * np.sign(beta)), np.maximum(np.abs(g) - lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


def kkt_residual(X, Y, lam: float, beta) -> float:
    """Largest violation of the Lasso stationarity/subgradient conditions."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _check_dims(X, Y, beta)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    g = X.T @ (X @ beta - Y) / X.shape[0]
    return _kkt_from_gradient(g, beta, lam)


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def solve_lasso(X, Y, lam: float, opts: Optional[SolverOptions] = None) -> LassoSolution:
    opts = opts or SolverOptions()
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    _check_dims(X, Y)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    n, p = X.shape

    if lam == 0:
        if n < p or np.linalg.matrix_rank(X) < p:
            raise Underdetermined(f"lambda=0 needs full column rank, got n={n}, p={p}")
        beta = linalg.lstsq(X, Y)[0]
        res = kkt_residual(X, Y, 0.0, beta)
        obj = lasso_objective(X, Y, 0.0, beta)
        return LassoSolution(beta, 0.0, res, 1, obj, res <= opts.tol_kkt)

    G = X.T @ X / n
    c = X.T @ Y / n
    diag = np.diag(G).copy()
    beta = np.zeros(p)
    history = []

    def objective():
        # Gram form of the objective; exact up to rounding
        return float(0.5 * beta @ G @ beta - c @ beta + Y @ Y / (2 * n) + lam * np.abs(beta).sum())

    if np.max(np.abs(c)) <= lam:
        res = _kkt_from_gradient(-c, beta, lam)
        return LassoSolution(beta, float(lam), res, 0, lasso_objective(X, Y, lam, beta))

    g = -c.copy()
    usable = np.flatnonzero(diag > 0)
    iters = 0
    res = np.inf

    def sweep(coords):
        moved = 0.0
        for j in coords:
            old = beta[j]
            new = _soft(old * diag[j] - g[j], lam) / diag[j]
            if new != old:
                delta = new - old
                g[:] += G[:, j] * delta
                beta[j] = new
                moved = max(moved, abs(delta) * diag[j])
        return moved

    while iters < opts.max_iters:
        sweep(usable)
        iters += 1
        if opts.record_history:
            history.append(objective())
        g[:] = G @ beta - c
        res = _kkt_from_gradient(g, beta, lam)
        if res <= opts.tol_kkt:
            break
        active = np.flatnonzero(beta != 0)
        while iters < opts.max_iters and active.size:
            moved = sweep(active)
            iters += 1
            if opts.record_history:
                history.append(objective())
            if moved <= 0.1 * opts.tol_kkt:
                break
            act_res = np.abs(g[active] + lam * np.sign(beta[active]))
            if act_res.size == 0 or act_res.max() <= 0.1 * opts.tol_kkt:
                break
            active = np.flatnonzero(beta != 0)

    converged = res <= opts.tol_kkt
    if not converged:
        warnings.warn(
            f"coordinate descent stopped after {iters} sweeps with KKT residual {res:.3e}",
            NotConverged,
            stacklevel=2,
        )
    return LassoSolution(
        beta,
        float(lam),
        float(res),
        iters,
        lasso_objective(X, Y, lam, beta),
        converged,
        tuple(history),
    )


def sign_pattern(beta, tau: float = 0.0) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    out = np.sign(beta).astype(int)
    out[np.abs(beta) <= tau] = 0
    return out


def recovery_success(beta_hat, signal: SparseSignal, tau: float = 0.0) -> bool:
    beta_hat = np.asarray(beta_hat, dtype=float)
    if beta_hat.shape != signal.beta_star.shape:
        raise DimensionMismatch(
            f"beta_hat has shape {beta_hat.shape}, signal has p={signal.p}"
        )
    return bool(np.array_equal(sign_pattern(beta_hat, tau), sign_pattern(signal.beta_star, 0.0)))
