"""Exact sign-recovery certificate and incoherence quantities.

For a design ``X`` with support ``S`` (Gram ``G = X_S'X_S``) and signs
``b = sgn(beta*_S)`` the Lasso recovers the signed support iff

* every off-support correlation stays inside the penalty,
  ``|X_Sc' X_S G^{-1} (X_S'W/n - lam b) - X_Sc'W/n| <= lam``, and
* the restricted solution ``beta*_S + U`` keeps the signs ``b``, where
  ``U = (G/n)^{-1} (X_S'W/n - lam b)``.

The second condition is evaluated as ``b * (beta*_S + U) > delta_b``. Asking
only for ``beta*_S + U != 0`` is not enough: a sign flip on the support makes
``sgn(beta*_S)`` an invalid subgradient and the candidate is not optimal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .ensemble import Covariance, SparseSignal
from .errors import DimensionMismatch, SingularGram, SingularSubmatrix

COND_LIMIT = 1e12
AMBIGUITY_TOL = 1e-6


@dataclass(frozen=True)
class UVVariables:
    U: np.ndarray
    V: np.ndarray
    b_vec: np.ndarray

    @property
    def N(self) -> int:
        return self.V.shape[0]


@dataclass(frozen=True)
class RecoveryCertificate:
    cond_a: bool
    cond_b: bool
    margin_a: float  # lam - max_j |V_j|
    margin_b: float  # rho_min - max_i |U_i|
    margin_sign: float  # min_i b_i (beta*_i + U_i) - delta_b
    event_MV: bool
    event_MU: bool

    @property
    def success(self) -> bool:
        return self.cond_a and self.cond_b

    def ambiguous(self, tol: float = AMBIGUITY_TOL) -> bool:
        """True when either deciding margin is too close to zero to trust."""
        return abs(self.margin_a) <= tol or abs(self.margin_sign) <= tol


@dataclass(frozen=True)
class DesignConditionReport:
    epsilon_sample: float
    lambda_min_sample: float
    epsilon_pop: float
    c_min: float
    c_max: float
    d_max: float


def _gram_factor(XS: np.ndarray, label: str = "X_S'X_S"):
    G = XS.T @ XS
    w = np.linalg.eigvalsh(G)
    if w.size and (w[0] <= 0 or w[-1] / w[0] > COND_LIMIT):
        raise SingularGram(f"{label} is numerically singular (eigenvalues {w[0]:.3e}..{w[-1]:.3e})")
    return linalg.cho_factor(G, lower=True)


def _split(X, signal: SparseSignal):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != signal.p:
        raise DimensionMismatch(f"X has shape {X.shape}, signal has p={signal.p}")
    return X[:, signal.support], X[:, signal.off_support]


def _uv(X, signal, W, lam):
    XS, XSc = _split(X, signal)
    n = X.shape[0]
    W = np.asarray(W, dtype=float)
    if W.shape != (n,):
        raise DimensionMismatch(f"W has shape {W.shape}, expected ({n},)")
    b = signal.signs
    factor = _gram_factor(XS)
    # U = n G^{-1} (X_S'W/n - lam b)
    U = n * linalg.cho_solve(factor, XS.T @ W / n - lam * b)
    # V_j = X_j'{X_S G^{-1} lam b + (I - P) W/n}, the off-support dual residual
    fitted = XS @ (U / n)  # X_S G^{-1}(X_S'W/n - lam b) = P W/n - X_S G^{-1} lam b
    V = XSc.T @ (W / n - fitted)
    return UVVariables(U, V, b)


def compute_uv(X, signal: SparseSignal, W, lam: float) -> UVVariables:
    return _uv(X, signal, W, lam)


def lemma1_check(X, signal: SparseSignal, W, lam: float, delta_b: float = 0.0) -> RecoveryCertificate:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if delta_b < 0:
        raise ValueError("delta_b must be >= 0")
    uv = _uv(X, signal, W, lam)
    max_v = float(np.max(np.abs(uv.V))) if uv.V.size else 0.0
    max_u = float(np.max(np.abs(uv.U)))
    margin_a = lam - max_v
    margin_b = signal.rho_min - max_u
    restricted = signal.beta_star[signal.support] + uv.U
    margin_sign = float(np.min(uv.b_vec * restricted)) - delta_b
    return RecoveryCertificate(
        cond_a=margin_a >= 0,
        cond_b=margin_sign > 0,
        margin_a=margin_a,
        margin_b=margin_b,
        margin_sign=margin_sign,
        event_MV=max_v <= lam,
        event_MU=max_u <= signal.rho_min,
    )


def _inf_norm(A: np.ndarray) -> float:
    """Operator norm l_inf -> l_inf: largest absolute row sum."""
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


def sample_incoherence(X, S) -> tuple[float, float]:
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    S = np.asarray(S, dtype=int)
    Sc = np.setdiff1d(np.arange(p), S)
    XS, XSc = X[:, S], X[:, Sc]
    factor = _gram_factor(XS)
    # X_Sc'X_S G^{-1} = (G^{-1} X_S'X_Sc)'
    M = linalg.cho_solve(factor, XS.T @ XSc).T
    lam_min = float(np.linalg.eigvalsh(XS.T @ XS / n)[0])
    return 1.0 - _inf_norm(M), lam_min


def population_constants(cov, S) -> tuple[float, float, float, float]:
    """(epsilon, C_min, C_max, D_max) of a population covariance and support."""
    sigma = cov.matrix if isinstance(cov, Covariance) else np.asarray(cov, dtype=float)
    p = sigma.shape[0]
    S = np.asarray(S, dtype=int)
    Sc = np.setdiff1d(np.arange(p), S)
    sss = sigma[np.ix_(S, S)]
    try:
        factor = linalg.cho_factor(sss, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularSubmatrix(str(exc)) from exc
    w = np.linalg.eigvalsh(sss)
    if w[0] <= 0 or w[-1] / w[0] > COND_LIMIT:
        raise SingularSubmatrix("Sigma_SS is numerically singular")
    inv = linalg.cho_solve(factor, np.eye(S.size))
    cross = linalg.cho_solve(factor, sigma[np.ix_(S, Sc)]).T
    return (
        1.0 - _inf_norm(cross),
        float(w[0]),
        float(np.linalg.eigvalsh(sigma)[-1]),
        _inf_norm(inv),
    )


def design_report(X, cov, S) -> DesignConditionReport:
    eps_s, lam_min = sample_incoherence(X, S)
    eps_p, c_min, c_max, d_max = population_constants(cov, S)
    return DesignConditionReport(eps_s, lam_min, eps_p, c_min, c_max, d_max)
