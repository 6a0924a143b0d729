"""Covariance models, Gaussian designs, sparse signals and noisy observations.

Gaussian draws come from ``numpy.random.Generator`` (PCG64 bit generator,
ziggurat ``standard_normal``). Every sampling routine takes its own generator;
nothing here touches global RNG state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateRegime,
    DimensionMismatch,
    InvalidRho,
    InvalidSparsity,
    NotPositiveDefinite,
    ZeroColumn,
)


class CovarianceKind(str, enum.Enum):
    IDENTITY = "identity"
    TOEPLITZ = "toeplitz"
    CUSTOM = "custom"


class Regime(str, enum.Enum):
    LINEAR = "linear"
    SUBLINEAR = "sublinear"
    FRACTIONAL_POWER = "fractional_power"


@dataclass(frozen=True)
class CovarianceSpec:
    kind: CovarianceKind = CovarianceKind.IDENTITY
    p: int = 0
    rho: float = 0.0
    custom_matrix: Optional[np.ndarray] = None

    def with_dimension(self, p: int) -> "CovarianceSpec":
        if self.kind is CovarianceKind.CUSTOM:
            if self.custom_matrix is None or self.custom_matrix.shape[0] != p:
                raise DimensionMismatch(
                    f"custom covariance is fixed-size and cannot be resized to p={p}"
                )
        return CovarianceSpec(self.kind, p, self.rho, self.custom_matrix)


@dataclass(frozen=True)
class Covariance:
    matrix: np.ndarray
    chol: np.ndarray
    spec: CovarianceSpec

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_identity(self) -> bool:
        return self.spec.kind is CovarianceKind.IDENTITY


@dataclass(frozen=True)
class SparseSignal:
    beta_star: np.ndarray
    support: np.ndarray
    rho_min: float

    @property
    def p(self) -> int:
        return self.beta_star.shape[0]

    @property
    def s(self) -> int:
        return self.support.shape[0]

    @property
    def off_support(self) -> np.ndarray:
        mask = np.ones(self.p, dtype=bool)
        mask[self.support] = False
        return np.flatnonzero(mask)

    @property
    def signs(self) -> np.ndarray:
        """``sgn(beta*_S)`` as a float vector of +/-1."""
        return np.sign(self.beta_star[self.support])

    @classmethod
    def from_beta(cls, beta_star) -> "SparseSignal":
        beta_star = np.asarray(beta_star, dtype=float)
        support = np.flatnonzero(beta_star)
        if support.size < 1 or support.size >= beta_star.size:
            raise InvalidSparsity(
                f"need 1 <= s < p, got s={support.size}, p={beta_star.size}"
            )
        return cls(beta_star, support, float(np.min(np.abs(beta_star[support]))))


@dataclass(frozen=True)
class ProblemInstance:
    X: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    sigma2: float
    signal: SparseSignal
    covariance: Optional[CovarianceSpec] = None

    @property
    def n(self) -> int:
        return self.X.shape[0]


def round_half_up(x: float) -> int:
    """Round half away from zero (Python's ``round`` is banker's rounding)."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def toeplitz_matrix(rho: float, p: int) -> np.ndarray:
    return rho ** np.abs(np.subtract.outer(np.arange(p), np.arange(p))).astype(float)


def build_covariance(spec: CovarianceSpec) -> Covariance:
    kind = CovarianceKind(spec.kind)
    if kind is CovarianceKind.IDENTITY:
        if spec.p < 1:
            raise ValueError("dimension p must be positive")
        eye = np.eye(spec.p)
        return Covariance(eye, eye.copy(), spec)

    if kind is CovarianceKind.TOEPLITZ:
        if spec.p < 1:
            raise ValueError("dimension p must be positive")
        if not abs(spec.rho) < 1:
            raise InvalidRho(f"|rho| must be < 1, got {spec.rho}")
        sigma = toeplitz_matrix(spec.rho, spec.p)
    else:
        if spec.custom_matrix is None:
            raise ValueError("custom covariance requires custom_matrix")
        sigma = np.array(spec.custom_matrix, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise DimensionMismatch(f"custom matrix must be square, got {sigma.shape}")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * np.abs(sigma).max()):
            raise NotPositiveDefinite("custom matrix is not symmetric")

    try:
        chol = linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return Covariance(sigma, chol, spec)


def sample_design(cov: Covariance, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. rows from N(0, Sigma) as an n x p array."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    Z = rng.standard_normal((n, cov.p))
    if cov.is_identity:
        return Z
    return Z @ cov.chol.T


def normalize_columns(X: np.ndarray) -> np.ndarray:
    """Rescale every column so that its squared norm equals the row count."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise ZeroColumn(f"zero columns at {np.flatnonzero(norms == 0).tolist()}")
    return X * (math.sqrt(n) / norms)


def make_signal(p: int, s: int, b: float, rng: np.random.Generator) -> SparseSignal:
    """Uniform random support of size ``s`` with entries +/-b, fair signs."""
    if not 1 <= s < p:
        raise InvalidSparsity(f"need 1 <= s < p, got s={s}, p={p}")
    if not b > 0:
        raise ValueError(f"signal magnitude must be positive, got {b}")
    support = np.sort(rng.choice(p, size=s, replace=False))
    signs = 2.0 * rng.integers(0, 2, size=s) - 1.0
    beta = np.zeros(p)
    beta[support] = b * signs
    return SparseSignal(beta, support, float(b))


def observe(
    X: np.ndarray,
    signal: SparseSignal,
    sigma2: float,
    rng: np.random.Generator,
    covariance: Optional[CovarianceSpec] = None,
) -> ProblemInstance:
    if X.shape[1] != signal.p:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, signal has p={signal.p}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    # +0.0 folds the -0.0 entries produced when sigma2 == 0
    W = math.sqrt(sigma2) * rng.standard_normal(X.shape[0]) + 0.0
    Y = X @ signal.beta_star + W
    return ProblemInstance(X, W, Y, float(sigma2), signal, covariance)


def sparsity_index(regime: Regime, p: int, alpha: float, gamma: float = 0.75) -> int:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    regime = Regime(regime)
    if regime is Regime.LINEAR:
        raw = alpha * p
    elif regime is Regime.SUBLINEAR:
        ap = alpha * p
        if ap <= 1:
            raise DegenerateRegime(f"alpha*p = {ap} gives log(alpha*p) <= 0")
        raw = ap / math.log(ap)
    else:
        if not 0 < gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
        raw = alpha * p**gamma
    s = round_half_up(raw)
    if s < 1 or s >= p:
        raise DegenerateRegime(f"{regime.value} regime gives s={s} for p={p}")
    return s
