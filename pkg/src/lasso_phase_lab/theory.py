"""Closed-form thresholds, schedules and moment formulas.

All logarithms are natural. The moment formulas are exact for Gaussian
designs and serve as oracles for the Monte Carlo checks in ``experiment``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    DegenerateGeometry,
    DegenerateSparsity,
    InsufficientDof,
    InvalidConstants,
    InvalidRho,
)


@dataclass(frozen=True)
class ThresholdPair:
    theta_l: float
    theta_u: float


@dataclass(frozen=True)
class ScheduleParams:
    theta: float
    n: int
    lambda_n: float
    s: int
    p: int


@dataclass(frozen=True)
class MnMoments:
    mean: float
    variance: float


class UStatMoments(NamedTuple):
    mean_Y: float
    mean_Yprime: float
    bound_Y: float
    bounds_Yprime: tuple


def thresholds(c_min: float, c_max: float, epsilon: float) -> ThresholdPair:
    """Lower/upper sample-size thresholds for given eigenvalue and incoherence constants.

    ``theta_l = (sqrt(Cmax) - sqrt(Cmax - 1/Cmax))^2 / (Cmax (2 - eps)^2)`` and
    ``theta_u = Cmax / (eps^2 Cmin)``.
    """
    if not (0 < c_min <= c_max):
        raise InvalidConstants(f"need 0 < c_min <= c_max, got {c_min}, {c_max}")
    if c_max < 1:
        raise InvalidConstants(f"c_max must be >= 1, got {c_max}")
    if not 0 < epsilon <= 1:
        raise InvalidConstants(f"epsilon must lie in (0, 1], got {epsilon}")
    gap = math.sqrt(c_max) - math.sqrt(c_max - 1.0 / c_max)
    theta_l = gap * gap / (c_max * (2.0 - epsilon) ** 2)
    theta_u = c_max / (epsilon * epsilon * c_min)
    assert theta_l <= 1.0 <= theta_u, (theta_l, theta_u)
    return ThresholdPair(theta_l, theta_u)


def sample_size(theta: float, s: int, p: int) -> int:
    """``ceil(2 theta s log(p - s) + s + 1)``, never below ``s + 2``."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if not 1 <= s < p:
        raise ValueError(f"need 1 <= s < p, got s={s}, p={p}")
    if p - s < 2:
        raise DegenerateGeometry(f"p - s must be >= 2, got {p - s}")
    n = math.ceil(2.0 * theta * s * math.log(p - s) + s + 1)
    return max(n, s + 2)


def lambda_schedule(n: int, p: int, s: int) -> float:
    """``sqrt(log(p - s) log(s) / n)``."""
    if s < 2:
        raise DegenerateSparsity(f"schedule needs s >= 2 (log s > 0), got s={s}")
    if p - s < 2:
        raise DegenerateGeometry(f"p - s must be >= 2, got {p - s}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.sqrt(math.log(p - s) * math.log(s) / n)


def schedule(theta: float, s: int, p: int) -> ScheduleParams:
    n = sample_size(theta, s, p)
    return ScheduleParams(theta, n, lambda_schedule(n, p, s), s, p)


def quad_form(sigma_ss, b) -> float:
    """``b' Sigma_SS^{-1} b``, the ``q`` argument of :func:`mn_moments`."""
    b = np.asarray(b, dtype=float)
    return float(b @ np.linalg.solve(np.asarray(sigma_ss, dtype=float), b))


def mn_moments(lambda_n: float, n: int, s: int, sigma2: float, q: float) -> MnMoments:
    """Mean and variance of the conditional-covariance scale factor M_n."""
    if n <= s + 3:
        raise InsufficientDof(f"need n > s + 3, got n={n}, s={s}")
    k = n - s
    mean = lambda_n**2 * q / (k - 1) + sigma2 * k / n**2
    h1 = 2.0 * k * sigma2**2 / n**4
    bracket = 1.0 / k + (k - 1.0) / k - (k - 3.0) / (k - 1.0)
    h2 = lambda_n**4 * q * q / ((k - 1.0) * (k - 3.0)) * bracket
    return MnMoments(mean, h1 + h2)


def u_stat_moments(
    lambda_n: float,
    n: int,
    s: int,
    sigma2: float,
    sigma_ss_inv,
    b_vec,
    i: int,
    d_max: Optional[float] = None,
    c_max: Optional[float] = None,
) -> UStatMoments:
    """Means of the conditional mean/variance of ``U_i`` given ``X_S``, with bounds.

    ``d_max`` defaults to ``||Sigma_SS^{-1}||_inf`` and ``c_max`` to the largest
    eigenvalue of ``Sigma_SS``; pass the population values when known.
    """
    if n <= s + 1:
        raise InsufficientDof(f"need n > s + 1, got n={n}, s={s}")
    inv = np.asarray(sigma_ss_inv, dtype=float)
    b = np.asarray(b_vec, dtype=float)
    dof = n - s - 1
    mean_y = -lambda_n * n / dof * float(inv[i] @ b)
    mean_yp = sigma2 / dof * float(inv[i, i])
    if d_max is None:
        d_max = float(np.abs(inv).sum(axis=1).max())
    if c_max is None:
        c_max = float(1.0 / np.linalg.eigvalsh(inv)[0])
    bound_y = 2.0 * d_max * n * lambda_n / dof
    bounds_yp = (sigma2 / (c_max * dof), sigma2 * d_max / dof)
    slack = 1e-12 * max(1.0, abs(bound_y), bounds_yp[1])
    assert abs(mean_y) <= bound_y + slack
    assert bounds_yp[0] - slack <= mean_yp <= bounds_yp[1] + slack
    return UStatMoments(mean_y, mean_yp, bound_y, bounds_yp)


def gaussian_max_bound(k: float, max_std: float) -> float:
    """Upper bound ``3 sqrt(log k) max_std`` on E max_i |X_i| over k Gaussians."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if max_std < 0:
        raise ValueError("max_std must be >= 0")
    return 3.0 * math.sqrt(math.log(k)) * max_std


def inverse_wishart_mean(sigma_ss, n: int) -> np.ndarray:
    """``E[(X_S'X_S)^{-1}] = Sigma_SS^{-1} / (n - s - 1)`` for n Gaussian rows."""
    sigma_ss = np.atleast_2d(np.asarray(sigma_ss, dtype=float))
    s = sigma_ss.shape[0]
    if n <= s + 1:
        raise InsufficientDof(f"need n > s + 1, got n={n}, s={s}")
    return np.linalg.inv(sigma_ss) / (n - s - 1)


def toeplitz_eigen_extremes(rho: float, p: Optional[int] = None) -> tuple[float, float]:
    """Extremes of the spectral density of the Toeplitz family ``rho^|i-j|``.

    Every finite section (any ``p``) has its eigenvalues strictly inside
    ``[(1-|rho|)/(1+|rho|), (1+|rho|)/(1-|rho|)]``; the bounds are attained
    only as ``p -> inf``. ``p`` is accepted for interface symmetry and unused.
    """
    if not abs(rho) < 1:
        raise InvalidRho(f"|rho| must be < 1, got {rho}")
    r = abs(rho)
    return (1 - r) / (1 + r), (1 + r) / (1 - r)
