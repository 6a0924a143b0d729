"""Seeded Monte Carlo harness: theta sweeps and statistics validation.

Each trial owns a generator seeded from ``SeedSequence([base_seed, p,
theta_index, trial_index])``, so a sweep is a pure function of its config no
matter how trials are spread across worker processes.
"""

from __future__ import annotations

import enum
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.optimize import isotonic_regression

from . import theory
from .conditions import AMBIGUITY_TOL, lemma1_check, population_constants
from .ensemble import (
    CovarianceSpec,
    Regime,
    build_covariance,
    make_signal,
    observe,
    sample_design,
    sparsity_index,
)
from .errors import InsufficientDof, SingularGram
from .solver import recovery_success, solve_lasso

log = logging.getLogger(__name__)

DEFAULT_THETA_GRID = tuple(round(0.1 * k, 10) for k in range(1, 25))


class SuccessMode(str, enum.Enum):
    SOLVER_SIGN = "solver_sign"
    LEMMA1 = "lemma1_predicate"
    BOTH = "both"


@dataclass(frozen=True)
class ExperimentConfig:
    p_list: tuple = (128, 256, 512)
    regime: Regime = Regime.FRACTIONAL_POWER
    alpha: float = 0.40
    gamma: float = 0.75
    ensemble: CovarianceSpec = field(default_factory=CovarianceSpec)
    sigma2: float = 0.25
    signal_magnitude: float = 0.5
    theta_grid: tuple = DEFAULT_THETA_GRID
    trials: int = 200
    base_seed: int = 0
    success_mode: SuccessMode = SuccessMode.LEMMA1
    # run the solver on every k-th trial as a cross-check (Lemma-1 mode only)
    crosscheck_every: int = 10
    ambiguity_tol: float = AMBIGUITY_TOL

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "success_mode", SuccessMode(self.success_mode))
        object.__setattr__(self, "p_list", tuple(int(p) for p in self.p_list))
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.p_list:
            raise ValueError("p_list must not be empty")
        if any(t <= 0 for t in self.theta_grid):
            raise ValueError("theta values must be positive")
        if not 0 < self.alpha < 1 or not 0 < self.gamma < 1:
            raise ValueError("alpha and gamma must lie in (0, 1)")
        if self.sigma2 < 0 or self.signal_magnitude <= 0:
            raise ValueError("need sigma2 >= 0 and signal_magnitude > 0")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must be an unsigned 64-bit integer")
        if self.crosscheck_every < 0:
            raise ValueError("crosscheck_every must be >= 0")

    def sparsity(self, p: int) -> int:
        return sparsity_index(self.regime, p, self.alpha, self.gamma)


@dataclass(frozen=True)
class TrialOutcome:
    theta: float
    p: int
    s: int
    n: int
    lambda_n: float
    seed: tuple
    success: bool
    success_lemma1: Optional[bool]
    success_solver: Optional[bool]
    ambiguous: bool
    singular: bool
    kkt_residual: Optional[float]  # None when the solver was not run
    wall_time: float

    @property
    def disagreement(self) -> bool:
        return (
            self.success_lemma1 is not None
            and self.success_solver is not None
            and not self.ambiguous
            and self.success_lemma1 != self.success_solver
        )


@dataclass(frozen=True)
class SweepCell:
    p: int
    regime: str
    theta: float
    s: int
    n: int
    lambda_n: float
    trials: int
    successes: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    ambiguous: int
    mean_kkt_residual: Optional[float] = None
    singular: int = 0
    disagreements: int = 0


@dataclass(frozen=True)
class SweepResult:
    cells: tuple = ()

    def by_p(self, p: int) -> list:
        return [c for c in self.cells if c.p == p]


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"invalid counts: {successes}/{trials}")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    lo, hi = center - half, center + half
    # pin the exact endpoints that rounding can push past 0 or 1
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return max(0.0, min(lo, phat)), min(1.0, max(hi, phat))


def trial_seed(base_seed: int, p: int, theta_index: int, trial_index: int) -> tuple:
    return (int(base_seed), int(p), int(theta_index), int(trial_index))


_COV_CACHE: dict = {}


def _covariance(spec: CovarianceSpec, p: int):
    key = (spec.kind, p, spec.rho, id(spec.custom_matrix))
    cov = _COV_CACHE.get(key)
    if cov is None:
        cov = _COV_CACHE[key] = build_covariance(spec.with_dimension(p))
    return cov


def run_trial(config: ExperimentConfig, theta_index: int, p: int, trial_index: int) -> TrialOutcome:
    """One seeded draw of (X, beta*, W) at ``config.theta_grid[theta_index]``."""
    t0 = time.perf_counter()
    theta = config.theta_grid[theta_index]
    s = config.sparsity(p)
    sched = theory.schedule(theta, s, p)
    seed = trial_seed(config.base_seed, p, theta_index, trial_index)
    rng = np.random.default_rng(np.random.SeedSequence(list(seed)))

    cov = _covariance(config.ensemble, p)
    X = sample_design(cov, sched.n, rng)
    signal = make_signal(p, s, config.signal_magnitude, rng)
    inst = observe(X, signal, config.sigma2, rng)
    lam = sched.lambda_n

    mode = config.success_mode
    lemma = None
    ambiguous = singular = False
    try:
        cert = lemma1_check(inst.X, signal, inst.W, lam)
    except SingularGram:
        singular = True
        lemma = False
    else:
        lemma = cert.success
        ambiguous = cert.ambiguous(config.ambiguity_tol)

    run_solver = mode is not SuccessMode.LEMMA1 or (
        config.crosscheck_every > 0 and trial_index % config.crosscheck_every == 0
    )
    solver_ok = None
    kkt = None
    if run_solver:
        sol = solve_lasso(inst.X, inst.Y, lam)
        solver_ok = recovery_success(sol.beta_hat, signal)
        kkt = sol.kkt_residual

    if mode is SuccessMode.LEMMA1:
        success = lemma and not ambiguous
    elif mode is SuccessMode.SOLVER_SIGN:
        success = solver_ok
    else:
        success = lemma and solver_ok and not ambiguous

    return TrialOutcome(
        theta=theta,
        p=p,
        s=s,
        n=sched.n,
        lambda_n=lam,
        seed=seed,
        success=bool(success),
        success_lemma1=lemma,
        success_solver=solver_ok,
        ambiguous=ambiguous,
        singular=singular,
        kkt_residual=kkt,
        wall_time=time.perf_counter() - t0,
    )


def _run_cell(args) -> list:
    config, theta_index, p = args
    return [run_trial(config, theta_index, p, t) for t in range(config.trials)]


def default_workers() -> int:
    env = os.environ.get("LPL_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def aggregate(config: ExperimentConfig, p: int, outcomes: Sequence[TrialOutcome]) -> SweepCell:
    first = outcomes[0]
    trials = len(outcomes)
    successes = sum(o.success for o in outcomes)
    lo, hi = wilson_interval(successes, trials)
    kkts = [o.kkt_residual for o in outcomes if o.kkt_residual is not None]
    return SweepCell(
        p=p,
        regime=config.regime.value,
        theta=first.theta,
        s=first.s,
        n=first.n,
        lambda_n=first.lambda_n,
        trials=trials,
        successes=successes,
        p_hat=successes / trials,
        ci_lo=lo,
        ci_hi=hi,
        ambiguous=sum(o.ambiguous for o in outcomes),
        mean_kkt_residual=float(np.mean(kkts)) if kkts else None,
        singular=sum(o.singular for o in outcomes),
        disagreements=sum(o.disagreement for o in outcomes),
    )


def run_sweep(
    config: ExperimentConfig,
    workers: Optional[int] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> SweepResult:
    """Run every (p, theta, trial) combination and aggregate per (p, theta)."""
    workers = default_workers() if workers is None else max(1, int(workers))
    for p in config.p_list:
        # fail fast on configs whose schedule is undefined
        s = config.sparsity(p)
        theory.lambda_schedule(1, p, s)
    tasks = [(config, ti, p) for p in config.p_list for ti in range(len(config.theta_grid))]
    total = len(tasks)
    results: dict = {}

    def record(key, outcomes, done):
        results[key] = outcomes
        if progress is not None:
            progress(done, total)
        log.debug("cell p=%d theta_index=%d done (%d/%d)", key[1], key[0], done, total)

    if workers == 1 or total == 1:
        for done, task in enumerate(tasks, 1):
            record((task[1], task[2]), _run_cell(task), done)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done, (task, outcomes) in enumerate(zip(tasks, pool.map(_run_cell, tasks)), 1):
                record((task[1], task[2]), outcomes, done)

    cells = []
    for p in sorted(config.p_list):
        order = sorted(range(len(config.theta_grid)), key=lambda i: config.theta_grid[i])
        for ti in order:
            cells.append(aggregate(config, p, results[(ti, p)]))
    return SweepResult(tuple(cells))


def smoothed_curve(cells: Sequence[SweepCell]) -> tuple[np.ndarray, np.ndarray]:
    """(theta, isotonic fit of p_hat) for the cells of one problem size."""
    cells = sorted(cells, key=lambda c: c.theta)
    theta = np.array([c.theta for c in cells])
    raw = np.array([c.p_hat for c in cells])
    weights = np.array([c.trials for c in cells], dtype=float)
    return theta, isotonic_regression(raw, weights=weights).x


def crossing(theta: np.ndarray, curve: np.ndarray, level: float) -> float:
    """First theta at which a nondecreasing curve reaches ``level`` (linear interpolation)."""
    idx = np.flatnonzero(curve >= level)
    if idx.size == 0:
        return math.inf
    k = idx[0]
    if k == 0:
        return float(theta[0])
    t0, t1, c0, c1 = theta[k - 1], theta[k], curve[k - 1], curve[k]
    return float(t0 + (level - c0) * (t1 - t0) / (c1 - c0))


def transition_width(cells: Sequence[SweepCell], lo: float = 0.1, hi: float = 0.9) -> float:
    """Theta-width of the band where the smoothed success curve lies in [lo, hi]."""
    theta, curve = smoothed_curve(cells)
    return crossing(theta, curve, hi) - crossing(theta, curve, lo)


# ---------------------------------------------------------------------------
# statistics validation


@dataclass(frozen=True)
class StatConfig:
    n: int = 50
    s: int = 5
    p: int = 20
    ensemble: CovarianceSpec = field(default_factory=CovarianceSpec)
    sigma2: float = 0.25
    lam: float = 0.3
    reps: int = 20000
    seed: int = 0
    v_columns: int = 3
    max_k: int = 100


@dataclass(frozen=True)
class StatCheck:
    name: str
    passed: bool
    statistic: float  # z-score or relative error, see ``kind``
    kind: str
    empirical: float
    expected: float


@dataclass(frozen=True)
class StatReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _z_check(name, samples, expected, z_max=3.0):
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1)) / math.sqrt(len(samples))
    diff = mean - expected
    if se == 0:
        ok = abs(diff) <= 1e-12 * max(1.0, abs(expected))
        z = 0.0 if ok else math.inf
    else:
        z = diff / se
        ok = abs(z) <= z_max
    return StatCheck(name, ok, z, "z", mean, expected)


def _rel_check(name, empirical, expected, scale, tol):
    err = float(np.max(np.abs(np.asarray(empirical) - np.asarray(expected))))
    if scale == 0:
        rel = 0.0 if err == 0 else math.inf
    else:
        rel = err / scale
    emp = float(np.max(np.abs(empirical)))
    exp = float(np.max(np.abs(expected)))
    return StatCheck(name, rel <= tol, rel, "rel", emp, exp)


def _gram_draws(rng, chol_ss, n, reps, sigma, lam, b, chunk=4000):
    s = chol_ss.shape[0]
    M, Y, Yp, Ginv_sum = [], [], [], np.zeros((s, s))
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        XS = rng.standard_normal((m, n, s)) @ chol_ss.T
        W = sigma * rng.standard_normal((m, n))
        G = np.einsum("rki,rkj->rij", XS, XS)
        Ginv = np.linalg.inv(G)
        XtW = np.einsum("rki,rk->ri", XS, W)
        A = np.einsum("i,rij,j->r", b, Ginv, b)
        proj = np.einsum("ri,rij,rj->r", XtW, Ginv, XtW)
        wrw = np.einsum("rk,rk->r", W, W) - proj
        M.append(lam**2 * A + wrw / n**2)
        Y.append(-lam * n * np.einsum("rij,j->ri", Ginv, b))
        Yp.append(sigma**2 * np.einsum("rii->ri", Ginv))
        Ginv_sum += Ginv.sum(axis=0)
        done += m
    return np.concatenate(M), np.concatenate(Y), np.concatenate(Yp), Ginv_sum / reps


def validate_statistics(config: StatConfig = StatConfig()) -> StatReport:
    """Monte Carlo comparisons of M_n, U-statistics, inverse-Wishart and V moments."""
    n, s, p = config.n, config.s, config.p
    if n <= s + 3:
        raise InsufficientDof(f"need n > s + 3, got n={n}, s={s}")
    if not 1 <= s < p:
        raise ValueError(f"need 1 <= s < p, got s={s}, p={p}")
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), n, s, p]))
    cov = build_covariance(config.ensemble.with_dimension(p))
    S = np.arange(s)
    Sc = np.arange(s, p)
    sigma_ss = cov.matrix[np.ix_(S, S)]
    chol_ss = linalg.cholesky(sigma_ss, lower=True)
    inv_ss = np.linalg.inv(sigma_ss)
    b = 2.0 * rng.integers(0, 2, size=s) - 1.0
    sigma = math.sqrt(config.sigma2)
    lam = config.lam

    checks = []
    M, Y, Yp, Ginv_mean = _gram_draws(rng, chol_ss, n, config.reps, sigma, lam, b)

    q = float(b @ inv_ss @ b)
    mom = theory.mn_moments(lam, n, s, config.sigma2, q)
    checks.append(_z_check("M_n mean", M, mom.mean))
    var_emp = float(np.var(M, ddof=1))
    checks.append(_rel_check("M_n variance", var_emp, mom.variance, mom.variance, 0.10))

    eps_pop, c_min, c_max, d_max = population_constants(cov, S)
    for i in range(s):
        um = theory.u_stat_moments(lam, n, s, config.sigma2, inv_ss, b, i, d_max, c_max)
        checks.append(_z_check(f"Y_{i} mean", Y[:, i], um.mean_Y))
        checks.append(_z_check(f"Y'_{i} mean", Yp[:, i], um.mean_Yprime))

    iw = theory.inverse_wishart_mean(sigma_ss, n)
    checks.append(_rel_check("inverse-Wishart mean", Ginv_mean, iw, float(np.abs(iw).max()), 0.05))

    checks.extend(_conditional_v_checks(rng, cov.matrix, S, Sc, n, b, sigma, lam, eps_pop, config))

    if config.max_k >= 2:
        draws = np.abs(rng.standard_normal((config.reps, config.max_k))).max(axis=1)
        bound = theory.gaussian_max_bound(config.max_k, 1.0)
        emp = float(draws.mean())
        checks.append(StatCheck("Gaussian max bound", emp <= bound, emp / bound, "ratio", emp, bound))

    return StatReport(tuple(checks))


def _conditional_v_checks(rng, sigma_full, S, Sc, n, b, sigma, lam, eps_pop, config):
    T = Sc[: config.v_columns]
    sigma_ss = sigma_full[np.ix_(S, S)]
    sigma_ts = sigma_full[np.ix_(T, S)]
    reg = np.linalg.solve(sigma_ss, sigma_ts.T)  # Sigma_SS^{-1} Sigma_ST
    cond = sigma_full[np.ix_(T, T)] - sigma_ts @ reg
    chol_cond = linalg.cholesky(cond, lower=True)

    XS = rng.standard_normal((n, S.size)) @ linalg.cholesky(sigma_ss, lower=True).T
    W = sigma * rng.standard_normal(n)
    G = XS.T @ XS
    Ginv_b = np.linalg.solve(G, b)
    resid_w = W - XS @ np.linalg.solve(G, XS.T @ W)
    h = lam * XS @ Ginv_b + resid_w / n
    m_n = lam**2 * float(b @ Ginv_b) + float(W @ resid_w) / n**2

    V = np.empty((config.reps, T.size))
    done = 0
    while done < config.reps:
        m = min(4000, config.reps - done)
        Z = rng.standard_normal((m, n, T.size)) @ chol_cond.T
        XT = XS @ reg + Z
        V[done : done + m] = np.einsum("rkj,k->rj", XT, h)
        done += m

    expected_cov = m_n * cond
    emp_cov = np.atleast_2d(np.cov(V, rowvar=False))
    scale = float(np.abs(np.diag(expected_cov)).max())
    out = [_rel_check("V conditional covariance", emp_cov, expected_cov, scale, 0.05)]

    mean = V.mean(axis=0)
    se = V.std(axis=0, ddof=1) / math.sqrt(config.reps)
    limit = lam * (1 - eps_pop) + 3 * se
    worst = int(np.argmax(np.abs(mean) - limit))
    out.append(
        StatCheck(
            "V conditional mean bound",
            bool(np.all(np.abs(mean) <= limit)),
            float(np.max(np.abs(mean) - limit)),
            "excess",
            float(abs(mean[worst])),
            float(limit[worst]),
        )
    )
    return out
