"""Independent reference computations used by the test-suite."""

import itertools

import numpy as np


def enumerate_lasso(X, Y, lam):
    """Global Lasso minimum by enumerating every support and sign pattern.

    For each candidate support T and signs z the stationarity equations
    restricted to T, ``G_TT beta_T = c_T - lam z``, fix beta_T. A candidate is
    kept if its signs match z and every off-T coordinate satisfies
    ``|c_j - G_jT beta_T| <= lam``. Returns (objective, beta) of the best one.
    """
    n, p = X.shape
    G = X.T @ X / n
    c = X.T @ Y / n
    best_obj, best_beta = np.inf, None
    slack = 1e-9
    for k in range(p + 1):
        for T in itertools.combinations(range(p), k):
            T = list(T)
            Tc = [j for j in range(p) if j not in T]
            if k == 0:
                cands = [(np.zeros(0), np.zeros(0))]
            else:
                Z = np.array(list(itertools.product((-1.0, 1.0), repeat=k))).T  # k x 2^k
                B = np.linalg.solve(G[np.ix_(T, T)], c[T][:, None] - lam * Z)
                cands = [(B[:, m], Z[:, m]) for m in range(Z.shape[1])]
            for bT, z in cands:
                if k and np.any(np.sign(bT) != z):
                    continue
                beta = np.zeros(p)
                beta[T] = bT
                if Tc and np.max(np.abs(c[Tc] - G[np.ix_(Tc, T)] @ bT if k else c[Tc])) > lam + slack:
                    continue
                r = Y - X @ beta
                obj = r @ r / (2 * n) + lam * np.abs(beta).sum()
                if obj < best_obj:
                    best_obj, best_beta = obj, beta
    return best_obj, best_beta


def wilson_by_root(k, n, z=1.96):
    """Wilson bounds as the roots of ``(p_hat - q)^2 = z^2 q (1 - q) / n`` in q."""
    ph = k / n
    a = 1 + z * z / n
    b = -(2 * ph + z * z / n)
    c = ph * ph
    disc = np.sqrt(b * b - 4 * a * c)
    return (-b - disc) / (2 * a), (-b + disc) / (2 * a)
