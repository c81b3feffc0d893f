"""Least-squares refits on supports, plus a Gram cache for repeated solves.

All subset solvers reduce to "solve min ||y - X_S b||^2 for many S on one
dataset"; precomputing X'X and X'y once makes each solve O(|S|^3) instead
of O(n |S|^2).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .model import Dataset, support_to_zero_based

RIDGE_FALLBACK = 1e-10


def _solve_normal_equations(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve gram @ b = rhs, falling back to a minimal ridge when the
    Cholesky factorization fails (rank-deficient support)."""
    try:
        cf = sla.cho_factor(gram, lower=True, check_finite=False)
        return sla.cho_solve(cf, rhs, check_finite=False)
    except sla.LinAlgError:
        pass
    ridged = gram + RIDGE_FALLBACK * np.eye(gram.shape[0])
    try:
        cf = sla.cho_factor(ridged, lower=True, check_finite=False)
        return sla.cho_solve(cf, rhs, check_finite=False)
    except sla.LinAlgError:
        return np.linalg.lstsq(ridged, rhs, rcond=None)[0]


class GramCache:
    """Precomputed X'X, X'y and y'y for one dataset.

    ``rss_on`` returns the least-squares residual sum of squares restricted
    to a 0-based index array; ``solve_on`` additionally returns the fitted
    coefficients on those indices. Index sets wider than n are solved as a
    min-norm problem on the columns directly, which is both faster and a
    tight relaxation value in that regime.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.x = x
        self.y = y
        self.gram = x.T @ x
        self.xty = x.T @ y
        self.yty = float(y @ y)
        self.n = x.shape[0]
        self.p = x.shape[1]

    def solve_on(self, idx: np.ndarray):
        if idx.size == 0:
            return np.empty(0), self.yty
        if idx.size > self.n:
            cols = self.x[:, idx]
            coef = np.linalg.lstsq(cols, self.y, rcond=None)[0]
            resid = self.y - cols @ coef
            return coef, float(resid @ resid)
        sub = self.gram[np.ix_(idx, idx)]
        rhs = self.xty[idx]
        coef = _solve_normal_equations(sub, rhs)
        rss = self.yty - 2.0 * (coef @ rhs) + coef @ sub @ coef
        return coef, max(rss, 0.0)

    def rss_on(self, idx: np.ndarray) -> float:
        return self.solve_on(idx)[1]


def least_squares_on_support(dataset: Dataset, support) -> tuple:
    """Fit y on the columns in ``support`` (1-based), zeros elsewhere.

    Returns
    -------
    (beta, rss) : full-length coefficient vector and the residual sum of
    squares ||y - X beta||^2. The empty support returns (0, ||y||^2).
    Rank-deficient supports are handled by a minimal ridge on the normal
    equations.
    """
    idx = support_to_zero_based(support, dataset.p)
    beta = np.zeros(dataset.p)
    if idx.size == 0:
        return beta, float(dataset.y @ dataset.y)
    xs = dataset.x[:, idx]
    coef = _solve_normal_equations(xs.T @ xs, xs.T @ dataset.y)
    beta[idx] = coef
    resid = dataset.y - xs @ coef
    return beta, float(resid @ resid)
