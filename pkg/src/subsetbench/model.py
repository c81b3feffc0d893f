"""Shared data model: datasets, supports, tuning records, selection results.

Conventions used throughout the package:

- Design matrices are float64 numpy arrays with columns standardized to
  mean 0 and squared norm n (population scaling, divisor n).
- Variable indices are 1-based in every public interface; supports are
  plain ``frozenset`` objects of 1-based column indices.
- Coefficient vectors are plain numpy arrays of length p.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConstantColumnError

STANDARDIZATION_TOL = 1e-10
SUPPORT_TOL = 1e-9


class Method(str, enum.Enum):
    BSS = "BSS"
    FSS = "FSS"
    LASSO = "LASSO"
    ENET = "ENET"

    def __str__(self) -> str:  # CSV-friendly
        return self.value


@dataclass(frozen=True)
class TuningRecord:
    """Tuning values for one fitted model.

    Exactly one of the two parameterizations is populated: a subset size
    ``k`` (best-subset / stepwise), or a penalty pair ``(alpha, lam)``
    (Lasso / elastic net).
    """

    subset_size: Optional[int] = None
    alpha: Optional[float] = None
    lam: Optional[float] = None

    def __post_init__(self):
        by_size = self.subset_size is not None
        by_penalty = self.alpha is not None and self.lam is not None
        if by_size == by_penalty:
            raise ValueError(
                "exactly one of subset_size or (alpha, lam) must be set"
            )
        if by_size and self.subset_size < 1:
            raise ValueError("subset_size must be >= 1")
        if by_penalty:
            if not (0.0 < self.alpha <= 1.0):
                raise ValueError("alpha must lie in (0, 1]")
            if self.lam <= 0.0:
                raise ValueError("lam must be positive")


@dataclass(frozen=True)
class Dataset:
    """A standardized regression problem with known generating support.

    Parameters
    ----------
    x : ndarray, shape (n, p)
        Design matrix; every column has mean 0 and mean square 1.
    y : ndarray, shape (n,)
        Response vector.
    true_support : frozenset of int
        1-based indices of the generating nonzero coefficients.
    sigma2 : float
        Noise variance used when the response was drawn.
    meta : object, optional
        Provenance (a scenario spec or a semi-synthetic tag).
    """

    x: np.ndarray
    y: np.ndarray
    true_support: frozenset
    sigma2: float
    meta: object = None

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ValueError("x must be (n, p) and y must be (n,)")
        n = x.shape[0]
        col_means = x.mean(axis=0)
        col_msq = (x * x).sum(axis=0) / n
        if np.any(np.abs(col_means) >= STANDARDIZATION_TOL):
            raise ValueError("columns of x are not centered")
        if np.any(np.abs(col_msq - 1.0) >= 1e-8):
            raise ValueError("columns of x are not scaled to mean square 1")
        support = frozenset(int(j) for j in self.true_support)
        if not all(1 <= j <= x.shape[1] for j in support):
            raise ValueError("true_support indices must lie in 1..p")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "true_support", support)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def s(self) -> int:
        return len(self.true_support)


@dataclass(frozen=True)
class SelectionResult:
    """One method's selected model on one dataset."""

    method: Method
    support: frozenset
    coefficients: np.ndarray
    tuning: TuningRecord
    certified: bool = True
    optimality_gap: float = 0.0
    runtime_ms: int = 0

    def __post_init__(self):
        if self.optimality_gap < 0:
            raise ValueError("optimality_gap must be non-negative")
        if self.runtime_ms < 0:
            raise ValueError("runtime_ms must be non-negative")
        expected = support_of(self.coefficients)
        if frozenset(self.support) != expected:
            raise ValueError("support does not match the nonzero pattern")
        if self.tuning.subset_size is not None:
            if len(self.support) > self.tuning.subset_size:
                raise ValueError("support larger than requested subset size")


def standardize_columns(x_raw: np.ndarray):
    """Center and scale columns to mean 0 and mean square 1.

    Scaling uses the population convention: column j is divided by
    sqrt(n^-1 * sum((x_ij - mean_j)^2)).

    Returns
    -------
    (x, centers, scales) : the standardized matrix and the per-column
    centers and scales that were removed.

    Raises
    ------
    ConstantColumnError
        If some column has zero variance (1-based column index).
    """
    x_raw = np.asarray(x_raw, dtype=np.float64)
    if x_raw.ndim != 2 or x_raw.shape[0] < 2:
        raise ValueError("need a 2-d matrix with at least 2 rows")
    n = x_raw.shape[0]
    centers = x_raw.mean(axis=0)
    centered = x_raw - centers
    scales = np.sqrt((centered * centered).sum(axis=0) / n)
    degenerate = np.flatnonzero(scales == 0.0)
    if degenerate.size:
        raise ConstantColumnError(int(degenerate[0]) + 1)
    return centered / scales, centers, scales


def support_of(beta: np.ndarray, tol: float = SUPPORT_TOL) -> frozenset:
    """1-based indices of entries with magnitude above ``tol``."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    beta = np.asarray(beta, dtype=np.float64)
    return frozenset(int(j) + 1 for j in np.flatnonzero(np.abs(beta) > tol))


def support_to_zero_based(support, p: int) -> np.ndarray:
    """Sorted 0-based index array for a 1-based support set."""
    idx = np.array(sorted(int(j) for j in support), dtype=np.intp)
    if idx.size and (idx[0] < 1 or idx[-1] > p):
        raise ValueError("support indices must lie in 1..p")
    return idx - 1
