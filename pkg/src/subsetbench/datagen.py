"""Synthetic scenario generation: covariance structures, sparse coefficient
placement, noise calibration from a target signal-to-noise ratio, and seeded
dataset sampling.

The simulation grid crosses three dimension regimes (n=1000/p=100,
n=100/p=1000, n=500/p=500) with nine correlation/position cells and a
10-value log-spaced signal-to-noise grid, giving 270 cells.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegenerateSignalError,
    FactorizationFailureError,
    InvalidBlockPartitionError,
)
from .model import Dataset, standardize_columns

# 10 log-spaced SNR values from 0.05 to 6, rounded to two decimals.
SNR_GRID = (0.05, 0.09, 0.14, 0.25, 0.42, 0.71, 1.22, 2.07, 3.52, 6.0)

DIMENSION_REGIMES = {
    "lowdim": (1000, 100),
    "highdim": (100, 1000),
    "middim": (500, 500),
}

CHOLESKY_JITTER = 1e-10


class Structure(str, enum.Enum):
    IDENTITY = "IDENTITY"
    TOEPLITZ = "TOEPLITZ"
    BLOCK = "BLOCK"

    def __str__(self) -> str:
        return self.value


class Placement(str, enum.Enum):
    CONSECUTIVE = "CONSECUTIVE"
    EQUISPACED = "EQUISPACED"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CovarianceSpec:
    """Covariance structure of the sampled predictors.

    rho is ignored for IDENTITY; block_size applies to BLOCK only and must
    divide p.
    """

    structure: Structure
    rho: float = 0.0
    block_size: int = 10

    def __post_init__(self):
        object.__setattr__(self, "structure", Structure(self.structure))
        if self.structure is not Structure.IDENTITY:
            if not (0.0 <= self.rho < 1.0):
                raise ValueError("rho must lie in [0, 1)")
        if self.structure is Structure.BLOCK and self.block_size < 1:
            raise ValueError("block_size must be positive")


@dataclass(frozen=True)
class BetaSpec:
    """Sparse coefficient layout: s nonzeros of a common value, either the
    first s positions or every (p/s)-th position starting at 1."""

    p: int
    s: int
    placement: Placement = Placement.CONSECUTIVE
    value: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "placement", Placement(self.placement))
        if not (1 <= self.s <= self.p):
            raise ValueError("need 1 <= s <= p")
        if self.placement is Placement.EQUISPACED and self.p % self.s != 0:
            raise ValueError("EQUISPACED requires s to divide p")


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation cell of the synthetic grid."""

    scenario_id: str
    n: int
    p: int
    covariance: CovarianceSpec
    beta: BetaSpec
    tau: float
    replications: int = 100

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if self.beta.p != self.p:
            raise ValueError("beta spec dimension must match p")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


def build_covariance(spec: CovarianceSpec, p: int) -> np.ndarray:
    """Build the p x p predictor covariance for a structure spec.

    IDENTITY gives I_p; TOEPLITZ gives rho^|u-v|; BLOCK gives constant rho
    within disjoint consecutive blocks and 0 between blocks.
    """
    if p < 1:
        raise ValueError("p must be positive")
    if spec.structure is Structure.IDENTITY:
        return np.eye(p)
    if spec.structure is Structure.TOEPLITZ:
        return sla.toeplitz(spec.rho ** np.arange(p))
    if p % spec.block_size != 0:
        raise InvalidBlockPartitionError(
            f"p={p} not divisible by block_size={spec.block_size}"
        )
    block = np.full((spec.block_size, spec.block_size), spec.rho)
    np.fill_diagonal(block, 1.0)
    return sla.block_diag(*([block] * (p // spec.block_size)))


def place_beta(spec: BetaSpec) -> np.ndarray:
    """Coefficient vector with the spec's placement pattern.

    EQUISPACED puts the nonzeros at 1-based positions 1, 1 + p/s,
    1 + 2p/s, ..., so with blocks of size p/s each block holds exactly one
    true predictor, at its first position.
    """
    beta = np.zeros(spec.p)
    if spec.placement is Placement.CONSECUTIVE:
        beta[: spec.s] = spec.value
    else:
        beta[:: spec.p // spec.s] = spec.value
    return beta


def noise_variance(beta: np.ndarray, sigma_matrix: np.ndarray, tau: float) -> float:
    """Noise variance b' S b / tau that realizes signal-to-noise ratio tau."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    signal = float(beta @ sigma_matrix @ beta)
    if signal <= 0:
        raise DegenerateSignalError(f"beta' Sigma beta = {signal} is not positive")
    return signal / tau


def _cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    jittered = sigma + CHOLESKY_JITTER * np.eye(sigma.shape[0])
    try:
        return np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailureError(
            "covariance is numerically indefinite"
        ) from exc


def child_seed(master_seed: int, scenario_id: str, replication: int) -> int:
    """Stable 64-bit seed for one (scenario, replication) cell.

    Hash-derived, so replications are reproducible independently of
    execution order or worker count.
    """
    key = f"{master_seed}|{scenario_id}|{replication}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def sample_dataset(spec: ScenarioSpec, seed: int) -> Dataset:
    """Draw one dataset for a scenario: X rows i.i.d. N(0, Sigma), columns
    standardized, y = X beta + eps with eps ~ N(0, sigma^2 I).

    sigma^2 is computed from the population covariance and the
    pre-standardization coefficients; deterministic given (spec, seed).
    """
    rng = np.random.default_rng(seed)
    sigma = build_covariance(spec.covariance, spec.p)
    beta = place_beta(spec.beta)
    sigma2 = noise_variance(beta, sigma, spec.tau)

    factor = _cholesky_factor(sigma)
    x_raw = rng.standard_normal((spec.n, spec.p)) @ factor.T
    x, _, _ = standardize_columns(x_raw)
    eps = rng.normal(0.0, np.sqrt(sigma2), size=spec.n)
    y = x @ beta + eps

    true_support = frozenset(int(j) + 1 for j in np.flatnonzero(beta))
    return Dataset(x=x, y=y, true_support=true_support, sigma2=sigma2, meta=spec)
