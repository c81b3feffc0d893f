"""Forward stepwise selection with nested least-squares refits.

At each step the candidate maximizing |x_j' (I - P_A) y| / ||(I - P_A) x_j||
enters the active set, where P_A projects onto the span of the columns
selected so far; the model is then refit by least squares on the active set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lstsq import least_squares_on_support
from .model import Dataset

DEGENERATE_NORM_TOL = 1e-8


@dataclass(frozen=True)
class FssStep:
    """One stepwise iteration: the entering column (1-based), the active
    set after entry, and the refit coefficients (zeros off the set)."""

    selected_index: int
    active_set: frozenset
    coefficients: np.ndarray
    rss: float


@dataclass(frozen=True)
class FssTrace:
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        previous = frozenset()
        for step in self.steps:
            if not previous < step.active_set:
                raise ValueError("active sets must be strictly nested")
            if step.active_set - previous != {step.selected_index}:
                raise ValueError("active set must grow by the selected index")
            previous = step.active_set

    def __len__(self) -> int:
        return len(self.steps)

    def support_at(self, k: int) -> frozenset:
        return self.steps[k - 1].active_set

    def coefficients_at(self, k: int) -> np.ndarray:
        return self.steps[k - 1].coefficients


def forward_stepwise(dataset: Dataset, k_max: int) -> FssTrace:
    """Run k_max greedy steps and return the nested model trace.

    Candidates whose residual norm after projecting out the active set
    falls below 1e-8 are excluded (collinear with the active set); if no
    candidate remains the trace ends early.
    """
    if not (1 <= k_max <= min(dataset.n - 1, dataset.p)):
        raise ValueError("need 1 <= k_max <= min(n - 1, p)")
    # Working copies with the active span progressively projected out.
    xw = np.array(dataset.x)
    yw = np.array(dataset.y)
    active: list[int] = []
    steps = []
    for _ in range(k_max):
        norms = np.linalg.norm(xw, axis=0)
        usable = norms >= DEGENERATE_NORM_TOL
        for j in active:
            usable[j - 1] = False
        if not usable.any():
            break
        criterion = np.zeros(dataset.p)
        criterion[usable] = np.abs(xw[:, usable].T @ yw) / norms[usable]
        j_new = int(np.argmax(criterion))
        active.append(j_new + 1)

        q = xw[:, j_new] / norms[j_new]
        yw -= q * (q @ yw)
        xw -= np.outer(q, q @ xw)

        beta, rss = least_squares_on_support(dataset, active)
        steps.append(
            FssStep(
                selected_index=j_new + 1,
                active_set=frozenset(active),
                coefficients=beta,
                rss=rss,
            )
        )
    return FssTrace(steps=tuple(steps))
