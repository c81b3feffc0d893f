"""Best subset selection: hard-thresholding warm starts, an exact
branch-and-bound solver with optimality certification, and an exhaustive
enumeration oracle.

The solved problem is min ||y - X b||^2 subject to at most k nonzeros.
Branch-and-bound searches over nodes (forced-in set, forced-out set); the
node lower bound is the residual sum of squares of the unconstrained
least-squares fit on all non-excluded variables, which can only improve on
any cardinality-constrained fit inside the node. Depth-first search takes
the "in" branch first, branching on the free variable with the largest
relaxation coefficient, so good incumbents appear early; a node is pruned
when its bound reaches incumbent * (1 - 1e-9), which is also the
certification tolerance when the tree is exhausted.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InstanceTooLargeError
from .lstsq import GramCache, least_squares_on_support
from .model import Dataset, support_of, support_to_zero_based
from .stepwise import forward_stepwise

PRUNE_REL_TOL = 1e-9
TIE_REL_TOL = 1e-12
IHT_MAX_ITER = 500
IHT_CHANGE_TOL = 1e-8
EXHAUSTIVE_GUARD = 10**6
DEFAULT_RESTARTS = 50

# Work-unit model for reproducible budgets: a node's charge approximates
# the flop count of its relaxation solve, and budgets are expressed as
# ms * WORK_UNITS_PER_MS. Unlike wall-clock deadlines this makes the
# explored tree, and hence the incumbent, machine-independent. The rate
# constant is a fixed calibration (~1 ms of solver time on a commodity
# core), not a measured quantity.
WORK_UNITS_PER_MS = 1.5e6
NODE_OVERHEAD_UNITS = 1.0e5


def _node_work(m: int, n: int) -> float:
    if m <= n:
        return m**3 / 3.0 + NODE_OVERHEAD_UNITS
    return 4.0 * n * n * m + NODE_OVERHEAD_UNITS


def work_budget_from_ms(time_budget_ms: int) -> float:
    """Deterministic work budget equivalent to a nominal ms budget."""
    return max(float(time_budget_ms), 1.0) * WORK_UNITS_PER_MS


@dataclass(frozen=True)
class BssSolution:
    """Incumbent of one subset-size solve, with certification metadata."""

    k: int
    support: frozenset
    coefficients: np.ndarray
    rss: float
    certified: bool
    gap: float
    nodes_explored: int
    elapsed_ms: int


def _hard_threshold_indices(v: np.ndarray, k: int) -> np.ndarray:
    """0-based indices of the k largest-magnitude entries, stable in index
    order on magnitude ties."""
    order = np.lexsort((np.arange(v.shape[0]), -np.abs(v)))
    return np.sort(order[:k])


def _iht_descend(x, y, k, beta0, inv_lipschitz):
    """Projected gradient (iterative hard thresholding) from one start.

    Steps beta <- H_k(beta - X'(X beta - y) / smax^2) until the retained
    support stops changing and the iterate is stationary, then returns the
    final support (0-based indices).
    """
    beta = np.zeros(x.shape[1])
    idx = _hard_threshold_indices(beta0, k)
    beta[idx] = beta0[idx]
    support = idx
    for _ in range(IHT_MAX_ITER):
        grad_step = beta - inv_lipschitz * (x.T @ (x @ beta - y))
        idx = _hard_threshold_indices(grad_step, k)
        new_beta = np.zeros_like(beta)
        new_beta[idx] = grad_step[idx]
        moved = float(np.max(np.abs(new_beta - beta))) if beta.size else 0.0
        same_support = np.array_equal(idx, support)
        beta = new_beta
        support = idx
        if same_support and moved < IHT_CHANGE_TOL * (1.0 + np.max(np.abs(beta))):
            break
    return support


def bss_warm_start(
    dataset: Dataset,
    k: int,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    fss_coefficients: Optional[np.ndarray] = None,
) -> frozenset:
    """Best support found by hard-thresholding descent over many starts.

    Runs ``restarts`` random initializations plus one initialized from the
    forward-stepwise solution at size k (computed here unless supplied),
    polishes every final support by least squares, and returns the support
    with the smallest polished RSS (1-based indices).
    """
    if not (1 <= k <= min(dataset.n, dataset.p)):
        raise ValueError("need 1 <= k <= min(n, p)")
    x, y = dataset.x, dataset.y
    smax = float(np.linalg.svd(x, compute_uv=False)[0])
    inv_lipschitz = 1.0 / (smax * smax)
    gc = GramCache(x, y)

    if fss_coefficients is None:
        trace = forward_stepwise(dataset, min(k, dataset.n - 1, dataset.p))
        fss_coefficients = trace.coefficients_at(len(trace))
    starts = [np.asarray(fss_coefficients, dtype=np.float64)]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(rng.standard_normal(dataset.p))

    best_rss = math.inf
    best_support: Optional[tuple] = None
    for beta0 in starts:
        idx = _iht_descend(x, y, k, beta0, inv_lipschitz)
        coef, rss = gc.solve_on(idx)
        candidate = tuple(int(j) + 1 for j in idx)
        if rss < best_rss * (1.0 - TIE_REL_TOL) or best_support is None:
            best_rss, best_support = rss, candidate
        elif rss <= best_rss * (1.0 + TIE_REL_TOL) and candidate < best_support:
            best_support = candidate
    beta = np.zeros(dataset.p)
    idx = np.array(best_support, dtype=np.intp) - 1
    beta[idx], _ = gc.solve_on(idx)
    return support_of(beta)


class _Incumbent:
    """Best feasible solution so far, with lexicographic tie-breaking."""

    def __init__(self):
        self.rss = math.inf
        self.support: Optional[tuple] = None
        self.coef: Optional[np.ndarray] = None

    def offer(self, rss: float, idx: np.ndarray, coef_on_idx: np.ndarray):
        candidate = tuple(int(j) for j in idx)
        if self.support is None or rss < self.rss * (1.0 - TIE_REL_TOL):
            self.rss, self.support, self.coef = rss, candidate, coef_on_idx
        elif rss <= self.rss * (1.0 + TIE_REL_TOL) and candidate < self.support:
            self.support, self.coef = candidate, coef_on_idx


def bss_branch_and_bound(
    dataset: Dataset,
    k: int,
    time_budget_ms: int,
    warm=None,
    work_budget: Optional[float] = None,
) -> BssSolution:
    """Exact subset search under a budget.

    ``warm`` (a 1-based support) seeds the incumbent; if omitted, a default
    warm start is computed first (not charged against the budget). The
    solver stops when the tree is exhausted (certified = True) or when the
    budget runs out; in that case the relative gap between the incumbent
    and the best remaining node bound is reported and certified = False.
    The budget is the wall clock unless ``work_budget`` is given, in which
    case the deterministic work-unit model governs instead.
    """
    if not (1 <= k <= min(dataset.n, dataset.p)):
        raise ValueError("need 1 <= k <= min(n, p)")
    if time_budget_ms <= 0:
        raise ValueError("time_budget_ms must be positive")
    t0 = time.perf_counter()
    deadline = math.inf if work_budget is not None else t0 + time_budget_ms / 1000.0
    if warm is None:
        warm = bss_warm_start(dataset, k)

    p = dataset.p
    n = dataset.n
    gc = GramCache(dataset.x, dataset.y)
    incumbent = _Incumbent()
    warm_idx = support_to_zero_based(warm, p)
    coef, rss = gc.solve_on(warm_idx)
    incumbent.offer(rss, warm_idx + 1, coef)

    # Stack entries: (forced_in tuple of 0-based, excluded mask, stored
    # bound, keep index array or None, relaxation coefficients or None).
    # "in" children inherit the parent relaxation unchanged; "out" children
    # recompute it lazily when popped.
    stack = [((), np.zeros(p, dtype=bool), 0.0, None, None)]
    nodes = 0
    work = 0.0
    certified = False
    timed_out = False

    while stack:
        if time.perf_counter() >= deadline or (
            work_budget is not None and work >= work_budget
        ):
            timed_out = True
            break
        s_in, excluded, bound, keep, coef_keep = stack.pop()
        threshold = incumbent.rss * (1.0 - PRUNE_REL_TOL)
        if bound >= threshold:
            continue
        nodes += 1

        if keep is None:
            keep = np.flatnonzero(~excluded)
            work += _node_work(keep.shape[0], n)
            coef_keep, relax_rss = gc.solve_on(keep)
            bound = max(relax_rss, 0.0)
            if bound >= threshold:
                continue
            fresh_relaxation = True
        else:
            work += NODE_OVERHEAD_UNITS
            fresh_relaxation = False

        free_count = keep.shape[0] - len(s_in)

        if len(s_in) == k or free_count == 0:
            idx = np.array(sorted(s_in), dtype=np.intp)
            c, r = gc.solve_on(idx)
            incumbent.offer(r, idx + 1, c)
            continue
        if len(s_in) + free_count <= k:
            # The relaxation itself is feasible: optimal for this subtree.
            incumbent.offer(bound, keep + 1, coef_keep)
            continue

        in_arr = np.fromiter(s_in, dtype=np.intp, count=len(s_in))
        free_pos = np.flatnonzero(~np.isin(keep, in_arr))
        abs_free = np.abs(coef_keep[free_pos])

        if fresh_relaxation:
            # Feasible rounding of the relaxation: forced-in variables plus
            # the largest free coefficients up to size k.
            top = free_pos[_hard_threshold_indices(coef_keep[free_pos], k - len(s_in))]
            idx = np.sort(np.concatenate((np.array(sorted(s_in), dtype=np.intp),
                                          keep[top])))
            c, r = gc.solve_on(idx)
            incumbent.offer(r, idx + 1, c)
            threshold = incumbent.rss * (1.0 - PRUNE_REL_TOL)
            if bound >= threshold:
                continue

        branch_pos = free_pos[int(np.argmax(abs_free))]
        j_branch = int(keep[branch_pos])

        excluded_out = excluded.copy()
        excluded_out[j_branch] = True
        stack.append((s_in, excluded_out, bound, None, None))
        stack.append((s_in + (j_branch,), excluded, bound, keep, coef_keep))

    if not timed_out and not stack:
        certified = True
        gap = 0.0
    else:
        best_remaining = min((entry[2] for entry in stack), default=incumbent.rss)
        if incumbent.rss > 0:
            gap = max((incumbent.rss - max(best_remaining, 0.0)) / incumbent.rss, 0.0)
        else:
            gap = 0.0
            certified = True

    beta = np.zeros(p)
    idx = np.array(incumbent.support, dtype=np.intp) - 1
    beta[idx] = incumbent.coef
    elapsed_ms = int((time.perf_counter() - t0) * 1000)
    return BssSolution(
        k=k,
        support=support_of(beta),
        coefficients=beta,
        rss=float(incumbent.rss),
        certified=certified,
        gap=float(gap),
        nodes_explored=nodes,
        elapsed_ms=elapsed_ms,
    )


def bss_exhaustive(dataset: Dataset, k: int) -> BssSolution:
    """Global minimizer by enumerating every support of size min(k, p).

    Larger supports can only lower the RSS, so size-k enumeration covers
    the at-most-k constraint; ties keep the lexicographically smallest
    support. Guarded to C(p, k) <= 1e6 subsets.
    """
    if k < 1 or k > dataset.p:
        raise ValueError("need 1 <= k <= p")
    t0 = time.perf_counter()
    k_eff = min(k, dataset.p)
    n_subsets = math.comb(dataset.p, k_eff)
    if n_subsets > EXHAUSTIVE_GUARD:
        raise InstanceTooLargeError(
            f"C({dataset.p}, {k_eff}) = {n_subsets} exceeds {EXHAUSTIVE_GUARD}"
        )
    gc = GramCache(dataset.x, dataset.y)
    best_rss = math.inf
    best_idx: Optional[tuple] = None
    for combo in itertools.combinations(range(dataset.p), k_eff):
        idx = np.array(combo, dtype=np.intp)
        rss = gc.rss_on(idx)
        if best_idx is None or rss < best_rss * (1.0 - TIE_REL_TOL):
            best_rss, best_idx = rss, combo
    support = frozenset(j + 1 for j in best_idx)
    beta, rss = least_squares_on_support(dataset, support)
    elapsed_ms = int((time.perf_counter() - t0) * 1000)
    return BssSolution(
        k=k,
        support=support_of(beta),
        coefficients=beta,
        rss=float(rss),
        certified=True,
        gap=0.0,
        nodes_explored=n_subsets,
        elapsed_ms=elapsed_ms,
    )
