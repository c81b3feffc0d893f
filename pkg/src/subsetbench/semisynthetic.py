"""Semi-synthetic datasets: a real expression matrix supplies the design,
a sparse synthetic response is generated on correlation-selected true
predictors.

The true support follows the highest-correlation construction: the most
correlated column pair seeds the support, then the eight columns most
correlated (in absolute value) with the first seed complete it, s = 10.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .datagen import noise_variance
from .errors import InsufficientColumnsError, MissingValueError, ParseError
from .model import Dataset, standardize_columns

SEMISYN_TRUE_SIZE = 10


@dataclass(frozen=True)
class ExpressionMatrix:
    """Numeric expression values with row and column identifiers."""

    values: np.ndarray
    row_ids: tuple
    column_ids: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d matrix")
        if values.shape != (len(self.row_ids), len(self.column_ids)):
            raise ValueError("id lists must match the matrix shape")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "column_ids", tuple(self.column_ids))

    @property
    def n_total(self) -> int:
        return self.values.shape[0]

    @property
    def p_total(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SemiSyntheticSpec:
    """One semi-synthetic simulation cell."""

    scenario_id: str
    p_sub: int
    n_sub: int
    tau: float
    expression_path: str
    replications: int = 100

    def __post_init__(self):
        if self.p_sub < SEMISYN_TRUE_SIZE:
            raise ValueError(f"p_sub must be at least {SEMISYN_TRUE_SIZE}")
        if self.n_sub < 2:
            raise ValueError("n_sub must be at least 2")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


def load_expression_matrix(path) -> ExpressionMatrix:
    """Read a CSV expression matrix: header row of column ids (first cell
    is a corner label), then one row id plus numeric cells per line.

    Raises ParseError with the 1-based (line, column) location for
    malformed cells and MissingValueError for empty ones; no imputation.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise ParseError(1, 1, "empty file")
        column_ids = [c.strip() for c in header.rstrip("\n").split(",")][1:]
        if not column_ids:
            raise ParseError(1, 2, "no column ids in header")
        row_ids = []
        rows = []
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(column_ids) + 1:
                raise ParseError(
                    line_no, len(cells), f"expected {len(column_ids) + 1} cells"
                )
            row_ids.append(cells[0].strip())
            parsed = np.empty(len(column_ids))
            for col_no, cell in enumerate(cells[1:], start=2):
                text = cell.strip()
                if not text:
                    raise MissingValueError(
                        f"missing value at line {line_no}, column {col_no}"
                    )
                try:
                    parsed[col_no - 2] = float(text)
                except ValueError as exc:
                    raise ParseError(line_no, col_no, f"not numeric: {text!r}") from exc
            rows.append(parsed)
    if not rows:
        raise ParseError(2, 1, "no data rows")
    return ExpressionMatrix(
        values=np.vstack(rows), row_ids=tuple(row_ids), column_ids=tuple(column_ids)
    )


def _select_true_predictors(x_std: np.ndarray) -> list:
    """0-based indices of the 10 true predictors by the correlation rule."""
    n, p = x_std.shape
    corr = (x_std.T @ x_std) / n
    abs_corr = np.abs(corr)
    np.fill_diagonal(abs_corr, -1.0)
    flat = int(np.argmax(abs_corr))
    a, b = divmod(flat, p)
    first, second = (a, b) if a < b else (b, a)
    to_first = abs_corr[first].copy()
    to_first[[first, second]] = -1.0
    # Stable top-8: sort by descending |correlation|, index breaking ties.
    order = np.lexsort((np.arange(p), -to_first))
    rest = sorted(int(j) for j in order[: SEMISYN_TRUE_SIZE - 2])
    return sorted([first, second] + rest)


def build_semisynthetic(
    matrix: ExpressionMatrix,
    p_sub: int,
    n_sub: int,
    tau: float,
    seed: int,
    meta: Optional[object] = None,
) -> Dataset:
    """Subsample the expression matrix and synthesize a sparse response.

    Uniformly draws p_sub columns and n_sub rows without replacement,
    standardizes, picks the 10 true predictors by the correlation rule,
    sets their coefficients to 1, and draws y = X beta + eps with
    sigma^2 = beta' Sigma_hat beta / tau from the empirical covariance of
    the standardized subsample. Deterministic given (inputs, seed).
    """
    if p_sub < SEMISYN_TRUE_SIZE:
        raise InsufficientColumnsError(
            f"need at least {SEMISYN_TRUE_SIZE} columns, got {p_sub}"
        )
    if p_sub > matrix.p_total or n_sub > matrix.n_total:
        raise ValueError("subsample larger than the source matrix")
    rng = np.random.default_rng(seed)
    col_idx = np.sort(rng.choice(matrix.p_total, size=p_sub, replace=False))
    row_idx = np.sort(rng.choice(matrix.n_total, size=n_sub, replace=False))
    sub = matrix.values[np.ix_(row_idx, col_idx)]
    x, _, _ = standardize_columns(sub)

    true_idx = _select_true_predictors(x)
    beta = np.zeros(p_sub)
    beta[true_idx] = 1.0
    sigma_hat = (x.T @ x) / n_sub
    sigma2 = noise_variance(beta, sigma_hat, tau)
    y = x @ beta + rng.normal(0.0, np.sqrt(sigma2), size=n_sub)

    provenance = {
        "kind": "semisynthetic",
        "seed": seed,
        "rows": tuple(matrix.row_ids[i] for i in row_idx),
        "columns": tuple(matrix.column_ids[j] for j in col_idx),
    }
    if meta is not None:
        provenance["spec"] = meta
    return Dataset(
        x=x,
        y=y,
        true_support=frozenset(j + 1 for j in true_idx),
        sigma2=sigma2,
        meta=provenance,
    )


def mean_true_correlation(dataset: Dataset) -> float:
    """Mean absolute pairwise correlation across the true predictors."""
    idx = np.array(sorted(dataset.true_support), dtype=np.intp) - 1
    cols = dataset.x[:, idx]
    corr = (cols.T @ cols) / dataset.n
    upper = np.triu_indices(idx.size, k=1)
    return float(np.mean(np.abs(corr[upper])))
