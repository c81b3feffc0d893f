"""Experiment harness: runs seeded replications of every method over a
scenario grid, streams raw records, and writes deterministic CSV output.

Output layout under the configured directory:

- ``raw.csv``: one row per evaluated tuning point plus best-possible rows,
  in a fixed sort order (byte-identical across runs and worker counts for
  a fixed master seed when deterministic budgets are on).
- ``summary.csv``: per-(scenario, method, alpha) quantiles of the
  best-possible scores.
- ``manifest.json``: completed (scenario, replication) cells.

Record statuses: ``ok`` for fixed-subset-size rows (``noconv`` if the
chosen path point did not converge), ``best_f1`` / ``best_f2`` /
``best_mcc`` for per-method best-possible rows (per alpha for the elastic
net, with additional ``*_joint`` rows maximized over the whole alpha
grid), and ``error:<Type>`` when a solver failed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bss import bss_branch_and_bound, bss_warm_start, work_budget_from_ms
from .config import ExperimentConfig, enumerate_grid
from .datagen import child_seed, sample_dataset
from .enet import RegularizationPath, enet_path
from .metrics import Metric, best_possible, confusion, score, tune_to_subset_size
from .model import Dataset, Method, SelectionResult, TuningRecord, support_of
from .semisynthetic import (
    SemiSyntheticSpec,
    build_semisynthetic,
    load_expression_matrix,
)
from .stepwise import forward_stepwise

RAW_COLUMNS = (
    "scenario_id", "replication", "method", "alpha", "lambda", "k",
    "realized_support_size", "tp", "fp", "fn", "tn", "precision", "recall",
    "f1", "f2", "mcc", "certified", "gap", "runtime_ms", "status",
)

CERT_COLUMNS = (
    "scenario_id", "replication", "time_limit_ms", "k",
    "realized_support_size", "tp", "fp", "fn", "tn", "precision", "recall",
    "f1", "f2", "mcc", "certified", "gap", "runtime_ms", "warm_ms",
    "nodes_explored", "dataset_hash",
)

BEST_STATUSES = {
    Metric.F1: "best_f1",
    Metric.F2: "best_f2",
    Metric.MCC: "best_mcc",
}


@dataclass(frozen=True)
class ResultRecord:
    scenario_id: str
    replication: int
    method: str
    alpha: Optional[float]
    lam: Optional[float]
    k: Optional[int]
    realized_support_size: int
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    f2: float
    mcc: float
    certified: bool
    gap: float
    runtime_ms: int
    status: str

    def sort_key(self):
        return (
            self.scenario_id,
            self.replication,
            self.method,
            self.status,
            -1.0 if self.alpha is None else self.alpha,
            -1 if self.k is None else self.k,
            -1.0 if self.lam is None else -self.lam,
        )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def record_to_row(record: ResultRecord) -> list:
    return [
        record.scenario_id, record.replication, record.method,
        _fmt(record.alpha), _fmt(record.lam), _fmt(record.k),
        record.realized_support_size, record.tp, record.fp, record.fn,
        record.tn, _fmt(record.precision), _fmt(record.recall),
        _fmt(record.f1), _fmt(record.f2), _fmt(record.mcc),
        _fmt(record.certified), _fmt(record.gap), record.runtime_ms,
        record.status,
    ]


def _make_record(
    scenario_id: str,
    rep: int,
    method: Method,
    support,
    truth,
    p: int,
    *,
    alpha: Optional[float] = None,
    lam: Optional[float] = None,
    k: Optional[int] = None,
    certified: bool = True,
    gap: float = 0.0,
    runtime_ms: int = 0,
    status: str = "ok",
    counts=None,
) -> ResultRecord:
    if counts is None:
        counts = confusion(support, truth, p)
    return ResultRecord(
        scenario_id=scenario_id,
        replication=rep,
        method=method.value,
        alpha=alpha,
        lam=lam,
        k=k,
        realized_support_size=counts.tp + counts.fp,
        tp=counts.tp,
        fp=counts.fp,
        fn=counts.fn,
        tn=counts.tn,
        precision=score(counts, Metric.PRECISION).value,
        recall=score(counts, Metric.RECALL).value,
        f1=score(counts, Metric.F1).value,
        f2=score(counts, Metric.F2).value,
        mcc=score(counts, Metric.MCC).value,
        certified=certified,
        gap=gap,
        runtime_ms=runtime_ms,
        status=status,
    )


_MATRIX_CACHE: dict = {}


def _cached_matrix(path: str):
    if path not in _MATRIX_CACHE:
        _MATRIX_CACHE[path] = load_expression_matrix(path)
    return _MATRIX_CACHE[path]


def build_dataset_for(spec, master_seed: int, rep: int) -> Dataset:
    """Construct the dataset of one (scenario, replication) cell."""
    seed = child_seed(master_seed, spec.scenario_id, rep)
    if isinstance(spec, SemiSyntheticSpec):
        matrix = _cached_matrix(spec.expression_path)
        return build_semisynthetic(
            matrix, spec.p_sub, spec.n_sub, spec.tau, seed, meta=spec
        )
    return sample_dataset(spec, seed)


def _path_point_status(path: RegularizationPath, lam: float) -> str:
    idx = int(np.argmin(np.abs(path.lambdas - lam)))
    return "ok" if path.converged[idx] else "noconv"


def _best_rows(scenario_id, rep, method, candidates, truth, p, *,
               alpha=None, joint=False, bss_solutions=None):
    """Best-possible rows (one per metric) for one candidate pool."""
    rows = []
    for metric, base_status in BEST_STATUSES.items():
        sc, tuning, counts = best_possible(candidates, truth, p, metric)
        status = base_status + ("_joint" if joint else "")
        certified, gap = True, 0.0
        if bss_solutions is not None and tuning.subset_size is not None:
            sol = bss_solutions[tuning.subset_size]
            certified, gap = sol.certified, sol.gap
        rows.append(
            _make_record(
                scenario_id, rep, method, None, truth, p,
                alpha=tuning.alpha if tuning.alpha is not None else alpha,
                lam=tuning.lam,
                k=tuning.subset_size,
                certified=certified,
                gap=gap,
                status=status,
                counts=counts,
            )
        )
    return rows


def run_replication(spec, rep: int, config: ExperimentConfig) -> list:
    """All records of one (scenario, replication) cell.

    Deterministic given (spec, rep, master seed) when deterministic
    budgets are enabled; solver failures are captured in the status field
    rather than raised.
    """
    dataset = build_dataset_for(spec, config.master_seed, rep)
    truth, p, n = dataset.true_support, dataset.p, dataset.n
    sid = spec.scenario_id
    records: list = []
    wall = not config.deterministic

    fss_trace = None
    need_fss = Method.FSS in config.methods or Method.BSS in config.methods
    if need_fss:
        fss_trace = forward_stepwise(dataset, min(config.k_max, n - 1, p))

    if Method.FSS in config.methods:
        fss_results = []
        for k in config.k_range:
            step = fss_trace.steps[min(k, len(fss_trace)) - 1]
            support = support_of(step.coefficients)
            records.append(
                _make_record(sid, rep, Method.FSS, support, truth, p, k=k)
            )
            fss_results.append(
                SelectionResult(
                    method=Method.FSS,
                    support=support,
                    coefficients=step.coefficients,
                    tuning=TuningRecord(subset_size=k),
                )
            )
        records.extend(_best_rows(sid, rep, Method.FSS, fss_results, truth, p))

    if Method.BSS in config.methods:
        budget_ms = config.effective_budget_ms
        work_budget = None if wall else work_budget_from_ms(budget_ms)
        bss_results = []
        solutions = {}
        for k in config.k_range:
            if k > min(n, p):
                break
            try:
                t_start = time.perf_counter()
                warm = bss_warm_start(
                    dataset, k,
                    restarts=config.bss_restarts,
                    fss_coefficients=fss_trace.coefficients_at(
                        min(k, len(fss_trace))
                    ),
                )
                warm_ms = int((time.perf_counter() - t_start) * 1000)
                remaining = max(budget_ms - warm_ms, 1) if wall else budget_ms
                sol = bss_branch_and_bound(
                    dataset, k, remaining, warm=warm, work_budget=work_budget
                )
                runtime = warm_ms + sol.elapsed_ms if wall else 0
                records.append(
                    _make_record(
                        sid, rep, Method.BSS, sol.support, truth, p, k=k,
                        certified=sol.certified, gap=sol.gap,
                        runtime_ms=runtime,
                    )
                )
                solutions[k] = sol
                bss_results.append(
                    SelectionResult(
                        method=Method.BSS,
                        support=sol.support,
                        coefficients=sol.coefficients,
                        tuning=TuningRecord(subset_size=k),
                        certified=sol.certified,
                        optimality_gap=sol.gap,
                    )
                )
            except Exception as exc:  # captured per record, never fatal
                records.append(
                    _make_record(
                        sid, rep, Method.BSS, frozenset(), truth, p, k=k,
                        certified=False, status=f"error:{type(exc).__name__}",
                    )
                )
        if bss_results:
            records.extend(
                _best_rows(sid, rep, Method.BSS, bss_results, truth, p,
                           bss_solutions=solutions)
            )

    g = config.lambda_grid_size
    if Method.LASSO in config.methods:
        records.extend(
            _path_records(sid, rep, dataset, Method.LASSO, [1.0], g, config)
        )
    if Method.ENET in config.methods:
        records.extend(
            _path_records(
                sid, rep, dataset, Method.ENET, config.enet_alphas, g, config
            )
        )
    return records


def _path_records(sid, rep, dataset, method, alphas, g, config):
    truth, p = dataset.true_support, dataset.p
    records = []
    paths = []
    for alpha in alphas:
        try:
            path = enet_path(dataset, alpha, g)
        except Exception as exc:
            records.append(
                _make_record(
                    sid, rep, method, frozenset(), truth, p, alpha=alpha,
                    certified=False, status=f"error:{type(exc).__name__}",
                )
            )
            continue
        paths.append(path)
        for k in config.k_range:
            chosen = tune_to_subset_size(path, k)
            records.append(
                _make_record(
                    sid, rep, method, chosen.support, truth, p,
                    alpha=alpha, lam=chosen.tuning.lam, k=k,
                    status=_path_point_status(path, chosen.tuning.lam),
                )
            )
        records.extend(
            _best_rows(sid, rep, method, [path], truth, p, alpha=alpha)
        )
    if method is Method.ENET and len(paths) > 1:
        records.extend(
            _best_rows(sid, rep, method, paths, truth, p, joint=True)
        )
    return records


def _run_cell(args):
    spec, rep, config = args
    return spec.scenario_id, rep, run_replication(spec, rep, config)


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the configured grid and write raw.csv / summary.csv / manifest.

    Cells are dispatched to a process pool when workers > 1; the final raw
    file is written in one fixed sort order so output bytes do not depend
    on the worker count.
    """
    scenarios = enumerate_grid(config.preset, config)
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    partial_path = os.path.join(out_dir, "raw_partial.csv")
    tasks = [
        (spec, rep, config)
        for spec in scenarios
        for rep in range(spec.replications)
    ]
    all_records: list = []
    completed: list = []
    try:
        with open(partial_path, "w", newline="") as partial:
            writer = csv.writer(partial)
            writer.writerow(RAW_COLUMNS)
            if config.workers == 1:
                for task in tasks:
                    sid, rep, recs = _run_cell(task)
                    _stream_cell(writer, partial, recs)
                    all_records.extend(recs)
                    completed.append((sid, rep))
            else:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    futures = [pool.submit(_run_cell, task) for task in tasks]
                    for fut in as_completed(futures):
                        sid, rep, recs = fut.result()
                        _stream_cell(writer, partial, recs)
                        all_records.extend(recs)
                        completed.append((sid, rep))
    finally:
        expected = [
            (spec.scenario_id, rep)
            for spec in scenarios
            for rep in range(spec.replications)
        ]
        _write_manifest(out_dir, expected=expected, completed=completed)

    raw_path = os.path.join(out_dir, "raw.csv")
    write_raw_csv(raw_path, all_records)
    summary_path = os.path.join(out_dir, "summary.csv")
    summarize(raw_path, summary_path)
    os.remove(partial_path)
    return {
        "raw": raw_path,
        "summary": summary_path,
        "records": len(all_records),
        "cells": len(completed),
    }


def _stream_cell(writer, handle, records):
    for rec in records:
        writer.writerow(record_to_row(rec))
    handle.flush()


def _write_manifest(out_dir, expected, completed):
    done = {f"{sid}:{rep}" for sid, rep in completed}
    missing = [cell for cell in (f"{sid}:{rep}" for sid, rep in expected)
               if cell not in done]
    manifest = {
        "complete": not missing,
        "completed_cells": sorted(done),
        "missing_cells": sorted(missing),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def write_raw_csv(path, records: Sequence[ResultRecord]):
    ordered = sorted(records, key=lambda r: r.sort_key())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAW_COLUMNS)
        for rec in ordered:
            writer.writerow(record_to_row(rec))


def read_raw_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _quantiles(values):
    arr = np.asarray(values, dtype=np.float64)
    return {
        "n": arr.size,
        "mean": float(arr.mean()),
        "min": float(arr.min()),
        "q25": float(np.percentile(arr, 25)),
        "median": float(np.percentile(arr, 50)),
        "q75": float(np.percentile(arr, 75)),
        "max": float(arr.max()),
    }


def summarize(raw_path, out_path) -> list:
    """Per-(scenario, method, alpha, metric) quantiles of best-possible
    scores, with certification stats for the subset-search method."""
    rows = read_raw_csv(raw_path)
    metric_col = {"best_f1": "f1", "best_f2": "f2", "best_mcc": "mcc"}
    groups: dict = {}
    for row in rows:
        status = row["status"]
        base = status.removesuffix("_joint")
        if base not in metric_col:
            continue
        alpha = "" if status.endswith("_joint") else row["alpha"]
        key = (row["scenario_id"], row["method"], alpha, status)
        groups.setdefault(key, []).append(float(row[metric_col[base]]))
    cert: dict = {}
    for row in rows:
        if row["method"] == "BSS" and row["status"] == "ok":
            key = (row["scenario_id"], row["method"])
            cert.setdefault(key, []).append(
                (row["certified"] == "true", float(row["gap"]))
            )
    out_rows = []
    for key in sorted(groups):
        sid, method, alpha, status = key
        stats = _quantiles(groups[key])
        cert_info = cert.get((sid, method))
        out_rows.append([
            sid, method, alpha, status, stats["n"],
            _fmt(stats["mean"]), _fmt(stats["min"]), _fmt(stats["q25"]),
            _fmt(stats["median"]), _fmt(stats["q75"]), _fmt(stats["max"]),
            _fmt(sum(c for c, _ in cert_info) / len(cert_info)) if cert_info else "",
            _fmt(sum(g for _, g in cert_info) / len(cert_info)) if cert_info else "",
        ])
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "scenario_id", "method", "alpha", "status", "n", "mean", "min",
            "q25", "median", "q75", "max", "certified_fraction", "mean_gap",
        ])
        writer.writerows(out_rows)
    return out_rows


def dataset_digest(dataset: Dataset) -> str:
    h = hashlib.sha256()
    h.update(dataset.x.tobytes())
    h.update(dataset.y.tobytes())
    return h.hexdigest()[:12]


def certification_study(
    spec,
    time_limits_ms: Sequence[int],
    reps: int,
    config: ExperimentConfig,
    out_path=None,
) -> list:
    """Subset-search sensitivity to the per-k time limit.

    The same datasets (identical child seeds) are solved once per time
    limit and k; the warm start is computed once per (replication, k) and
    its wall time is charged against every limit's budget. Always runs on
    the wall clock, since time limits are the object of study.
    """
    limits = sorted(int(t) for t in time_limits_ms)
    records = []
    for rep in range(reps):
        dataset = build_dataset_for(spec, config.master_seed, rep)
        digest = dataset_digest(dataset)
        truth, p, n = dataset.true_support, dataset.p, dataset.n
        fss_trace = forward_stepwise(dataset, min(config.k_max, n - 1, p))
        for k in config.k_range:
            if k > min(n, p):
                break
            t0 = time.perf_counter()
            warm = bss_warm_start(
                dataset, k,
                restarts=config.bss_restarts,
                fss_coefficients=fss_trace.coefficients_at(min(k, len(fss_trace))),
            )
            warm_ms = int((time.perf_counter() - t0) * 1000)
            for limit in limits:
                remaining = max(limit - warm_ms, 1)
                sol = bss_branch_and_bound(dataset, k, remaining, warm=warm)
                counts = confusion(sol.support, truth, p)
                records.append({
                    "scenario_id": spec.scenario_id,
                    "replication": rep,
                    "time_limit_ms": limit,
                    "k": k,
                    "realized_support_size": counts.tp + counts.fp,
                    "tp": counts.tp,
                    "fp": counts.fp,
                    "fn": counts.fn,
                    "tn": counts.tn,
                    "precision": score(counts, Metric.PRECISION).value,
                    "recall": score(counts, Metric.RECALL).value,
                    "f1": score(counts, Metric.F1).value,
                    "f2": score(counts, Metric.F2).value,
                    "mcc": score(counts, Metric.MCC).value,
                    "certified": sol.certified,
                    "gap": sol.gap,
                    "runtime_ms": warm_ms + sol.elapsed_ms,
                    "warm_ms": warm_ms,
                    "nodes_explored": sol.nodes_explored,
                    "dataset_hash": digest,
                })
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CERT_COLUMNS)
            for rec in records:
                writer.writerow([_fmt(rec[c]) if isinstance(rec[c], (float, bool))
                                 else rec[c] for c in CERT_COLUMNS])
    return records


FIGURES = ("best-boxplot", "per-k", "certification")


def emit_plot_data(raw_path, figure: str, out_dir) -> list:
    """Write long-format plot data for one figure family.

    ``best-boxplot`` and ``per-k`` read a raw results CSV; ``certification``
    reads a certification-study CSV and writes the four panels (best F1 by
    limit, by certification status, and per-k F1 / true-positive counts).
    Returns the list of files written. When a manifest with missing cells
    sits next to the raw file, a ``*_missing.csv`` sidecar is written.
    """
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {FIGURES}")
    os.makedirs(out_dir, exist_ok=True)
    rows = read_raw_csv(raw_path)
    written = []

    def write(name, header, data_rows):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(data_rows)
        written.append(path)

    if figure == "best-boxplot":
        groups: dict = {}
        metric_col = {"best_f1": "f1", "best_f2": "f2", "best_mcc": "mcc"}
        for row in rows:
            base = row["status"].removesuffix("_joint")
            if base not in metric_col:
                continue
            key = (row["scenario_id"], row["method"], row["alpha"],
                   row["status"])
            groups.setdefault(key, []).append(float(row[metric_col[base]]))
        data = []
        for key in sorted(groups):
            stats = _quantiles(groups[key])
            data.append(list(key) + [stats["n"]] + [
                _fmt(stats[f]) for f in ("mean", "min", "q25", "median",
                                         "q75", "max")
            ])
        write("best_boxplot.csv",
              ["scenario_id", "method", "alpha", "status", "n", "mean",
               "min", "q25", "median", "q75", "max"], data)
    elif figure == "per-k":
        groups = {}
        for row in rows:
            if row["status"] not in ("ok", "noconv") or not row["k"]:
                continue
            key = (row["scenario_id"], row["method"], row["alpha"],
                   int(row["k"]))
            groups.setdefault(key, []).append(row)
        data = []
        for key in sorted(groups, key=lambda t: (t[0], t[1], t[2], t[3])):
            cell = groups[key]
            f1s = [float(r["f1"]) for r in cell]
            tps = [float(r["tp"]) for r in cell]
            recalls = [float(r["recall"]) for r in cell]
            precisions = [float(r["precision"]) for r in cell]
            certified = [r["certified"] == "true" for r in cell]
            data.append(list(key) + [
                len(cell),
                _fmt(float(np.mean(f1s))), _fmt(float(np.median(f1s))),
                _fmt(float(np.mean(precisions))),
                _fmt(float(np.mean(recalls))),
                _fmt(float(np.mean(tps))), _fmt(float(np.median(tps))),
                _fmt(sum(certified) / len(certified)),
            ])
        write("per_k_curves.csv",
              ["scenario_id", "method", "alpha", "k", "n", "f1_mean",
               "f1_median", "precision_mean", "recall_mean", "tp_mean",
               "tp_median", "certified_fraction"], data)
    else:
        by_rep_limit: dict = {}
        for row in rows:
            key = (row["scenario_id"], int(row["replication"]),
                   int(row["time_limit_ms"]))
            by_rep_limit.setdefault(key, []).append(row)
        panel_a = {}
        for (sid, rep, limit), cell in sorted(by_rep_limit.items()):
            best = max(float(r["f1"]) for r in cell)
            panel_a.setdefault((sid, limit), []).append(best)
        data = []
        for key in sorted(panel_a):
            stats = _quantiles(panel_a[key])
            data.append(list(key) + [stats["n"]] + [
                _fmt(stats[f]) for f in ("mean", "min", "q25", "median",
                                         "q75", "max")])
        write("certification_panel_a.csv",
              ["scenario_id", "time_limit_ms", "n", "mean", "min", "q25",
               "median", "q75", "max"], data)

        panels = {
            "b": (lambda r: (r["scenario_id"], int(r["time_limit_ms"]),
                             r["certified"]), "f1",
                  ["scenario_id", "time_limit_ms", "certified"]),
            "c": (lambda r: (r["scenario_id"], int(r["time_limit_ms"]),
                             int(r["k"])), "f1",
                  ["scenario_id", "time_limit_ms", "k"]),
            "d": (lambda r: (r["scenario_id"], int(r["time_limit_ms"]),
                             int(r["k"])), "tp",
                  ["scenario_id", "time_limit_ms", "k"]),
        }
        for name, (keyfn, col, header) in panels.items():
            groups = {}
            for row in rows:
                groups.setdefault(keyfn(row), []).append(float(row[col]))
            data = []
            for key in sorted(groups):
                stats = _quantiles(groups[key])
                data.append(list(key) + [stats["n"]] + [
                    _fmt(stats[f]) for f in ("mean", "min", "q25", "median",
                                             "q75", "max")])
            write(f"certification_panel_{name}.csv",
                  header + ["n", "mean", "min", "q25", "median", "q75",
                            "max"], data)

    manifest_path = os.path.join(os.path.dirname(os.path.abspath(raw_path)),
                                 "manifest.json")
    if figure != "certification" and os.path.exists(manifest_path):
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        if manifest.get("missing_cells"):
            write(f"{figure.replace('-', '_')}_missing.csv",
                  ["cell"], [[c] for c in manifest["missing_cells"]])
    return written
