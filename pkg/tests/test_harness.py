import csv
import json
import os

import numpy as np
import pytest

from subsetbench.config import ExperimentConfig
from subsetbench.datagen import (
    BetaSpec,
    CovarianceSpec,
    Placement,
    ScenarioSpec,
    Structure,
)
from subsetbench.harness import (
    RAW_COLUMNS,
    build_dataset_for,
    certification_study,
    emit_plot_data,
    read_raw_csv,
    run_experiment,
    run_replication,
)


def toy_spec(scenario_id="toy", n=60, p=20, rho=0.7, s=5, tau=1.0, reps=2):
    return ScenarioSpec(
        scenario_id=scenario_id,
        n=n,
        p=p,
        covariance=CovarianceSpec(Structure.BLOCK, rho=rho, block_size=10),
        beta=BetaSpec(p=p, s=s, placement=Placement.CONSECUTIVE),
        tau=tau,
        replications=reps,
    )


def toy_config(tmp_path, **overrides):
    defaults = dict(
        master_seed=5,
        preset="custom",
        scenarios=(toy_spec(),),
        lambda_grid_size=40,
        k_min=1,
        k_max=6,
        bss_time_budget_ms=200,
        bss_restarts=5,
        replications=2,
        output_dir=str(tmp_path / "out"),
        deterministic=True,
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


class TestRunReplication:
    def test_deterministic_record_lists(self, tmp_path):
        config = toy_config(tmp_path)
        spec = config.scenarios[0]
        a = run_replication(spec, 0, config)
        b = run_replication(spec, 0, config)
        assert a == b

    def test_fss_only_produces_per_k_rows(self, tmp_path):
        config = toy_config(tmp_path, methods=("FSS",))
        spec = config.scenarios[0]
        records = run_replication(spec, 0, config)
        assert {r.method for r in records} == {"FSS"}
        per_k = [r for r in records if r.status == "ok"]
        assert sorted(r.k for r in per_k) == list(config.k_range)
        best = [r for r in records if r.status.startswith("best_")]
        assert {r.status for r in best} == {"best_f1", "best_f2", "best_mcc"}

    def test_enet_rows_per_alpha_and_joint(self, tmp_path):
        config = toy_config(tmp_path, methods=("ENET",),
                            enet_alphas=(0.2, 0.8))
        spec = config.scenarios[0]
        records = run_replication(spec, 0, config)
        per_k = [r for r in records if r.status in ("ok", "noconv")]
        assert len(per_k) == 2 * len(list(config.k_range))
        joint = [r for r in records if r.status.endswith("_joint")]
        assert len(joint) == 3
        per_alpha_best = [
            r for r in records
            if r.status.startswith("best_") and not r.status.endswith("_joint")
        ]
        assert len(per_alpha_best) == 6

    def test_bss_rows_carry_certification(self, tmp_path):
        config = toy_config(tmp_path, methods=("BSS",))
        spec = config.scenarios[0]
        records = run_replication(spec, 0, config)
        per_k = [r for r in records if r.status == "ok"]
        assert all(r.gap >= 0.0 for r in per_k)
        assert all(r.runtime_ms == 0 for r in per_k)  # deterministic mode
        assert all(len(r.method) for r in per_k)

    def test_realized_size_tracks_support(self, tmp_path):
        config = toy_config(tmp_path, methods=("LASSO",))
        spec = config.scenarios[0]
        records = run_replication(spec, 0, config)
        for r in records:
            assert r.realized_support_size == r.tp + r.fp

    def test_per_k_curves_defined_for_every_k(self, tmp_path):
        config = toy_config(tmp_path)
        spec = config.scenarios[0]
        records = run_replication(spec, 0, config)
        for method in ("BSS", "FSS", "LASSO", "ENET"):
            per_k = [r for r in records
                     if r.method == method and r.status in ("ok", "noconv")]
            ks = sorted({r.k for r in per_k})
            assert ks == list(config.k_range)
            assert all(np.isfinite(r.f1) for r in per_k)
            assert all(np.isfinite(r.mcc) for r in per_k)


class TestRunExperiment:
    def test_outputs_and_coverage(self, tmp_path):
        config = toy_config(tmp_path)
        info = run_experiment(config)
        assert os.path.exists(info["raw"])
        assert os.path.exists(info["summary"])
        rows = read_raw_csv(info["raw"])
        header = open(info["raw"]).readline().strip().split(",")
        assert header == list(RAW_COLUMNS)
        # every (scenario, rep, method, tuning point) appears exactly once
        keys = [
            (r["scenario_id"], r["replication"], r["method"], r["alpha"],
             r["k"], r["lambda"], r["status"])
            for r in rows
        ]
        assert len(keys) == len(set(keys))
        reps = {(r["scenario_id"], r["replication"]) for r in rows}
        assert reps == {("toy", "0"), ("toy", "1")}
        manifest = json.load(open(os.path.join(config.output_dir, "manifest.json")))
        assert manifest["complete"]
        assert not manifest["missing_cells"]
        assert not os.path.exists(os.path.join(config.output_dir, "raw_partial.csv"))

    def test_sorted_and_formatted(self, tmp_path):
        config = toy_config(tmp_path)
        info = run_experiment(config)
        with open(info["raw"]) as fh:
            rows = list(csv.DictReader(fh))
        sort_keys = [
            (r["scenario_id"], int(r["replication"]), r["method"], r["status"])
            for r in rows
        ]
        assert sort_keys == sorted(sort_keys)
        for r in rows:
            if r["f1"]:
                assert len(r["f1"].replace(".", "").replace("-", "").lstrip("0")) <= 11
            assert r["certified"] in ("true", "false")
        # missing tuning fields are empty strings
        bss = [r for r in rows if r["method"] == "BSS" and r["status"] == "ok"]
        assert all(r["alpha"] == "" and r["lambda"] == "" for r in bss)

    def test_worker_count_invariance(self, tmp_path):
        config1 = toy_config(tmp_path, output_dir=str(tmp_path / "w1"), workers=1)
        config2 = toy_config(tmp_path, output_dir=str(tmp_path / "w2"), workers=2)
        info1 = run_experiment(config1)
        info2 = run_experiment(config2)
        assert open(info1["raw"], "rb").read() == open(info2["raw"], "rb").read()
        assert open(info1["summary"], "rb").read() == open(info2["summary"], "rb").read()

    def test_summary_has_stats(self, tmp_path):
        config = toy_config(tmp_path)
        info = run_experiment(config)
        with open(info["summary"]) as fh:
            rows = list(csv.DictReader(fh))
        bss_best = [r for r in rows if r["method"] == "BSS" and r["status"] == "best_f1"]
        assert len(bss_best) == 1
        assert 0.0 <= float(bss_best[0]["mean"]) <= 1.0
        assert bss_best[0]["certified_fraction"] != ""


class TestCertificationStudy:
    def test_same_datasets_across_limits(self, tmp_path):
        config = toy_config(tmp_path, k_max=4)
        spec = config.scenarios[0]
        out = tmp_path / "cert.csv"
        records = certification_study(spec, [50, 400], reps=2, config=config,
                                      out_path=out)
        by_rep = {}
        for rec in records:
            by_rep.setdefault(rec["replication"], set()).add(rec["dataset_hash"])
        for hashes in by_rep.values():
            assert len(hashes) == 1
        assert out.exists()

    def test_certified_fraction_nondecreasing(self, tmp_path):
        config = toy_config(tmp_path, k_max=5)
        spec = toy_spec(p=20, n=60)
        records = certification_study(spec, [1, 2000], reps=2, config=config)
        frac = {}
        for rec in records:
            frac.setdefault(rec["time_limit_ms"], []).append(rec["certified"])
        fractions = {k: np.mean(v) for k, v in frac.items()}
        assert fractions[2000] >= fractions[1]


class TestEmitPlotData:
    def test_best_boxplot_and_per_k(self, tmp_path):
        config = toy_config(tmp_path)
        info = run_experiment(config)
        files = emit_plot_data(info["raw"], "best-boxplot", tmp_path / "plots")
        assert any("best_boxplot" in f for f in files)
        files = emit_plot_data(info["raw"], "per-k", tmp_path / "plots")
        with open(files[0]) as fh:
            rows = list(csv.DictReader(fh))
        ks = {int(r["k"]) for r in rows if r["method"] == "FSS"}
        assert ks == set(config.k_range)

    def test_certification_panels(self, tmp_path):
        config = toy_config(tmp_path, k_max=3)
        spec = config.scenarios[0]
        out = tmp_path / "cert.csv"
        certification_study(spec, [50, 200], reps=1, config=config, out_path=out)
        files = emit_plot_data(out, "certification", tmp_path / "plots")
        names = {os.path.basename(f) for f in files}
        assert names == {
            "certification_panel_a.csv", "certification_panel_b.csv",
            "certification_panel_c.csv", "certification_panel_d.csv",
        }

    def test_missing_cells_sidecar(self, tmp_path):
        config = toy_config(tmp_path)
        info = run_experiment(config)
        manifest_path = os.path.join(config.output_dir, "manifest.json")
        manifest = json.load(open(manifest_path))
        manifest["missing_cells"] = ["toy:9"]
        manifest["complete"] = False
        json.dump(manifest, open(manifest_path, "w"))
        files = emit_plot_data(info["raw"], "per-k", tmp_path / "plots2")
        sidecars = [f for f in files if "missing" in os.path.basename(f)]
        assert len(sidecars) == 1
        assert "toy:9" in open(sidecars[0]).read()

    def test_unknown_figure_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plot_data("raw.csv", "sparkline", tmp_path)


def test_build_dataset_for_uses_child_seeds(tmp_path):
    spec = toy_spec()
    d0 = build_dataset_for(spec, 5, 0)
    d0_again = build_dataset_for(spec, 5, 0)
    d1 = build_dataset_for(spec, 5, 1)
    assert np.array_equal(d0.x, d0_again.x)
    assert not np.array_equal(d0.y, d1.y)
