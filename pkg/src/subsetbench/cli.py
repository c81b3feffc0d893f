"""Command-line interface.

Subcommands: ``run`` (execute a configured experiment), ``certify`` (time
limit sensitivity study for the exact subset search), ``summarize``
(aggregate a raw results CSV), ``plots`` (emit plot-ready data), and
``gen-data`` (dump a single sampled dataset).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace

from .config import PRESETS, enumerate_grid, load_config
from .datagen import sample_dataset
from .errors import SubsetBenchError
from .harness import (
    FIGURES,
    certification_study,
    emit_plot_data,
    run_experiment,
    summarize,
)
from .semisynthetic import SemiSyntheticSpec, build_semisynthetic, load_expression_matrix


def _parse_duration_ms(text: str) -> int:
    text = text.strip().lower()
    if text.endswith("ms"):
        return int(float(text[:-2]))
    if text.endswith("s"):
        return int(float(text[:-1]) * 1000)
    return int(text)


def _cmd_run(args) -> int:
    config = load_config(args.config)
    overrides = {}
    if args.preset:
        overrides["preset"] = args.preset
    if args.workers:
        overrides["workers"] = args.workers
    if args.out:
        overrides["output_dir"] = args.out
    if overrides:
        config = replace(config, **overrides)
    info = run_experiment(config)
    print(f"wrote {info['records']} records over {info['cells']} cells")
    print(f"raw results: {info['raw']}")
    print(f"summary:     {info['summary']}")
    return 0


def _cmd_certify(args) -> int:
    config = load_config(args.config)
    scenarios = enumerate_grid(config.preset, config)
    if args.scenario:
        matches = [s for s in scenarios if s.scenario_id == args.scenario]
        if not matches:
            print(f"no scenario with id {args.scenario!r}", file=sys.stderr)
            return 2
        spec = matches[0]
    else:
        spec = scenarios[0]
    limits = [_parse_duration_ms(t) for t in args.limits.split(",")]
    reps = args.reps or config.effective_replications
    out_path = args.out or "certification_raw.csv"
    records = certification_study(spec, limits, reps, config, out_path=out_path)
    certified = sum(1 for r in records if r["certified"])
    print(f"wrote {len(records)} records ({certified} certified) to {out_path}")
    return 0


def _cmd_summarize(args) -> int:
    out = args.out or "summary.csv"
    rows = summarize(args.raw, out)
    print(f"wrote {len(rows)} summary rows to {out}")
    return 0


def _cmd_plots(args) -> int:
    files = emit_plot_data(args.raw, args.figure, args.out or "plots")
    for path in files:
        print(f"wrote {path}")
    return 0


def _cmd_gen_data(args) -> int:
    config = load_config(args.spec)
    if not config.scenarios:
        print("spec file must contain at least one [[scenario]]", file=sys.stderr)
        return 2
    spec = config.scenarios[0]
    if isinstance(spec, SemiSyntheticSpec):
        matrix = load_expression_matrix(spec.expression_path)
        dataset = build_semisynthetic(
            matrix, spec.p_sub, spec.n_sub, spec.tau, args.seed, meta=spec
        )
    else:
        dataset = sample_dataset(spec, args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j}" for j in range(1, dataset.p + 1)])
        for i in range(dataset.n):
            writer.writerow(
                [f"{dataset.y[i]:.17g}"]
                + [f"{v:.17g}" for v in dataset.x[i]]
            )
    meta = {
        "scenario_id": spec.scenario_id,
        "seed": args.seed,
        "n": dataset.n,
        "p": dataset.p,
        "sigma2": dataset.sigma2,
        "true_support": sorted(dataset.true_support),
    }
    meta_path = args.out + ".meta.json"
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    print(f"wrote {dataset.n}x{dataset.p} dataset to {args.out} (+ {meta_path})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subsetbench",
        description="Variable-selection benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment grid")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--preset", choices=PRESETS)
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--out")
    p_run.set_defaults(func=_cmd_run)

    p_cert = sub.add_parser(
        "certify", help="time-limit and certification study for one scenario"
    )
    p_cert.add_argument("--config", required=True)
    p_cert.add_argument("--limits", required=True,
                        help="comma-separated, e.g. 1s,10s,60s")
    p_cert.add_argument("--scenario", help="scenario id (default: first)")
    p_cert.add_argument("--reps", type=int)
    p_cert.add_argument("--out")
    p_cert.set_defaults(func=_cmd_certify)

    p_sum = sub.add_parser("summarize", help="summary table from a raw CSV")
    p_sum.add_argument("--raw", required=True)
    p_sum.add_argument("--out")
    p_sum.set_defaults(func=_cmd_summarize)

    p_plots = sub.add_parser("plots", help="emit plot-ready CSV data")
    p_plots.add_argument("--raw", required=True)
    p_plots.add_argument("--figure", required=True, choices=FIGURES)
    p_plots.add_argument("--out")
    p_plots.set_defaults(func=_cmd_plots)

    p_gen = sub.add_parser("gen-data", help="dump one sampled dataset")
    p_gen.add_argument("--spec", required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SubsetBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
