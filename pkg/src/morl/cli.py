"""``morl`` command line: run experiments, score fronts, draw plots.

Exit codes: 0 success, 1 runtime failure, 2 invalid config or arguments.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from morl.experiment import ConfigError, dump_json, execute, load_config, write_artifacts
from morl.indicators import (
    UtilityPrior,
    coverage_ratio,
    epsilon_additive,
    epsilon_multiplicative,
    expected_utility_metric,
    hypervolume,
    maximum_utility_loss,
    sparsity,
)
from morl.plotting import plot_files
from morl.sets import DimensionMismatch, pareto_prune, read_solution_csv

SINGLE_METRICS = ("hypervolume", "sparsity", "eum")
PAIR_METRICS = ("eps_additive", "eps_multiplicative", "coverage_ratio", "mul")


class UsageError(Exception):
    pass


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    files = execute(cfg)
    write_artifacts(cfg.output_dir, files)
    print(f"wrote {len(files)} files to {cfg.output_dir}", file=sys.stderr)
    return 0


def _read_front(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    values, columns = read_solution_csv(text)
    if not len(values):
        raise UsageError(f"{path}: no rows")
    return values, columns


def metrics_report(args) -> dict:
    fronts = [(p, *_read_front(p)) for p in args.front]
    reference = _read_front(args.reference) if args.reference else None
    dims = {s.num_objectives for _, s, _ in fronts} | ({reference[0].num_objectives} if reference else set())
    if len(dims) > 1:
        raise DimensionMismatch(f"fronts disagree on the number of objectives: {sorted(dims)}")
    prior = UtilityPrior(sample_count=args.samples, seed=args.prior_seed)
    ref_point = None
    if "hypervolume" in args.metric:
        if args.ref_point is None:
            raise UsageError("hypervolume needs --ref-point")
        try:
            ref_point = [float(x) for x in args.ref_point.split(",")]
        except ValueError:
            raise UsageError(f"--ref-point must be comma-separated numbers, got {args.ref_point!r}") from None
    pair_metrics = [m for m in args.metric if m in PAIR_METRICS]
    if pair_metrics and reference is None and len(fronts) < 2:
        raise UsageError(f"{', '.join(pair_metrics)} needs --reference or at least two --front files")

    report: dict = {"fronts": []}
    for path, values, columns in fronts:
        entry: dict = {"path": path, "objectives": columns, "count": len(values)}
        if "hypervolume" in args.metric:
            entry["hypervolume"] = hypervolume(values, ref_point)
            entry["ref_point"] = ref_point
        if "sparsity" in args.metric:
            entry["sparsity"] = sparsity(pareto_prune(values))
        if "eum" in args.metric:
            entry["eum"] = {"value": expected_utility_metric(values, prior), "samples": prior.sample_count,
                            "seed": prior.seed}
        report["fronts"].append(entry)

    if pair_metrics:
        if reference is not None:
            pairs = [(p, v, args.reference, reference[0]) for p, v, _ in fronts]
        else:
            pairs = [(pa, va, pb, vb) for pa, va, _ in fronts for pb, vb, _ in fronts if pa != pb]
        report["pairs"] = []
        for pa, va, pb, vb in pairs:
            entry = {"front": pa, "reference": pb}
            for m in pair_metrics:
                if m == "eps_additive":
                    entry[m] = epsilon_additive(va, vb)
                elif m == "eps_multiplicative":
                    entry[m] = epsilon_multiplicative(va, vb)
                elif m == "coverage_ratio":
                    entry[m] = {**coverage_ratio(va, vb, args.eps)._asdict(), "eps": args.eps}
                else:
                    entry[m] = {"value": maximum_utility_loss(va, vb, prior), "samples": prior.sample_count,
                                "seed": prior.seed}
            report["pairs"].append(entry)
    return report


def cmd_metrics(args) -> int:
    text = dump_json(metrics_report(args))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_plot(args) -> int:
    columns = args.y.split(",") if args.y else None
    try:
        svg = plot_files(args.csv, title=args.title, columns=columns)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morl", description="Multi-objective RL experiments and metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", help="score solution-set CSVs")
    met.add_argument("--front", action="append", required=True, help="front CSV (repeatable)")
    met.add_argument("--reference", help="reference front CSV for pairwise metrics")
    met.add_argument("--ref-point", help="hypervolume reference point, comma separated")
    met.add_argument("--metric", action="append", required=True, choices=SINGLE_METRICS + PAIR_METRICS)
    met.add_argument("--eps", type=float, default=0.01, help="coverage-ratio tolerance")
    met.add_argument("--samples", type=int, default=1000, help="utility samples for eum and mul")
    met.add_argument("--prior-seed", type=int, default=0)
    met.add_argument("-o", "--output", help="write the report here instead of stdout")
    met.set_defaults(func=cmd_metrics)

    plot = sub.add_parser("plot", help="draw CSVs as SVG")
    plot.add_argument("csv", nargs="+")
    plot.add_argument("-o", "--output", required=True)
    plot.add_argument("--title", default="")
    plot.add_argument("--y", help="comma-separated columns: metrics for line charts, two objectives for scatters")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"morl: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure becomes exit code 1
        print(f"morl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
