"""Command-line interface.

Subcommands
-----------
simulate : generate and persist synthetic truth and measurements
run      : twin experiment with the selected filters
sweep    : convergence sweep in ensemble size or step length
compare  : multi-filter run plus an RMSE summary table

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .configfile import ConfigError, experiment_config, parse_config_file
from .errors import NumericFailure
from .harness import convergence_sweep, make_twin_data, run_experiment
from .record import _fmt

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--problem", help="problem id")
    p.add_argument("--filter", action="append", dest="filters",
                   help="filter to run (repeatable): enks | enks-iter | enkf")
    p.add_argument("--ensemble", type=int, help="ensemble size N")
    p.add_argument("--dt", type=float, help="assimilation step")
    p.add_argument("--alpha", type=float, help="denominator blend weight")
    p.add_argument("--kappa", type=int, help="inner iterations for enks-iter")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--horizon", type=float, help="run length T")
    p.add_argument("--out", help="output directory")


def _build_cfg(args, force_filters=None):
    settings = parse_config_file(args.config) if args.config else {}
    overrides = {
        "problem": args.problem,
        "filter": tuple(args.filters) if args.filters else None,
        "ensemble": args.ensemble,
        "dt": args.dt,
        "alpha": args.alpha,
        "kappa": args.kappa,
        "seed": args.seed,
        "horizon": args.horizon,
        "out": args.out,
    }
    if force_filters is not None:
        overrides["filter"] = force_filters
    return experiment_config(settings, overrides)


def _write_series_csv(path: Path, times, values):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,time,channel,value\n")
        for i, t in enumerate(times):
            for c in range(values.shape[0]):
                fh.write(f"{i + 1},{_fmt(t)},{c},{_fmt(values[c, i])}\n")


def _read_series_csv(path: Path):
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["step", "time", "channel", "value"]:
            raise ConfigError(f"unrecognized dataset header in {path}")
        rows = list(reader)
    steps = sorted({int(r[0]) for r in rows})
    channels = sorted({int(r[2]) for r in rows})
    pos = {s: i for i, s in enumerate(steps)}
    times = np.zeros(len(steps))
    values = np.zeros((len(channels), len(steps)))
    for r in rows:
        i = pos[int(r[0])]
        times[i] = float(r[1])
        values[int(r[2]), i] = float(r[3])
    return times, values


def load_dataset(data_dir) -> tuple:
    """Load a ``simulate`` output directory: (truth, series, noise_std)."""
    from .models import MeasurementSeries

    data_dir = Path(data_dir)
    for name in ("truth.csv", "measurements.csv", "noise_std.csv"):
        if not (data_dir / name).exists():
            raise ConfigError(f"dataset file missing: {data_dir / name}")
    _, truth = _read_series_csv(data_dir / "truth.csv")
    times, values = _read_series_csv(data_dir / "measurements.csv")
    noise_lines = (data_dir / "noise_std.csv").read_text().splitlines()[1:]
    noise_std = np.array([float(l.split(",")[1]) for l in noise_lines])
    return truth, MeasurementSeries(times=times, values=values), noise_std


def cmd_simulate(args) -> int:
    cfg = _build_cfg(args)
    problem, truth, series, grid = make_twin_data(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_series_csv(out / "truth.csv", grid, truth)
    _write_series_csv(out / "measurements.csv", series.times, series.values)
    with open(out / "noise_std.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("channel,noise_std\n")
        for c, s in enumerate(np.atleast_1d(problem.noise_std)):
            fh.write(f"{c},{_fmt(s)}\n")
    print(f"wrote truth ({truth.shape[0]} channels x {truth.shape[1]} steps), "
          f"measurements, and noise levels to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _build_cfg(args)
    data = load_dataset(args.data) if getattr(args, "data", None) else None
    record = run_experiment(cfg, data=data)
    summary = record.summary_rmse()
    print(f"problem={cfg.problem} seed={record.seed} "
          f"steps={record.steps.size} wall={record.wall_time:.2f}s")
    for name, vals in summary.items():
        print(f"  {name}: mean rmse over channels = {np.mean(vals):.6g}")
    print(f"artifacts in {cfg.out_dir}/")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _build_cfg(args)
    values = [float(v) if args.variable == "dt" else int(v)
              for v in args.values.split(",")]
    report = convergence_sweep(cfg, args.variable, values, args.repeats)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{args.variable}.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{args.variable},error_mean,error_std\n")
        for v, m, s in zip(report.values, report.mean_errors, report.std_errors):
            fh.write(f"{_fmt(v)},{_fmt(m)},{_fmt(s)}\n")
    print(f"{args.variable}-sweep over {values}: "
          f"log-log slope = {report.slope:.4f} (intercept {report.intercept:.3f})")
    print(f"per-value errors written to {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _build_cfg(args, force_filters=tuple(args.filters)
                     if args.filters else ("enks", "enks-iter", "enkf"))
    record = run_experiment(cfg)
    summary = record.summary_rmse()
    names = record.filters
    print(f"problem={cfg.problem} seed={record.seed} steps={record.steps.size}")
    header = f"{'channel':>10s} " + " ".join(f"{n:>12s}" for n in names)
    print(header)
    for c in range(record.n_channels):
        label = record.channel_names[c] if c < len(record.channel_names) else str(c)
        row = f"{label:>10s} " + " ".join(f"{summary[n][c]:12.5g}" for n in names)
        print(row)
    print(f"{'mean':>10s} " + " ".join(f"{np.mean(summary[n]):12.5g}" for n in names))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="enks",
        description="Ensemble Kushner-Stratonovich filtering benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic truth and data")
    _add_common(p_sim)
    p_sim.set_defaults(fn=cmd_simulate)

    p_run = sub.add_parser("run", help="run filters on a twin experiment")
    _add_common(p_run)
    p_run.add_argument("--data", help="directory with a 'simulate' dataset to "
                                      "filter instead of regenerating")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="convergence sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--variable", choices=("N", "dt"), required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated sweep values")
    p_sweep.add_argument("--repeats", type=int, default=5)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_cmp = sub.add_parser("compare", help="multi-filter summary table")
    _add_common(p_cmp)
    p_cmp.set_defaults(fn=cmd_compare)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
