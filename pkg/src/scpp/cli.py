"""Command-line interface.

Exit codes: 0 success, 2 invalid config or usage, 3 an experiment analysis
gate failed (for CI).  The environment variable SCPP_SEED overrides the
config's master seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .estimators import estimate
from .experiment import (ConfigError, ExperimentConfig, dump_trajectories,
                         emit_report, run_experiment)
from .limits import reference_samples
from .sampling import SampleSet, read_events_csv


def _add_config(parser):
    parser.add_argument("--config", required=True,
                        help="experiment config (JSON)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scpp",
        description="Poisson smooth change-point simulation and estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="dump sampled trajectories as CSV")
    _add_config(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--replication", type=int, default=0,
                   help="replication index to dump (default 0)")

    p = sub.add_parser("estimate",
                       help="estimate theta from a trajectory CSV dump")
    _add_config(p)
    p.add_argument("--data", required=True, help="trajectory CSV")
    p.add_argument("--n", type=int, default=None,
                   help="number of trajectories (default: inferred)")

    p = sub.add_parser("experiment", help="run a Monte Carlo campaign")
    _add_config(p)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: all cores)")
    p.add_argument("--out", default=None,
                   help="override the config output_dir")
    p.add_argument("--svg", action="store_true", help="also render figures")

    p = sub.add_parser("limits",
                       help="Monte Carlo moments of the limit functionals")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--rho", type=float, default=None)
    group.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None, help="write JSON here (else stdout)")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("report",
                       help="re-render figures for a finished experiment")
    p.add_argument("--from", dest="from_dir", required=True,
                   help="experiment output directory")
    p.add_argument("--svg", action="store_true", default=True)
    return parser


def _cmd_simulate(args) -> int:
    config = ExperimentConfig.from_json_file(args.config)
    for path in dump_trajectories(config, args.out, args.replication):
        print(path)
    return 0


def _cmd_estimate(args) -> int:
    config = ExperimentConfig.from_json_file(args.config)
    model = config.model
    trajectories = read_events_csv(args.data, tau=model.tau, n=args.n)
    sample = SampleSet(trajectories=tuple(trajectories), model=model,
                       theta_true=math.nan, seed=0)
    result = estimate(sample, prior=config.prior)
    print(json.dumps({
        "mle": result.mle,
        "bayes": result.bayes,
        "loglik_at_mle": result.loglik_at_mle,
        "cell_count": result.cell_count,
        "quadrature_error_estimate": result.quadrature_error_estimate,
        "boundary": result.boundary,
        "n": sample.n,
    }, indent=2))
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_json_file(args.config)
    out_dir = args.out or config.output_dir
    threads = args.threads if args.threads else (os.cpu_count() or 1)
    report = run_experiment(config, threads=threads)
    emit_report(report, out_dir, svg=args.svg)
    print(f"wrote {out_dir} ({len(report.replications)} replications, "
          f"{len(report.failures)} failures)")
    for gate, ok in report.gates.items():
        if ok is not None:
            print(f"  {gate}: {'pass' if ok else 'FAIL'}")
    return 0 if report.passed else 3


def _cmd_limits(args) -> int:
    if (args.a is None) != (args.b is None):
        raise ConfigError("give both --a and --b, or --rho")
    etas, zetas, truncated = reference_samples(
        args.paths, args.seed, a=args.a, b=args.b, rho=args.rho,
        processes=args.threads)
    m = args.paths
    out = {
        "paths": m,
        "seed": args.seed,
        "parameters": ({"rho": args.rho} if args.rho is not None
                       else {"a": args.a, "b": args.b}),
        "E_eta": float(etas.mean()),
        "E_eta_se": float(etas.std(ddof=1) / math.sqrt(m)),
        "E_eta2": float((etas ** 2).mean()),
        "E_eta2_se": float((etas ** 2).std(ddof=1) / math.sqrt(m)),
        "E_zeta": float(zetas.mean()),
        "E_zeta_se": float(zetas.std(ddof=1) / math.sqrt(m)),
        "E_zeta2": float((zetas ** 2).mean()),
        "E_zeta2_se": float((zetas ** 2).std(ddof=1) / math.sqrt(m)),
        "window_truncated": truncated,
    }
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_report(args) -> int:
    manifest_path = os.path.join(args.from_dir, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {manifest_path}: {exc}") from exc
    config = ExperimentConfig.from_dict(manifest["config"])
    replications = _load_replications(args.from_dir, config)
    from .experiment import ExperimentReport
    report = ExperimentReport(
        config=config, replications=replications, failures=[],
        summary_rows=[], analyses={}, gates={},
        reference_seed=manifest["reference_seed"], wall_time_s=0.0)
    from .plots import render_report_figures
    for path in render_report_figures(report, args.from_dir):
        print(path)
    return 0


def _load_replications(from_dir, config):
    from .experiment import ReplicationResult
    path = os.path.join(from_dir, "replications.csv")
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        idx = {name: i for i, name in enumerate(header)}
        for line in fh:
            parts = line.rstrip("\n").split(",")
            rows.append(ReplicationResult(
                n=int(parts[idx["n"]]),
                replication_index=int(parts[idx["replication_index"]]),
                seed=int(parts[idx["seed"]]),
                mle=float(parts[idx["mle"]]),
                bayes=float(parts[idx["bayes"]]),
                norm_err_mle=float(parts[idx["norm_err_mle"]]),
                norm_err_bayes=float(parts[idx["norm_err_bayes"]]),
                boundary_flag=parts[idx["boundary_flag"]] == "1",
                ln_z=(),
                delta_n_stat=None))
    return rows


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "experiment": _cmd_experiment,
    "limits": _cmd_limits,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
