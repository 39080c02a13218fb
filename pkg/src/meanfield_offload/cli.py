"""Command-line entry point: ``mfoffload {run,calibrate,check-uniqueness,project}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

import numpy as np

from .analysis import uniqueness_check
from .balancer import project_simplex
from .experiment import (
    FORMATS,
    PRESETS,
    default_target,
    export_report,
    load_config,
    mean_agent_delay,
    run_experiment,
)


def _with_overrides(args) -> "ExperimentConfig":  # noqa: F821
    config = load_config(args.source)
    net = {}
    if args.agents is not None:
        net["m"] = args.agents
    if args.arms is not None:
        net["n"] = args.arms
    if getattr(args, "dmax", None) is not None:
        net["d_max"] = args.dmax
    changes = {}
    if net:
        network = dataclasses.replace(config.network, **net)
        changes["network"] = network
        if network.n != len(config.f_star):
            changes["f_star"] = default_target(network.n)
    if args.seed is not None:
        changes["seed"] = args.seed
    for key in ("iterations", "rounds", "window", "step_size", "workers", "format", "out"):
        value = getattr(args, key, None)
        if value is not None:
            changes[{"iterations": "K", "rounds": "T"}.get(key, key)] = value
    if getattr(args, "no_early_stop", False):
        changes["early_stop"] = False
    return dataclasses.replace(config, **changes) if changes else config


def _resolved_network(config):
    cfg = config.network
    if cfg.d_max is None:
        d_bar = mean_agent_delay(cfg, config.probe_rounds, config.seed)
        cfg = cfg.replace(d_max=2.0 * cfg.m * d_bar)
        return cfg, d_bar
    return cfg, None


def cmd_run(args):
    config = _with_overrides(args)
    report = run_experiment(config)
    paths = []
    if config.out is not None:
        paths = export_report(report, config.out, config.format, overwrite=args.overwrite)
    summary = {
        "preset": config.preset,
        "converged": report.converged,
        "iterations": len(report.optimizer),
        "final_alpha": report.final_alpha,
        "baseline_f": report.baseline_f,
        "final_f": report.final_f,
        "f_star": list(config.f_star),
        "uniqueness_holds": report.uniqueness["holds"],
        "files": [str(p) for p in paths],
    }
    print(json.dumps(summary))


def cmd_calibrate(args):
    config = _with_overrides(args)
    cfg = config.network.replace(d_max=None)
    d_bar = mean_agent_delay(cfg, args.probe_rounds or config.probe_rounds, config.seed)
    print(json.dumps({"mean_agent_delay": d_bar, "d_max": 2.0 * cfg.m * d_bar}))


def cmd_uniqueness(args):
    config = _with_overrides(args)
    cfg, _ = _resolved_network(config)
    report = uniqueness_check(cfg)
    print(json.dumps({**report.to_dict(), "d_max": cfg.d_max}))


def cmd_project(args):
    print(json.dumps(project_simplex(np.array(args.vector, dtype=float)).tolist()))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfoffload", description="Mean-field bandit offloading and load balancing")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("source", help=f"preset ({', '.join(PRESETS)}) or JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--agents", type=int, help="override m")
        sp.add_argument("--arms", type=int, help="override n")
        sp.add_argument("--dmax", type=float, help="pin d_max in seconds instead of calibrating")

    run = sub.add_parser("run", help="full experiment: calibrate, baseline, optimize, final run")
    common(run)
    run.add_argument("--out", help="output directory")
    run.add_argument("--overwrite", action="store_true")
    run.add_argument("--format", choices=FORMATS)
    run.add_argument("--iterations", type=int, help="optimizer iterations K")
    run.add_argument("--rounds", type=int, help="simulation rounds T")
    run.add_argument("--window", type=int)
    run.add_argument("--step-size", type=float, dest="step_size")
    run.add_argument("--workers", type=int)
    run.add_argument("--no-early-stop", action="store_true")
    run.set_defaults(func=cmd_run)

    cal = sub.add_parser("calibrate", help="estimate d_max from a random-choice probe")
    common(cal)
    cal.add_argument("--probe-rounds", type=int, dest="probe_rounds")
    cal.set_defaults(func=cmd_calibrate)

    uq = sub.add_parser("check-uniqueness", help="evaluate beta(1+L) < 1")
    common(uq)
    uq.set_defaults(func=cmd_uniqueness)

    pr = sub.add_parser("project", help="project a vector onto the simplex")
    pr.add_argument("vector", nargs="+", type=float)
    pr.set_defaults(func=cmd_project)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # surfaced as one machine-readable line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
