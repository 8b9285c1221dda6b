"""Command-line interface.

Subcommands map onto the experiment harness: environment generation, radio
map simulation, one-shot localization, parameter sweeps, and radio-map
construction.  Exit codes: 0 success, 2 configuration/structural problems,
3 numerical failures.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import environment as env
from . import harness, mapbuilder
from .errors import ConfigurationError, NumericalError, StructuralError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alignloc",
        description="RSS-based indoor localization and radio-map construction "
        "via manifold alignment on synthetic environments",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    commands = {
        "gen-env": "write the resolved floor plan (walls, APs, mask) as a YAML file",
        "simulate-map": "write the ground-truth and baseline radio maps as CSV",
        "localize": "run one localization trial and write per-observation results",
        "sweep-calibration": "mean error vs calibration percentage",
        "sweep-neighbors": "mean error vs LLE neighborhood size",
        "sweep-observations": "mean error vs number of online observations",
        "build-map": "construct an estimated radio map and report RMS metrics",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="experiment config file (YAML)")
        p.add_argument("--seed", type=int, help="override the config master seed")
        p.add_argument("--out", default=".", help="output directory (default: current)")
    return parser


def _load(args) -> tuple[harness.ExperimentConfig, str | None]:
    if args.config is not None:
        cfg = harness.load_config(args.config)
        config_dir = os.path.dirname(os.path.abspath(args.config))
    else:
        cfg = harness.ExperimentConfig()
        config_dir = None
    if args.seed is not None:
        cfg.seed = int(args.seed)
    os.makedirs(args.out, exist_ok=True)
    return cfg, config_dir


def _cmd_gen_env(args) -> int:
    cfg, config_dir = _load(args)
    plan, aps = harness.resolve_plan(cfg, config_dir=config_dir)
    out = os.path.join(args.out, "environment.yaml")
    env.save_floor_plan(plan, aps, out)
    print(f"wrote {out}")
    return 0


def _cmd_simulate_map(args) -> int:
    cfg, config_dir = _load(args)
    environment = harness.build_environment(cfg, config_dir=config_dir)
    truth_path = os.path.join(args.out, "truth_map.csv")
    baseline_path = os.path.join(args.out, "baseline_map.csv")
    env.save_radio_map(environment.truth_map, truth_path)
    env.save_radio_map(environment.baseline_map, baseline_path)
    print(f"wrote {truth_path} and {baseline_path} ({environment.n_points} grid points)")
    return 0


def _cmd_localize(args) -> int:
    cfg, config_dir = _load(args)
    environment = harness.build_environment(cfg, config_dir=config_dir)
    errors, true_pos, est_pos = harness._run_single_trial(environment, cfg, 0, 0)
    out = os.path.join(args.out, "localization.csv")
    harness.write_localization_csv(true_pos, est_pos, out)
    print(f"wrote {out} (mean error {errors.mean():.3f} m over {len(errors)} observations)")
    return 0


def _sweep(args, param: str, filename: str) -> int:
    cfg, config_dir = _load(args)
    environment = harness.build_environment(cfg, config_dir=config_dir)
    result = harness.run_localization_experiment(cfg, environment, sweep_param=param)
    out = os.path.join(args.out, filename)
    harness.write_metrics_csv(result, out)
    print(f"wrote {out} ({len(result.rows)} sweep points)")
    return 0


def _cmd_build_map(args) -> int:
    cfg, config_dir = _load(args)
    environment = harness.build_environment(cfg, config_dir=config_dir)
    result, estimated = harness.run_map_experiment(cfg, environment)
    metrics_path = os.path.join(args.out, "map_metrics.csv")
    map_path = os.path.join(args.out, "estimated_map.csv")
    harness.write_metrics_csv(result, metrics_path)
    mapbuilder.save_estimated_map(estimated, map_path)
    row = result.rows[0]
    print(
        f"wrote {metrics_path} and {map_path} "
        f"(rms_overall {row.metrics[1]:.3f} dB, improvement {row.metrics[2]:.2f}%)"
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen-env": _cmd_gen_env,
        "simulate-map": _cmd_simulate_map,
        "localize": _cmd_localize,
        "sweep-calibration": lambda a: _sweep(a, "calibration_pct", "calibration_sweep.csv"),
        "sweep-neighbors": lambda a: _sweep(a, "n_neighbors", "neighbors_sweep.csv"),
        "sweep-observations": lambda a: _sweep(a, "observations", "observations_sweep.csv"),
        "build-map": _cmd_build_map,
    }
    try:
        return handlers[args.command](args)
    except (ConfigurationError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
