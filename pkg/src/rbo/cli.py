"""Command-line entry point: ``rbo <subcommand> ...``.

Exit codes: 0 success or passing verdict, 1 failing verdict, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .evolution import BlowUpError, ContractionFailure, PicardConfig, evolve, picard_solve
from .experiments import ExperimentConfig, InvalidExperiment, initial_field, run_experiment
from .io import ConfigError, RunManifest, SnapshotError, parse_config, snapshot_load, snapshot_save, write_series

log = logging.getLogger("rbo")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _length(text: str) -> float:
    from .io import _as_float

    try:
        return _as_float("L", text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=1024, help="grid points (power of two)")
    p.add_argument("--L", type=_length, default=64 * math.pi, help="domain length, e.g. 64pi")
    p.add_argument("--family", default="gaussian",
                   choices=["gaussian", "gaussian_derivative", "hermite_windowed", "custom"])
    p.add_argument("--samples", help="RBOF1 snapshot for --family custom")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--center", type=float, default=0.0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbo", description="Regularized Benjamin-Ono numerics")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="RK4 run; writes a trajectory CSV and final snapshot")
    _add_data_args(p)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--linear", action="store_true", help="drop the nonlinear term")

    p = sub.add_parser("picard", help="Picard iteration of the Duhamel map")
    _add_data_args(p)
    p.add_argument("--T", type=float, default=0.25)
    p.add_argument("--nt", type=int, default=129)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=50)

    p = sub.add_parser("verify-group", help="weighted group bounds at L and 2L")
    _add_data_args(p)
    p.add_argument("--r", type=int, default=1, choices=[0, 1, 2])

    p = sub.add_parser("experiment", help="run an experiment from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override [output] dir")

    p = sub.add_parser("snapshot-dump", help="print an RBOF1 snapshot")
    p.add_argument("path")
    p.add_argument("--csv", help="write x, u columns to this CSV instead of a summary")
    return parser


def _config_from_args(args, name: str, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        name=name, n=args.n, length=args.L, family=args.family, samples=args.samples,
        amplitude=args.amplitude, width=args.width, center=args.center, s=args.s,
        output=args.out, **extra,
    )


def _manifest(command: str, cfg, artifacts, t0: float, started: str, out: Path) -> None:
    m = RunManifest(command=command, config=cfg, artifacts=[str(a) for a in artifacts],
                    version=__version__, duration=time.perf_counter() - t0, started=started)
    m.write(out / f"{command}_manifest.json")


def _cmd_simulate(args) -> int:
    cfg = _config_from_args(args, "simulate", T=args.T, dt=args.dt, stride=args.stride, r=args.r)
    phi = initial_field(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0, started = time.perf_counter(), datetime.now(timezone.utc).isoformat()
    try:
        traj = evolve(phi, args.T, args.dt, args.stride, s=args.s, r=args.r, nonlinear=not args.linear)
    except BlowUpError as exc:
        print(f"simulate: FAIL (blow-up at t={exc.time:g})")
        return EXIT_FAIL
    d = traj.diagnostics
    series = {"t": traj.times, "norm_h_s": d["norm_h_s"], "norm_l2_r": d["norm_l2_r"],
              "q": d["q"], "mean_mode": d["mean_mode"]}
    arts = [write_series(out / "simulate_trajectory.csv", series),
            snapshot_save(out / "simulate_final.rbof", traj.states[-1])]
    _manifest("simulate", asdict(cfg), arts, t0, started, out)
    q = d["q"]
    drift = abs(q[-1] - q[0]) / q[0] if q[0] else 0.0
    print(f"simulate: PASS ({len(traj)} snapshots, T={traj.times[-1]:g}, Q drift {drift:.2e})")
    return EXIT_OK


def _cmd_picard(args) -> int:
    cfg = _config_from_args(args, "picard", T=args.T, nt=args.nt, tol=args.tol, max_iter=args.max_iter)
    phi = initial_field(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0, started = time.perf_counter(), datetime.now(timezone.utc).isoformat()
    try:
        traj, rates = picard_solve(phi, PicardConfig(T=args.T, nt=args.nt, tol=args.tol,
                                                     max_iter=args.max_iter, s=args.s))
    except ContractionFailure as exc:
        write_series(out / "picard_rates.csv", {"iteration": list(range(1, len(exc.rates) + 1)), "rate": exc.rates})
        print(f"picard: FAIL ({exc})")
        return EXIT_FAIL
    arts = [
        write_series(out / "picard_rates.csv", {"iteration": list(range(1, len(rates) + 1)), "rate": rates}),
        write_series(out / "picard_trajectory.csv", {"t": traj.times, "norm_s2": traj.diagnostics["norm_s2"]}),
    ]
    _manifest("picard", asdict(cfg), arts, t0, started, out)
    worst = max(rates) if rates else 0.0
    print(f"picard: PASS ({len(rates) + 1} iterations, max rate {worst:.3g})")
    return EXIT_OK


def _report(cfg: ExperimentConfig, command: str) -> int:
    t0, started = time.perf_counter(), datetime.now(timezone.utc).isoformat()
    rep = run_experiment(cfg)
    out = Path(cfg.output)
    arts = rep.write(out)
    _manifest(command, asdict(cfg), arts, t0, started, out)
    print(rep.summary_line())
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_verify_group(args) -> int:
    cfg = _config_from_args(args, "group_bounds", r=float(args.r))
    return _report(cfg, "verify-group")


def _cmd_experiment(args) -> int:
    cfg = parse_config(args.config)
    if args.out:
        cfg = replace(cfg, output=args.out)
    return _report(cfg, "experiment")


def _cmd_snapshot_dump(args) -> int:
    f = snapshot_load(args.path)
    if args.csv:
        write_series(args.csv, {"x": f.grid.x, "u": f.values})
        print(f"snapshot-dump: wrote {f.grid.n} samples to {args.csv}")
        return EXIT_OK
    v = f.values
    print(f"n={f.grid.n} L={f.grid.length!r} min={v.min():.17g} max={v.max():.17g} "
          f"l2={math.sqrt(float(np.sum(v * v)) * f.grid.dx):.17g}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "picard": _cmd_picard,
    "verify-group": _cmd_verify_group,
    "experiment": _cmd_experiment,
    "snapshot-dump": _cmd_snapshot_dump,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InvalidExperiment, SnapshotError, ValueError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
