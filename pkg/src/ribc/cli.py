"""Command-line front end: ``ribc {simulate,cibc,bounds,montecarlo,verify}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import control
from .config import ConfigError, RunConfig, build_model, echo, parse_config
from .core import ConfidenceProfile, SystemState
from .experiments import (
    corollary2_counterexample_init,
    dominance_experiment,
    run_trials,
    summarize,
    uniform_ball,
)
from .interaction import delta_lower_bound, make_rng
from .output import emit_schedule, emit_trajectory, write_rows
from .verify import verify_suite


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--trials", type=int)
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--out", help="output directory (default: $RIBC_OUT_DIR or ./ribc-out)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--decimate", type=int, help="keep every k-th trajectory step")
    p.add_argument("--workers", type=int, help="worker processes for Monte Carlo trials")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ribc", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for name, help_ in [
        ("simulate", "run random-interaction trials and write trajectories"),
        ("cibc", "run the controlled merge scheduler on one initial state"),
        ("bounds", "tabulate the closed-form step and rate bounds"),
        ("montecarlo", "compare empirical tail/MSE curves with their envelopes"),
        ("verify", "run the verification battery"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "bounds":
            p.add_argument("--n", type=int, help="agent count (instead of a config)")
            p.add_argument("--rn", type=float, help="smallest confidence bound (instead of a config)")
        if name == "verify":
            p.add_argument("--scale", choices=("quick", "full"))
    return parser


def _overrides(args) -> dict:
    keys = ("seed", "trials", "max_steps", "out", "format", "decimate", "workers", "scale")
    return {k: getattr(args, k, None) for k in keys}


def _write_config(cfg: RunConfig):
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(echo(cfg) + "\n")


def _emit(summary: dict):
    print(json.dumps(summary, indent=2, default=float))


def cmd_simulate(cfg: RunConfig) -> int:
    exp = cfg.experiment(keep_trajectory=True)
    records = run_trials(exp, cfg.workers)
    ext = cfg.format
    emit_trajectory([(r.trial_id, r.trajectory) for r in records], cfg.out_dir / f"trajectory.{ext}", ext)
    rows = [
        {"trial_id": r.trial_id, "tau": -1 if r.capped else r.tau, "consensus": int(r.consensus),
         "clusters": len(r.partition)}
        for r in records
    ]
    write_rows(rows, cfg.out_dir / f"trials.{ext}", ext)
    summary = summarize(records)
    _emit(summary)
    return 1 if summary["capped"] else 0


def _initial_state(cfg: RunConfig) -> SystemState:
    if cfg.init == "explicit":
        return SystemState(cfg.opinions)
    rng = make_rng(cfg.seed, 0)
    if cfg.init == "uniform_ball":
        return SystemState(uniform_ball(cfg.n, cfg.d, rng))
    return corollary2_counterexample_init(cfg.n, cfg.d, cfg.bounds[0], rng)


def cmd_cibc(cfg: RunConfig) -> int:
    profile = ConfidenceProfile(cfg.bounds)
    state = _initial_state(cfg)
    run = control.algorithm1_run(state, profile, cfg.eps_eq)
    states = control.replay(state, profile, run.schedule)
    ext = cfg.format
    traj = [(s.time, s.opinions) for s in states][:: cfg.decimate]
    if traj[-1][0] != states[-1].time:
        traj.append((states[-1].time, states[-1].opinions))
    emit_trajectory([(0, traj)], cfg.out_dir / f"trajectory.{ext}", ext)
    emit_schedule(run.schedule, cfg.out_dir / f"schedule.{ext}", ext)
    summary = {
        "terminal_time": run.terminal_time,
        "clusters": [list(c) for c in run.partitions[-1]],
        "merges": [{"agents": list(a), "time": t} for a, t in run.generated],
    }
    if state.n >= 3 and profile.r_min < 2:
        summary["T_n_star"] = control.compute_Tn_star(state.n, profile.r_min)
        summary["within_bound"] = run.terminal_time <= summary["T_n_star"]
    _emit(summary)
    return 0


def bounds_rows(n: int, r_n: float, model=None) -> list[dict]:
    row = {
        "n": n,
        "r_n": float(r_n),
        "T_n_star": control.compute_Tn_star(n, r_n),
        "T_n": control.compute_Tn(n, r_n),
        "floor_T_n": control.floor_Tn(n, r_n),
    }
    if model is not None:
        row["delta"] = delta_lower_bound(model)
    return [row]


def cmd_bounds(cfg: RunConfig) -> int:
    model = build_model(cfg.model, cfg.n) if cfg.model else None
    rows = bounds_rows(cfg.n, cfg.bounds[-1], model)
    write_rows(rows, cfg.out_dir / f"bounds.{cfg.format}", cfg.format)
    _emit(rows[0])
    return 0


def cmd_montecarlo(cfg: RunConfig) -> int:
    rep = dominance_experiment(cfg.experiment(), cfg.workers)
    ext = cfg.format
    write_rows(rep.survival.rows(), cfg.out_dir / f"survival.{ext}", ext)
    write_rows(rep.mse.rows(), cfg.out_dir / f"mse.{ext}", ext)
    _emit({"trials": rep.trials, "delta": rep.delta,
           "survival_dominated": rep.survival.dominated(), "mse_dominated": rep.mse.dominated()})
    return 0 if rep.ok else 1


def cmd_verify(cfg: RunConfig) -> int:
    checks = verify_suite(cfg.scale, cfg.seed)
    report = {
        "scale": cfg.scale,
        "passed": all(c.passed for c in checks),
        "checks": [{"name": c.name, "passed": c.passed, "seconds": round(c.seconds, 3), "detail": c.detail}
                   for c in checks],
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "verify.json").write_text(json.dumps(report, indent=2, default=_jsonable) + "\n")
    for c in checks:
        print(c.line(), file=sys.stderr)
    print(json.dumps({"passed": report["passed"], "failed": [c.name for c in checks if not c.passed]}))
    return 0 if report["passed"] else 1


def _jsonable(o):
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, (tuple, set, frozenset)):
        return list(o)
    return str(o)


COMMANDS = {
    "simulate": cmd_simulate,
    "cibc": cmd_cibc,
    "bounds": cmd_bounds,
    "montecarlo": cmd_montecarlo,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = _overrides(args)
    if args.mode == "bounds" and args.config is None:
        if args.n is None or args.rn is None:
            print("ribc bounds: give --config or both --n and --rn", file=sys.stderr)
            return 2
        overrides.update(n=args.n, bounds=[args.rn] * args.n)
    try:
        cfg = parse_config(args.config, args.mode, overrides)
    except ConfigError as exc:
        print(f"ribc {args.mode}: config error: {exc}", file=sys.stderr)
        return 2
    if args.mode != "verify":
        _write_config(cfg)
    return COMMANDS[args.mode](cfg)


if __name__ == "__main__":
    sys.exit(main())
