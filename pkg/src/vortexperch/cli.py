"""Command-line entry point: ``vortexperch {simulate,plan,ablation,validate}``."""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import io
from .ablation import format_table, run_ablation
from .config import ConfigError, ScenarioConfig, load_config, serialize_config
from .mppi import ControlSequence, plan
from .tvlqr import synthesize
from .validate import report, run_all
from .vehicle import SimulationDiverged, Trajectory, Vehicle


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario file (INI sections); defaults if omitted")
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides [run] seed)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--snapshot-stride", type=int, default=None,
                   help="write wake snapshots every n steps (0 = none)")
    p.add_argument("--threads", type=int, default=1, help="rollout threads for the planner")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vortexperch", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="fly a control sequence open loop")
    _common(p)
    p.add_argument("--controls", help="control file written by 'plan' (zeros if omitted)")
    p = sub.add_parser("plan", help="plan a perch and synthesize feedback gains")
    _common(p)
    p = sub.add_parser("ablation", help="four-mode perch comparison")
    _common(p)
    p.add_argument("--seeds", type=int, default=None, help="number of perturbed launches")
    p = sub.add_parser("validate", help="run the oracle cases")
    _common(p)
    return ap


def _settings(args) -> tuple[ScenarioConfig, int, int]:
    cfg = load_config(args.config)
    seed = cfg.run.seed if args.seed is None else args.seed
    stride = cfg.run.snapshot_stride if args.snapshot_stride is None else args.snapshot_stride
    if seed < 0 or stride < 0 or args.threads < 1:
        raise ConfigError("seed and snapshot stride must be >= 0 and threads >= 1")
    return replace(cfg, run=replace(cfg.run, seed=seed, snapshot_stride=stride)), seed, stride


def _note(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _save_trajectory(out: str, name: str, traj: Trajectory, dt: float) -> None:
    io.write_trajectory(os.path.join(out, f"{name}.csv"), traj)
    if traj.snapshots:
        io.write_wake_snapshots(os.path.join(out, f"{name}_wake.csv"), traj, dt)


def cmd_simulate(args) -> int:
    cfg, seed, stride = _settings(args)
    vehicle = Vehicle(cfg.vehicle, cfg.fluid)
    if args.controls:
        _, _, data = io.read_table(args.controls)
        seq = io.read_controls(args.controls) if len(data) else None
    else:
        seq = ControlSequence.zeros(cfg.planner.horizon, cfg.planner.knot_dt)
    controls = np.zeros((0, 2)) if seq is None else seq.per_step(vehicle.dt)
    io.write_text(os.path.join(args.out, "config.ini"), serialize_config(cfg))
    try:
        traj = vehicle.run(cfg.launch.state(), controls, snapshot_stride=stride)
    except SimulationDiverged as exc:
        if exc.trajectory is not None:
            _save_trajectory(args.out, "trajectory", exc.trajectory, vehicle.dt)
        _note(f"simulation diverged: {exc}; partial log kept")
        return 2
    _save_trajectory(args.out, "trajectory", traj, vehicle.dt)
    return 0


def cmd_plan(args) -> int:
    cfg, seed, stride = _settings(args)
    vehicle = Vehicle(cfg.vehicle, cfg.fluid)
    params = cfg.planner.params(seed, cfg.mode.morphing, args.threads)
    t0 = time.perf_counter()
    log = lambda h: _note(f"iter {h.iteration:3d}  best {h.best_so_far:.6f}") \
        if h.iteration % 10 == 0 else None
    result = plan(cfg.launch.state(), cfg.target, params, vehicle, log=log)
    fb = cfg.feedback
    q = np.diag(fb.q)
    r = np.diag([v for v, on in zip(fb.r, params.channels) if on])
    gains = synthesize(vehicle, cfg.launch.state(), result.sequence, params.channels, q, r,
                       fb.qf_scale * q, fb.eps, spacing=fb.knot_spacing)
    out = args.out
    io.write_text(os.path.join(out, "config.ini"), serialize_config(cfg))
    io.write_controls(os.path.join(out, "plan.csv"), result.sequence)
    io.write_gains(os.path.join(out, "gains.csv"), gains)
    io.write_convergence(os.path.join(out, "convergence.csv"), result)
    nominal = result.trajectory
    if stride > 0:
        nominal = vehicle.run(cfg.launch.state(), result.sequence.per_step(vehicle.dt),
                              snapshot_stride=stride)
    _save_trajectory(out, "nominal", nominal, vehicle.dt)
    _note(f"cost {result.initial_cost:.6f} -> {result.cost:.6f} in "
          f"{time.perf_counter() - t0:.1f} s")
    return 0


def cmd_ablation(args) -> int:
    cfg, seed, _ = _settings(args)
    n = cfg.ablation.seeds if args.seeds is None else args.seeds
    outcomes, plans = run_ablation(cfg, seed, n, args.threads, log=_note)
    table = format_table(outcomes, n)
    for mp in plans:
        if mp.error:
            table += f"{mp.label}: {mp.error}\n"
    io.write_text(os.path.join(args.out, "ablation.txt"), table)
    rows = [[i, j, c] for i, o in enumerate(outcomes) for j, c in enumerate(o.costs)]
    io.write_table(os.path.join(args.out, "ablation_costs.csv"), ["mode_index", "launch", "cost"],
              rows, {f"mode_{i}": o.label for i, o in enumerate(outcomes)})
    sys.stdout.write(table)
    return 0


def cmd_validate(args) -> int:
    text = report(run_all())
    io.write_text(os.path.join(args.out, "validation.txt"), text)
    sys.stdout.write(text)
    return 0


COMMANDS = {"simulate": cmd_simulate, "plan": cmd_plan, "ablation": cmd_ablation,
            "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        _note(f"config error: {exc}")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
