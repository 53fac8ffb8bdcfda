"""Delimited-text output for trajectories, wakes, plans and gain schedules.

Floats are written with ``repr`` so that a value read back is bit-identical.
Lines starting with ``#`` carry metadata and are skipped by the readers.
"""

from __future__ import annotations

import csv
import os
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .mppi import ControlSequence, PlanResult
from .tvlqr import GainSchedule
from .vehicle import Trajectory

FloatArray = NDArray[np.float64]

STATE_HEADER = ("x_m", "z_m", "theta_rad", "xdot_m_s", "zdot_m_s", "thetadot_rad_s",
                "sweep_left_rad", "sweep_right_rad", "elevator_rad")
RIGID_NAMES = ("x", "z", "theta", "xdot", "zdot", "thetadot")


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_table(path: str, header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k} = {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_table(path: str) -> tuple[dict[str, str], list[str], FloatArray]:
    """Return ``(metadata, header, values)`` of a file written here."""
    meta: dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                meta[k.strip()] = v.strip()
            elif line.strip():
                body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ValueError(f"{path}: no header")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    return meta, rows[0], data.reshape(len(rows) - 1, len(rows[0]))


def trajectory_header(n_slices: int) -> list[str]:
    return (["step", "time_s", *STATE_HEADER, "elevator_cmd_rad", "sweep_cmd_rad", "fx_N",
             "fz_N", "my_N_m"] + [f"wake_count_{i}" for i in range(n_slices)])


def write_trajectory(path: str, traj: Trajectory, meta: dict | None = None) -> None:
    """One row per record: time, full state, command held over the
    following step, aggregate load and per-slice particle counts."""
    n_slices = traj.wake_counts.shape[1] if traj.wake_counts.ndim == 2 else 0
    rows = ([k, traj.times[k], *traj.states[k], *traj.controls[k], *traj.loads[k],
             *(int(c) for c in traj.wake_counts[k])] for k in range(len(traj.times)))
    write_table(path, trajectory_header(n_slices), rows, meta)


def write_wake_snapshots(path: str, traj: Trajectory, dt: float) -> None:
    rows = []
    for step, wakes in traj.snapshots:
        for s, wake in enumerate(wakes):
            for i in range(len(wake)):
                rows.append([step, step * dt, s, i, wake.strengths[i], *wake.positions[i]])
    write_table(path, ["step", "time_s", "slice", "index", "gamma_m2_s", "x_m", "z_m"], rows)


def write_controls(path: str, seq: ControlSequence) -> None:
    rows = ([t, *u] for t, u in zip(seq.knot_times, seq.values))
    write_table(path, ["knot_time_s", "elevator_cmd_rad", "sweep_cmd_rad"], rows,
           {"knot_dt_s": fmt(seq.knot_dt)})


def read_controls(path: str) -> ControlSequence:
    """Inverse of :func:`write_controls`.  A file with no rows is an empty
    command list and raises; simulate handles that case separately."""
    meta, _, data = read_table(path)
    if "knot_dt_s" in meta:
        knot_dt = float(meta["knot_dt_s"])
    elif len(data) > 1:
        knot_dt = float(data[1, 0] - data[0, 0])
    else:
        raise ValueError(f"{path}: cannot infer knot spacing")
    if len(data) == 0:
        raise ValueError(f"{path}: no control knots")
    return ControlSequence(knot_dt, data[:, 1:3])


def write_gains(path: str, gains: GainSchedule) -> None:
    m = gains.n_inputs
    names = [c for c, on in zip(("elevator", "sweep"), gains.channels) if on]
    header = ["knot_time_s"] + [f"k_{names[i]}_{s}" for i in range(m) for s in RIGID_NAMES]
    rows = ([t, *K.ravel()] for t, K in zip(gains.times, gains.gains))
    meta = {"Q_diag": " ".join(fmt(v) for v in np.diag(gains.Q)),
            "R_diag": " ".join(fmt(v) for v in np.diag(gains.R)),
            "Qf_diag": " ".join(fmt(v) for v in np.diag(gains.Qf)),
            "channels": " ".join(names),
            "floored_knots": " ".join(str(k) for k in gains.floored) or "none"}
    write_table(path, header, rows, meta)


def read_gains(path: str) -> GainSchedule:
    meta, _, data = read_table(path)
    names = meta["channels"].split()
    channels = ("elevator" in names, "sweep" in names)
    diag = lambda key: np.diag([float(v) for v in meta[key].split()])
    m = len(names)
    gains = data[:, 1:].reshape(len(data), m, 6)
    floored = () if meta.get("floored_knots", "none") == "none" else tuple(
        int(v) for v in meta["floored_knots"].split())
    return GainSchedule(data[:, 0], gains, diag("Q_diag"), diag("R_diag"), diag("Qf_diag"),
                        channels, floored)


def write_convergence(path: str, result: PlanResult) -> None:
    header = ["iteration", "best_sample_cost", "mean_cost", "nominal_cost", "best_cost",
              "diverged_rollouts"]
    rows = [[0, result.initial_cost, result.initial_cost, result.initial_cost,
             result.initial_cost, 0]]
    rows += [[h.iteration, h.best_sample_cost, h.mean_cost, h.nominal_cost, h.best_so_far,
              h.diverged] for h in result.history]
    write_table(path, header, rows, {"temperature": fmt(result.temperature)})


def write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
