"""Time-varying LQR about a planned trajectory.

The coupled body/fluid dynamics are treated as a black box: each knot's
Jacobians come from central differences of a one-interval propagation that
restarts from a stored copy of the wake, so the plus and minus runs see the
same aerodynamic history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .mppi import ControlSequence, clamp_controls, wrap_angle
from .vehicle import (ControlInput, FluidState, SimulationDiverged, Trajectory, Vehicle,
                      VehicleState)

FloatArray = NDArray[np.float64]

N_STATE = 6
THETA = 2

# (knot index, rigid state, active controls) -> rigid state one interval later
Propagator = Callable[[int, FloatArray, FloatArray], FloatArray]


class LinearizationError(RuntimeError):
    """A knot could not be linearized even after shrinking the step."""


@dataclass(frozen=True)
class LinearizationKnot:
    time: float
    A: FloatArray
    B: FloatArray
    state: FloatArray
    control: FloatArray

    def __post_init__(self) -> None:
        for name in ("A", "B", "state", "control"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")


@dataclass(frozen=True)
class GainSchedule:
    """Zero-order-hold gains ``K[k]`` (``m x 6``) starting at ``times[k]``."""

    times: FloatArray
    gains: FloatArray
    Q: FloatArray
    R: FloatArray
    Qf: FloatArray
    channels: tuple[bool, bool] = (True, True)
    floored: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64)
        if len(t) == 0 or np.any(np.diff(t) <= 0):
            raise ValueError("knot times must be strictly increasing")
        if np.any(np.linalg.eigvalsh(0.5 * (self.R + self.R.T)) <= 0):
            raise ValueError("R must be positive definite")

    @property
    def n_inputs(self) -> int:
        return self.gains.shape[1]

    def gain_at(self, t: float) -> tuple[FloatArray, bool]:
        """Gain in force at ``t`` and whether ``t`` lies outside the schedule."""
        k = int(np.searchsorted(self.times, t + 1e-12, side="right")) - 1
        spacing = self.times[1] - self.times[0] if len(self.times) > 1 else 0.0
        outside = k < 0 or t > self.times[-1] + spacing + 1e-12
        return self.gains[min(max(k, 0), len(self.gains) - 1)], outside

    def shifted(self, dt: float) -> "GainSchedule":
        return GainSchedule(self.times + dt, self.gains, self.Q, self.R, self.Qf,
                            self.channels, self.floored)


def default_weights(n_inputs: int) -> tuple[FloatArray, FloatArray, FloatArray]:
    Q = np.diag([10.0, 10.0, 10.0, 1.0, 1.0, 1.0])
    return Q, np.eye(n_inputs), 10.0 * Q


def _scaled(eps: float, values: FloatArray) -> FloatArray:
    return eps * np.maximum(1.0, np.abs(values))


def linearize_fd(propagate: Propagator, times: ArrayLike, states: ArrayLike,
                 controls: ArrayLike, eps: float = 1e-4, retries: int = 2,
                 ) -> list[LinearizationKnot]:
    """Central-difference Jacobians of ``propagate`` at every knot.

    ``eps`` is relative to ``max(1, |value|)`` of each channel.  A perturbed
    run that diverges (or returns non-finite values) is retried with the
    step divided by ten, up to ``retries`` times.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    times = np.asarray(times, dtype=np.float64)
    X = np.asarray(states, dtype=np.float64).reshape(len(times), -1)
    U = np.asarray(controls, dtype=np.float64).reshape(len(times), -1)
    n, m = X.shape[1], U.shape[1]
    knots = []
    for k in range(len(times)):
        x0, u0 = X[k], U[k]
        for attempt in range(retries + 1):
            scale = eps * 10.0 ** (-attempt)
            try:
                A = np.empty((n, n))
                B = np.empty((n, m))
                hx, hu = _scaled(scale, x0), _scaled(scale, u0)
                for i in range(n):
                    e = np.zeros(n)
                    e[i] = hx[i]
                    A[:, i] = _difference(propagate(k, x0 + e, u0), propagate(k, x0 - e, u0),
                                          hx[i])
                for j in range(m):
                    e = np.zeros(m)
                    e[j] = hu[j]
                    B[:, j] = _difference(propagate(k, x0, u0 + e), propagate(k, x0, u0 - e),
                                          hu[j])
                if np.all(np.isfinite(A)) and np.all(np.isfinite(B)):
                    break
            except SimulationDiverged:
                pass
        else:
            raise LinearizationError(f"knot {k} at t={times[k]:.4f}: perturbed runs diverged")
        knots.append(LinearizationKnot(float(times[k]), A, B, x0.copy(), u0.copy()))
    return knots


def _difference(plus: FloatArray, minus: FloatArray, h: float) -> FloatArray:
    d = np.asarray(plus, dtype=np.float64) - np.asarray(minus, dtype=np.float64)
    if len(d) > THETA:
        d[THETA] = wrap_angle(d[THETA])
    return d / (2.0 * h)


def riccati_backward(knots: Sequence[LinearizationKnot], Q: ArrayLike, R: ArrayLike,
                     Qf: ArrayLike, channels: tuple[bool, bool] = (True, True)) -> GainSchedule:
    """Discrete Riccati recursion from ``Qf`` backwards over ``knots``.

    ``S`` is symmetrized each step; a negative eigenvalue from round-off is
    floored at zero and the knot index recorded in ``floored``.
    """
    if not knots:
        raise ValueError("no knots")
    Q = np.asarray(Q, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    S = np.array(Qf, dtype=np.float64)
    if np.any(np.linalg.eigvalsh(0.5 * (R + R.T)) <= 0):
        raise ValueError("R must be positive definite")
    gains = np.empty((len(knots), R.shape[0], Q.shape[0]))
    floored = []
    for k in range(len(knots) - 1, -1, -1):
        A, B = knots[k].A, knots[k].B
        BtS = B.T @ S
        K = np.linalg.solve(R + BtS @ B, BtS @ A)
        S = Q + A.T @ S @ (A - B @ K)
        S = 0.5 * (S + S.T)
        w, V = np.linalg.eigh(S)
        if w[0] < 0.0:
            floored.append(k)
            S = (V * np.maximum(w, 0.0)) @ V.T
            S = 0.5 * (S + S.T)
        gains[k] = K
    times = np.array([kn.time for kn in knots])
    return GainSchedule(times, gains, Q, R, np.asarray(Qf, dtype=np.float64), channels,
                        tuple(sorted(floored)))


@dataclass
class Nominal:
    """Planned controls with the trajectory they produce."""

    sequence: ControlSequence
    trajectory: Trajectory

    def state_at(self, t: float) -> FloatArray:
        times = self.trajectory.times
        k = int(np.clip(np.searchsorted(times, t - 1e-9), 0, len(times) - 1))
        return self.trajectory.states[k, :N_STATE]


def feedback_command(state: VehicleState, t: float, nominal: Nominal, gains: GainSchedule,
                     vehicle: Vehicle | None = None) -> tuple[ControlInput, bool]:
    """Nominal command minus ``K (x - x_nom)``, clamped; flags ``t`` past the
    schedule (the last gain is held)."""
    K, outside = gains.gain_at(t)
    err = state.rigid - nominal.state_at(t)
    err[THETA] = wrap_angle(err[THETA])
    u = nominal.sequence.at(t).copy()
    active = np.flatnonzero(gains.channels)
    u[active] -= K @ err
    geometry = (vehicle or Vehicle()).geometry
    u = clamp_controls(u, geometry)
    return ControlInput(float(u[0]), float(u[1])), outside


class VehiclePropagator:
    """Knot-to-knot propagation of the vehicle about a nominal plan.

    The nominal is simulated once; at every linearization knot (``spacing``
    apart, a whole number of simulator steps) the full vehicle state and a
    deep copy of the fluid state are stored.  ``__call__`` restarts from that
    copy with the rigid state replaced and the active commands offset by
    ``u - u_nominal(knot)`` over the interval, and returns the rigid state at
    the next knot.

    With ``co_moving`` (the default) a position perturbation also shifts the
    stored wake: in still air the flow is translation invariant, so the
    neighbouring trajectory carries the same wake displaced with the body.
    Without it the body is moved against a wake fixed in space, which mixes
    the body's sensitivity to its own wake geometry into the Jacobian.
    """

    def __init__(self, vehicle: Vehicle, initial: VehicleState, sequence: ControlSequence,
                 channels: tuple[bool, bool] = (True, True), fluid: FluidState | None = None,
                 spacing: float | None = None, co_moving: bool = True):
        self.vehicle = vehicle
        self.co_moving = co_moving
        self.sequence = sequence
        self.active = np.flatnonzero(channels)
        dt = vehicle.dt
        spacing = sequence.knot_dt if spacing is None else spacing
        self.steps = int(round(spacing / dt))
        if self.steps < 1 or abs(self.steps * dt - spacing) > 1e-9:
            raise ValueError("knot spacing must be a whole number of simulator steps")
        self.commands = sequence.per_step(dt)
        n_knots = len(self.commands) // self.steps
        if n_knots < 1:
            raise ValueError("horizon shorter than one knot interval")
        self.times = spacing * np.arange(n_knots)
        fluid = vehicle.initial_fluid() if fluid is None else fluid.copy()
        state = initial
        self.snapshots: list[tuple[VehicleState, FluidState]] = []
        for k in range(n_knots):
            self.snapshots.append((state, fluid.copy()))
            for u in self.commands[k * self.steps:(k + 1) * self.steps]:
                state, fluid, _ = vehicle.step(state, fluid, ControlInput(u[0], u[1]), dt)
        self.final_state = state

    @property
    def states(self) -> FloatArray:
        return np.array([s.rigid for s, _ in self.snapshots])

    @property
    def controls(self) -> FloatArray:
        return self.commands[::self.steps][:len(self.times)][:, self.active]

    def __call__(self, k: int, x: FloatArray, u: FloatArray) -> FloatArray:
        state0, fluid0 = self.snapshots[k]
        state = state0.with_rigid(x)
        if self.co_moving:
            fluid = fluid0.translated(x[0] - state0.x, x[1] - state0.z)
        else:
            fluid = fluid0.copy()
        cmds = self.commands[k * self.steps:(k + 1) * self.steps].copy()
        cmds[:, self.active] += np.asarray(u) - cmds[0, self.active]
        for c in cmds:
            state, fluid, _ = self.vehicle.step(state, fluid, ControlInput(c[0], c[1]))
        return state.rigid


def synthesize(vehicle: Vehicle, initial: VehicleState, sequence: ControlSequence,
               channels: tuple[bool, bool] = (True, True), Q=None, R=None, Qf=None,
               eps: float = 3e-2, fluid: FluidState | None = None,
               spacing: float | None = None) -> GainSchedule:
    """Linearize about the plan and run the backward recursion."""
    prop = VehiclePropagator(vehicle, initial, sequence, channels, fluid, spacing)
    knots = linearize_fd(prop, prop.times, prop.states, prop.controls, eps)
    q, r, qf = default_weights(len(prop.active))
    return riccati_backward(knots, q if Q is None else Q, r if R is None else R,
                            qf if Qf is None else Qf, channels)


@dataclass
class ClosedLoopResult:
    trajectory: Trajectory
    outside_schedule: int = 0
    diverged: bool = False
    extra: dict = field(default_factory=dict)


def simulate_closed_loop(vehicle: Vehicle, state: VehicleState, nominal: Nominal,
                         gains: GainSchedule | None, fluid: FluidState | None = None,
                         ) -> ClosedLoopResult:
    """Fly the nominal horizon with feedback every simulator step (or open
    loop when ``gains`` is ``None``).  A divergence ends the run early and
    the partial trajectory is returned with ``diverged`` set."""
    dt = vehicle.dt
    n = int(round(nominal.sequence.horizon / dt))
    fluid = vehicle.initial_fluid() if fluid is None else fluid.copy()
    states = [state.as_array()]
    applied = []
    loads = [np.zeros(3)]
    counts = [fluid.counts.copy()]
    outside = 0
    diverged = False
    for k in range(n):
        t = k * dt
        if gains is None:
            u = nominal.sequence.at(t)
            cmd = ControlInput(float(u[0]), float(u[1]))
        else:
            cmd, out = feedback_command(state, t, nominal, gains, vehicle)
            outside += int(out)
        applied.append((cmd.elevator_cmd, cmd.sweep_cmd))
        try:
            state, fluid, ld = vehicle.step(state, fluid, cmd, dt)
        except SimulationDiverged:
            diverged = True
            break
        states.append(state.as_array())
        loads.append(np.array([ld.force[0], ld.force[1], ld.moment]))
        counts.append(fluid.counts.copy())
    applied.append(applied[-1] if applied else (0.0, 0.0))
    m = len(states)
    traj = Trajectory(dt * np.arange(m), np.array(states), np.array(applied[:m]),
                      np.array(loads), np.array(counts), [])
    return ClosedLoopResult(traj, outside, diverged)


def gain_norms(gains: GainSchedule) -> FloatArray:
    return np.array([np.linalg.norm(K) for K in gains.gains])

