"""Sampling planner over piecewise-constant control sequences.

Rollouts go through :class:`vortexperch.vehicle.Vehicle`; every rollout
starts from a private copy of the initial fluid state, so rollouts are
independent and may run on a thread pool without changing the result.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .vehicle import (FluidState, SimulationDiverged, Trajectory, Vehicle, VehicleGeometry,
                      VehicleState)

FloatArray = NDArray[np.float64]

ELEVATOR, SWEEP = 0, 1


class PlanningError(RuntimeError):
    """Every rollout of an iteration diverged."""


@dataclass(frozen=True)
class ControlSequence:
    """Knot values ``(elevator_cmd, sweep_cmd)`` held for ``knot_dt`` each."""

    knot_dt: float
    values: FloatArray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64).reshape(-1, 2)
        if len(v) == 0 or not self.knot_dt > 0:
            raise ValueError("a control sequence needs a positive horizon")
        if not np.all(np.isfinite(v)):
            raise ValueError("control values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, horizon: float, knot_dt: float = 0.05) -> "ControlSequence":
        n = max(1, int(round(horizon / knot_dt)))
        return cls(knot_dt, np.zeros((n, 2)))

    @property
    def n_knots(self) -> int:
        return len(self.values)

    @property
    def horizon(self) -> float:
        return self.n_knots * self.knot_dt

    @property
    def knot_times(self) -> FloatArray:
        return self.knot_dt * np.arange(self.n_knots)

    def knot_index(self, t: float) -> int:
        k = int(math.floor(t / self.knot_dt + 1e-9))
        return min(max(k, 0), self.n_knots - 1)

    def at(self, t: float) -> FloatArray:
        return self.values[self.knot_index(t)]

    def per_step(self, dt: float) -> FloatArray:
        """Step-wise commands for a simulator with step ``dt`` (zero-order hold)."""
        n = int(round(self.horizon / dt))
        idx = np.minimum(np.floor(dt * np.arange(n) / self.knot_dt + 1e-9).astype(np.int64),
                         self.n_knots - 1)
        return self.values[idx]

    def clamped(self, geometry: VehicleGeometry) -> "ControlSequence":
        return ControlSequence(self.knot_dt, clamp_controls(self.values, geometry))


def actuator_bounds(geometry: VehicleGeometry) -> tuple[FloatArray, FloatArray]:
    lo = np.array([geometry.elevator_min, geometry.sweep_min])
    hi = np.array([geometry.elevator_max, geometry.sweep_max])
    return lo, hi


def clamp_controls(values: ArrayLike, geometry: VehicleGeometry) -> FloatArray:
    lo, hi = actuator_bounds(geometry)
    return np.clip(np.asarray(values, dtype=np.float64), lo, hi)


@dataclass(frozen=True)
class MppiParams:
    """Planner budget.

    ``temperature`` of ``None`` means ``temperature_scale`` times the cost of
    the initial nominal.  ``channels`` masks which inputs are perturbed; a
    fixed wing uses ``(True, False)``.
    """

    samples: int = 32
    iterations: int = 50
    sigma: tuple[float, float] = (math.radians(5.0), math.radians(10.0))
    temperature: float | None = None
    temperature_scale: float = 0.05
    seed: int = 0
    channels: tuple[bool, bool] = (True, True)
    horizon: float = 1.5
    knot_dt: float = 0.05
    threads: int = 1

    def __post_init__(self) -> None:
        if self.samples < 1 or self.iterations < 0:
            raise ValueError("samples must be >= 1 and iterations >= 0")
        if len(self.sigma) != 2 or not all(s > 0 for s in self.sigma):
            raise ValueError("sigma must hold two positive values")
        if self.temperature is not None and not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not self.temperature_scale > 0:
            raise ValueError("temperature_scale must be positive")
        if not (self.horizon > 0 and self.knot_dt > 0):
            raise ValueError("horizon and knot_dt must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def noise_scale(self) -> FloatArray:
        return np.array([s if on else 0.0 for s, on in zip(self.sigma, self.channels)])


@dataclass(frozen=True)
class TargetSpec:
    x: float = 3.5
    z: float = 0.0
    theta: float = math.radians(45.0)
    xdot: float = 0.5
    zdot: float = -0.5
    thetadot: float = 0.0
    velocity_weight: float = 0.2

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.as_array()) or not self.velocity_weight >= 0:
            raise ValueError("target entries must be finite")

    def as_array(self) -> FloatArray:
        return np.array([self.x, self.z, self.theta, self.xdot, self.zdot, self.thetadot])

    @classmethod
    def from_state(cls, state: VehicleState, **kw) -> "TargetSpec":
        return cls(*(float(v) for v in state.rigid), **kw)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def state_costs(states: ArrayLike, target: TargetSpec) -> FloatArray:
    """Per-sample pose + weighted-velocity squared error."""
    s = np.asarray(states, dtype=np.float64)
    s = s.reshape(-1, s.shape[-1])[:, :6]
    d = s - target.as_array()
    d[:, 2] = wrap_angle(d[:, 2])
    pose = d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2
    rate = d[:, 3] ** 2 + d[:, 4] ** 2 + d[:, 5] ** 2
    return pose + target.velocity_weight * rate


def trajectory_cost(traj: Trajectory | ArrayLike, target: TargetSpec) -> float:
    """Closest approach to ``target`` over all recorded states."""
    states = traj.states if isinstance(traj, Trajectory) else traj
    c = state_costs(states, target)
    if len(c) == 0:
        raise ValueError("empty trajectory")
    return float(np.min(c))


def sample_perturbations(nominal: ControlSequence, params: MppiParams,
                         rng: np.random.Generator,
                         geometry: VehicleGeometry | None = None) -> FloatArray:
    """``(K, n_knots, 2)`` clamped samples around ``nominal``.

    The normal draws are taken for both channels regardless of the mask so a
    given seed yields the same elevator noise for fixed and morphing runs.
    """
    noise = rng.standard_normal((params.samples, nominal.n_knots, 2)) * params.noise_scale
    out = nominal.values[None, :, :] + noise
    return clamp_controls(out, geometry or VehicleGeometry())


@dataclass
class RolloutModel:
    """A vehicle plus the initial condition every rollout starts from."""

    vehicle: Vehicle
    state: VehicleState
    fluid: FluidState | None = None

    def simulate(self, seq: ControlSequence) -> Trajectory:
        fluid = self.vehicle.initial_fluid() if self.fluid is None else self.fluid.copy()
        return self.vehicle.run(self.state, seq.per_step(self.vehicle.dt), fluid)

    def cost(self, seq: ControlSequence, target: TargetSpec) -> float:
        try:
            return trajectory_cost(self.simulate(seq), target)
        except SimulationDiverged:
            return math.inf


def _evaluate(model: RolloutModel, seqs: list[ControlSequence], target: TargetSpec,
              threads: int) -> FloatArray:
    if threads <= 1 or len(seqs) <= 1:
        return np.array([model.cost(s, target) for s in seqs])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(lambda s: model.cost(s, target), seqs)))


def softmin_weights(costs: ArrayLike, temperature: float) -> FloatArray:
    """Normalized ``exp(-(c - min c) / temperature)``; diverged samples get 0."""
    c = np.asarray(costs, dtype=np.float64)
    ok = np.isfinite(c)
    if not ok.any():
        raise PlanningError("all rollouts diverged")
    w = np.zeros_like(c)
    w[ok] = np.exp(-(c[ok] - c[ok].min()) / temperature)
    return w / math.fsum(w)


@dataclass
class IterationReport:
    iteration: int
    best_sample_cost: float
    mean_cost: float
    nominal_cost: float
    best_so_far: float
    diverged: int


def mppi_iterate(nominal: ControlSequence, model: RolloutModel, target: TargetSpec,
                 params: MppiParams, rng: np.random.Generator, temperature: float,
                 ) -> tuple[ControlSequence, FloatArray, FloatArray]:
    """One sample-weight-average update.

    Returns the new nominal, the ``(K, n_knots, 2)`` samples and their costs.
    Raises :class:`PlanningError` (nominal untouched) if every rollout
    diverged.
    """
    samples = sample_perturbations(nominal, params, rng, model.vehicle.geometry)
    seqs = [ControlSequence(nominal.knot_dt, s) for s in samples]
    costs = _evaluate(model, seqs, target, params.threads)
    w = softmin_weights(costs, temperature)
    # fixed summation order: the reduction does not depend on thread count
    new = np.tensordot(w, samples, axes=(0, 0))
    new = clamp_controls(new, model.vehicle.geometry)
    return ControlSequence(nominal.knot_dt, new), samples, costs


@dataclass
class PlanResult:
    sequence: ControlSequence
    trajectory: Trajectory
    cost: float
    initial_cost: float
    temperature: float
    history: list[IterationReport] = field(default_factory=list)
    wall_time: float = 0.0

    def history_array(self) -> FloatArray:
        return np.array([[h.iteration, h.best_sample_cost, h.mean_cost, h.nominal_cost,
                          h.best_so_far, h.diverged] for h in self.history]).reshape(-1, 6)


def plan(initial_state: VehicleState, target: TargetSpec, params: MppiParams,
         vehicle: Vehicle | None = None, fluid: FluidState | None = None,
         initial: ControlSequence | None = None,
         log: Callable[[IterationReport], None] | None = None) -> PlanResult:
    """Run the configured iterations from an all-zero nominal.

    The returned sequence is the cheapest one evaluated at any point (either
    a nominal or a sample), so the recorded best cost never increases.
    """
    t_start = time.perf_counter()
    vehicle = vehicle or Vehicle()
    model = RolloutModel(vehicle, initial_state, fluid)
    rng = np.random.default_rng(params.seed)
    nominal = initial or ControlSequence.zeros(params.horizon, params.knot_dt)
    nominal = nominal.clamped(vehicle.geometry)
    nominal_cost = model.cost(nominal, target)
    initial_cost = nominal_cost
    if params.temperature is not None:
        lam = params.temperature
    elif math.isfinite(initial_cost) and initial_cost > 0:
        lam = params.temperature_scale * initial_cost
    else:
        lam = params.temperature_scale
    best_seq, best_cost = nominal, nominal_cost
    history: list[IterationReport] = []
    for it in range(1, params.iterations + 1):
        nominal, samples, costs = mppi_iterate(nominal, model, target, params, rng, lam)
        nominal_cost = model.cost(nominal, target)
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_seq, best_cost = ControlSequence(nominal.knot_dt, samples[k]), float(costs[k])
        if nominal_cost < best_cost:
            best_seq, best_cost = nominal, nominal_cost
        fin = costs[np.isfinite(costs)]
        rep = IterationReport(it, float(costs[k]), float(fin.mean()), nominal_cost, best_cost,
                              int(len(costs) - len(fin)))
        history.append(rep)
        if log is not None:
            log(rep)
    traj = model.simulate(best_seq)
    return PlanResult(best_seq, traj, best_cost, initial_cost, lam, history,
                      time.perf_counter() - t_start)


def with_channels(params: MppiParams, morphing: bool) -> MppiParams:
    return replace(params, channels=(True, bool(morphing)))
