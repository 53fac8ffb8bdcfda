"""Planar morphing-sweep glider assembled from independent wing strips.

Body axes: x forward along the fuselage, z up, origin at the centre of
gravity.  World axes: x downrange, z up.  ``theta`` is the nose-up pitch
attitude.  Positive sweep swings the wing toward the nose.  Positive
elevator deflection puts the trailing edge down (nose-down moment).

Each half-wing is cut into spanwise strips.  The strip shown to the 2D
solver is the streamwise cut through a strip rotated by the sweep angle
about the root pivot: its quarter chord moves by ``r sin(sweep)`` along the
body axis, its chord grows as ``1 / cos(sweep)`` (capped) and its width
shrinks as ``cos(sweep)``.  Strips do not see each other's wakes.  Only the
starboard wing is simulated; its loads are doubled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

from .wake import Wake
from .wing import PLACEMENT_FRACTION, WingSection, _section_step

FloatArray = NDArray[np.float64]

GRAVITY = 9.81
MAX_SPEED = 200.0
MAX_RATE = 500.0

UNSTEADY = "unsteady"
QUASI_STEADY = "quasi-steady"
MODELS = (UNSTEADY, QUASI_STEADY)

# columns of the slice table
_KIND, _STATION, _WIDTH, _CHORD, _BX, _BZ, _FACTOR, _INCIDENCE = range(8)
_WING, _TAIL = 0.0, 1.0


class SimulationDiverged(RuntimeError):
    """The coupled simulation produced a non-finite or runaway state.

    ``trajectory`` holds the records produced before the failure.
    """

    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class VehicleGeometry:
    mass: float = 0.200
    inertia_yy: float = 0.004
    span: float = 0.70
    chord: float = 0.12
    fuselage_half_width: float = 0.05
    n_wing_slices: int = 4
    pivot_x: float = 0.02
    wing_z: float = 0.0
    wing_incidence: float = 0.0
    tail_x: float = -0.35
    tail_z: float = 0.0
    tail_chord: float = 0.08
    tail_span: float = 0.20
    sweep_min: float = -math.pi / 2
    sweep_max: float = math.pi / 6
    sweep_travel_time: float = 0.2
    chord_sweep_cap: float = math.radians(60.0)
    elevator_min: float = -math.radians(30.0)
    elevator_max: float = math.radians(30.0)
    elevator_rate_limit: float = 10.0
    fuselage_cda: float = 0.003
    fin_cda: float = 0.0004
    fin_x: float = -0.35
    rho: float = 1.225
    gravity: float = GRAVITY

    def __post_init__(self) -> None:
        for name in ("mass", "inertia_yy", "span", "chord", "tail_chord", "tail_span",
                     "sweep_travel_time", "elevator_rate_limit", "rho"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive")
        if self.n_wing_slices < 1:
            raise ValueError("n_wing_slices must be at least 1")
        if not self.sweep_min < self.sweep_max or not self.elevator_min < self.elevator_max:
            raise ValueError("actuator limits are inverted")
        if self.semispan_wing <= 0:
            raise ValueError("fuselage is wider than the span")
        if not 0 < self.chord_sweep_cap < math.pi / 2:
            raise ValueError("chord_sweep_cap must lie in (0, pi/2)")
        if self.fuselage_cda < 0 or self.fin_cda < 0:
            raise ValueError("drag areas must be non-negative")

    @property
    def semispan_wing(self) -> float:
        """Length of one wing panel from the root pivot to the tip."""
        return 0.5 * self.span - self.fuselage_half_width

    @property
    def sweep_rate_limit(self) -> float:
        return (self.sweep_max - self.sweep_min) / self.sweep_travel_time

    @property
    def n_slices(self) -> int:
        return self.n_wing_slices + 1

    def slice_table(self) -> FloatArray:
        n = self.n_wing_slices
        width = self.semispan_wing / n
        rows = [[_WING, (i + 0.5) * width, width, self.chord, self.pivot_x, self.wing_z, 2.0,
                 self.wing_incidence] for i in range(n)]
        rows.append([_TAIL, 0.0, self.tail_span, self.tail_chord, self.tail_x, self.tail_z, 1.0, 0.0])
        return np.array(rows, dtype=np.float64)


@dataclass(frozen=True)
class FluidConfig:
    n_bound: int = 16
    dt: float = 0.005
    core_fraction: float = 0.1
    merge_threshold: float = 0.05
    merge_radius_chords: float = 1.0
    near_field_chords: float = 2.0
    bound_core_panels: float = 1.0
    midpoint: bool = False
    model: str = UNSTEADY
    placement_fraction: float = PLACEMENT_FRACTION

    def __post_init__(self) -> None:
        if self.n_bound < 2:
            raise ValueError("n_bound must be at least 2")
        for name in ("dt", "core_fraction", "merge_radius_chords", "placement_fraction"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.merge_threshold < 0 or self.near_field_chords < 0:
            raise ValueError("merge_threshold and near_field_chords must be non-negative")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    z: float = 0.0
    theta: float = 0.0
    xdot: float = 0.0
    zdot: float = 0.0
    thetadot: float = 0.0
    sweep_left: float = 0.0
    sweep_right: float = 0.0
    elevator: float = 0.0

    @property
    def rigid(self) -> FloatArray:
        """``(x, z, theta, xdot, zdot, thetadot)``."""
        return np.array([self.x, self.z, self.theta, self.xdot, self.zdot, self.thetadot])

    @property
    def sweep(self) -> float:
        return 0.5 * (self.sweep_left + self.sweep_right)

    def as_array(self) -> FloatArray:
        return np.array([self.x, self.z, self.theta, self.xdot, self.zdot, self.thetadot,
                         self.sweep_left, self.sweep_right, self.elevator])

    @classmethod
    def from_array(cls, values: ArrayLike) -> "VehicleState":
        return cls(*(float(v) for v in np.asarray(values, dtype=np.float64)[:9]))

    def with_rigid(self, rigid: ArrayLike) -> "VehicleState":
        r = [float(v) for v in rigid]
        return replace(self, x=r[0], z=r[1], theta=r[2], xdot=r[3], zdot=r[4], thetadot=r[5])


STATE_COLUMNS = ("x", "z", "theta", "xdot", "zdot", "thetadot", "sweep_left", "sweep_right",
                 "elevator")


@dataclass(frozen=True)
class ControlInput:
    elevator_cmd: float = 0.0
    sweep_cmd: float = 0.0


@dataclass
class FluidState:
    """Per-slice wakes packed into fixed-capacity arrays plus step bookkeeping."""

    positions: FloatArray
    strengths: FloatArray
    counts: NDArray[np.int64]
    prev_cumulative: FloatArray
    has_previous: bool
    le_released: FloatArray
    gamma_initial: FloatArray
    bound_strengths: FloatArray

    @classmethod
    def empty(cls, n_slices: int, n_bound: int, capacity: int = 64) -> "FluidState":
        return cls(np.zeros((n_slices, capacity, 2)), np.zeros((n_slices, capacity)),
                   np.zeros(n_slices, dtype=np.int64), np.zeros((n_slices, n_bound)), False,
                   np.zeros(n_slices), np.zeros(n_slices), np.zeros((n_slices, n_bound)))

    @property
    def n_slices(self) -> int:
        return len(self.counts)

    def wake(self, i: int) -> Wake:
        m = int(self.counts[i])
        return Wake(self.positions[i, :m].copy(), self.strengths[i, :m].copy())

    def total_circulation(self, i: int) -> float:
        m = int(self.counts[i])
        return math.fsum(self.strengths[i, :m]) + math.fsum(self.bound_strengths[i])

    def ensure_capacity(self, extra: int) -> None:
        need = int(self.counts.max(initial=0)) + extra
        cap = self.strengths.shape[1]
        if need <= cap:
            return
        new_cap = max(need, 2 * cap)
        s = self.n_slices
        pos = np.zeros((s, new_cap, 2))
        gam = np.zeros((s, new_cap))
        pos[:, :cap] = self.positions
        gam[:, :cap] = self.strengths
        self.positions, self.strengths = pos, gam

    def translated(self, dx: float, dz: float) -> "FluidState":
        """Copy with every particle shifted by ``(dx, dz)``."""
        out = self.copy()
        out.positions[..., 0] += dx
        out.positions[..., 1] += dz
        return out

    def copy(self) -> "FluidState":
        return FluidState(self.positions.copy(), self.strengths.copy(), self.counts.copy(),
                          self.prev_cumulative.copy(), self.has_previous,
                          self.le_released.copy(), self.gamma_initial.copy(),
                          self.bound_strengths.copy())


@dataclass
class StepLoads:
    force: FloatArray
    moment: float
    residual: float


@dataclass
class Trajectory:
    """Time-stamped records; row ``k`` is the state after ``k`` steps.

    ``controls[k]`` is the command applied during step ``k`` (the last row
    repeats the final command) and ``loads[k]`` the aerodynamic force and
    moment computed during the step that produced row ``k``.
    """

    times: FloatArray
    states: FloatArray
    controls: FloatArray
    loads: FloatArray
    wake_counts: NDArray[np.int64]
    snapshots: list[tuple[int, list[Wake]]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def rigid(self) -> FloatArray:
        return self.states[:, :6]

    def state(self, k: int) -> VehicleState:
        return VehicleState.from_array(self.states[k])


# ---------------------------------------------------------------------------
# kinematics shared by both aerodynamic models
# ---------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _slice_kinematics(row, s6, sweep, sweep_rate, elev, elev_rate, chord_cap):
    """World reference point, velocity, attitude, rate, chord, chord rate and
    strip width of one slice.  The reference point is the quarter chord."""
    x, z, th, xd, zd, thd = s6[0], s6[1], s6[2], s6[3], s6[4], s6[5]
    c = math.cos(th)
    s = math.sin(th)
    if row[_KIND] == _WING:
        r = row[_STATION]
        sl = math.sin(sweep)
        cl = math.cos(sweep)
        bx = row[_BX] + r * sl
        bz = row[_BZ]
        bvx = r * cl * sweep_rate
        if abs(sweep) < chord_cap:
            chord = row[_CHORD] / cl
            chord_rate = row[_CHORD] * sl / (cl * cl) * sweep_rate
        else:
            chord = row[_CHORD] / math.cos(chord_cap)
            chord_rate = 0.0
        width = row[_WIDTH] * max(cl, 0.0)
        attitude = th + row[_INCIDENCE]
        omega = thd
    else:
        bx = row[_BX]
        bz = row[_BZ]
        bvx = 0.0
        chord = row[_CHORD]
        chord_rate = 0.0
        width = row[_WIDTH]
        attitude = th + elev
        omega = thd + elev_rate
    wx = c * bx - s * bz
    wz = s * bx + c * bz
    ref = np.empty(2)
    ref[0] = x + wx
    ref[1] = z + wz
    vel = np.empty(2)
    vel[0] = xd - thd * wz + c * bvx
    vel[1] = zd + thd * wx + s * bvx
    return ref, vel, attitude, omega, chord, chord_rate, width * row[_FACTOR]


@numba.njit(cache=True, nogil=True)
def _flat_plate_coefficients(alpha):
    """Quasi-steady flat-plate lift/drag coefficients and centre of pressure
    (fraction of chord from the leading edge)."""
    sc = math.sin(alpha) * math.cos(alpha)
    blend = 1.0 / (1.0 + math.exp(-(abs(alpha) - math.radians(15.0)) / math.radians(3.0)))
    cl = (1.0 - blend) * 2.0 * math.pi * sc + blend * 2.0 * sc
    cd = 0.02 + 2.0 * math.sin(alpha) ** 2
    xcp = 0.25 + 0.25 * blend
    return cl, cd, xcp


@numba.njit(cache=True, nogil=True)
def _qs_slice(ref, attitude, vel, omega, chord, rho, moment_ref):
    """Quasi-steady load per unit span of a plate whose quarter chord is ``ref``."""
    tx = -math.cos(attitude)
    tz = -math.sin(attitude)
    nx = -tz
    nz = tx
    # incidence seen at the three-quarter chord point
    px = ref[0] + 0.5 * chord * tx
    pz = ref[1] + 0.5 * chord * tz
    ux = -(vel[0] - omega * (pz - ref[1]))
    uz = -(vel[1] + omega * (px - ref[0]))
    speed2 = ux * ux + uz * uz
    if speed2 == 0.0:
        return 0.0, 0.0, 0.0
    speed = math.sqrt(speed2)
    alpha = math.atan2(ux * nx + uz * nz, ux * tx + uz * tz)
    cl, cd, xcp = _flat_plate_coefficients(alpha)
    q = 0.5 * rho * speed2 * chord
    lx = -uz / speed
    lz = ux / speed
    fx = q * (cl * lx + cd * ux / speed)
    fz = q * (cl * lz + cd * uz / speed)
    cx = ref[0] + (xcp - 0.25) * chord * tx
    cz = ref[1] + (xcp - 0.25) * chord * tz
    my = (cx - moment_ref[0]) * fz - (cz - moment_ref[1]) * fx
    return fx, fz, my


@numba.njit(cache=True, nogil=True)
def _parasite(s6, x_ref, cda, rho):
    """Drag of a non-lifting surface whose reference point sits at body ``x_ref``."""
    c = math.cos(s6[2])
    s = math.sin(s6[2])
    wx = c * x_ref
    wz = s * x_ref
    vx = s6[3] - s6[5] * wz
    vz = s6[4] + s6[5] * wx
    sp = math.sqrt(vx * vx + vz * vz)
    k = -0.5 * rho * cda * sp
    fx = k * vx
    fz = k * vz
    return fx, fz, wx * fz - wz * fx


@numba.njit(cache=True, nogil=True)
def _advance(s6, sweep, sweep_rate, elev, elev_rate, table, chord_cap, quasi,
             wpos, wgam, counts, prev_cum, has_prev, le_rel, gamma0, bound_out,
             n_bound, dt, rho, core_fraction, fraction, merge_thr, merge_radius_chords,
             near_chords, midpoint, bound_core_panels, mass, iyy, g, fus_cda, fin_cda, fin_x):
    """One coupled step; returns the new rigid state, aero loads and residual."""
    fx = 0.0
    fz = 0.0
    my = 0.0
    res = 0.0
    cg = np.empty(2)
    cg[0] = s6[0]
    cg[1] = s6[1]
    ambient = np.zeros(2)
    for k in range(table.shape[0]):
        row = table[k]
        ref, vel, att, om, chord, chord_rate, width = _slice_kinematics(
            row, s6, sweep, sweep_rate, elev, elev_rate, chord_cap)
        if quasi:
            ax, az, am = _qs_slice(ref, att, vel, om, chord, rho, cg)
        else:
            base = row[_CHORD]
            m, le_new, ax, az, am, r, gb = _section_step(
                ref, att, vel, om, chord, chord_rate, 0.25, n_bound, True, ambient, dt, rho,
                core_fraction * base, fraction, cg, wpos[k], wgam[k], counts[k], prev_cum[k],
                has_prev, le_rel[k], gamma0[k], merge_thr, merge_radius_chords * base,
                near_chords * base, midpoint, bound_core_panels * chord / n_bound)
            counts[k] = m
            le_rel[k] = le_new
            bound_out[k, :] = gb
            if r > res:
                res = r
        fx += ax * width
        fz += az * width
        my += am * width
    for xr, cda in ((0.0, fus_cda), (fin_x, fin_cda)):
        px, pz, pm = _parasite(s6, xr, cda, rho)
        fx += px
        fz += pz
        my += pm
    out = np.empty(6)
    out[3] = s6[3] + dt * fx / mass
    out[4] = s6[4] + dt * (fz / mass - g)
    out[5] = s6[5] + dt * my / iyy
    out[0] = s6[0] + dt * out[3]
    out[1] = s6[1] + dt * out[4]
    out[2] = s6[2] + dt * out[5]
    return out, fx, fz, my, res


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def clamp_sweep(geometry: VehicleGeometry, sweep: float) -> tuple[float, bool]:
    clamped = min(max(sweep, geometry.sweep_min), geometry.sweep_max)
    return clamped, clamped != sweep


def assemble_slices(geometry: VehicleGeometry, state: VehicleState,
                    n_bound: int = 16) -> tuple[list[WingSection], list[float], bool]:
    """Sections (pose and motion at the quarter chord) for every slice.

    Returns the sections, their strip widths (including the mirror factor)
    and whether the sweep had to be clamped.  Actuator rates are not part of
    the state, so the returned sections carry only rigid-body motion.
    """
    sweep, flagged = clamp_sweep(geometry, state.sweep)
    s6 = state.rigid
    sections, widths = [], []
    for row in geometry.slice_table():
        ref, vel, att, om, chord, chord_rate, width = _slice_kinematics(
            row, s6, sweep, 0.0, state.elevator, 0.0, geometry.chord_sweep_cap)
        sections.append(WingSection(chord=chord, n_bound=n_bound, position=ref, theta=att,
                                    ref_fraction=0.25, velocity=vel, omega=om,
                                    chord_rate=chord_rate))
        widths.append(width)
    return sections, widths, flagged


def quasi_steady_contribution(state: VehicleState,
                              geometry: VehicleGeometry) -> tuple[FloatArray, float]:
    """Parasite drag of the fuselage and fin, moment about the centre of gravity."""
    s6 = state.rigid
    fx = fz = my = 0.0
    for xr, cda in ((0.0, geometry.fuselage_cda), (geometry.fin_x, geometry.fin_cda)):
        px, pz, pm = _parasite(s6, xr, cda, geometry.rho)
        fx, fz, my = fx + px, fz + pz, my + pm
    return np.array([fx, fz]), my


def quasi_steady_slice_loads(geometry: VehicleGeometry,
                             state: VehicleState) -> tuple[FloatArray, float]:
    """Flat-plate quasi-steady loads of all lifting slices (no fuselage/fin)."""
    s6 = state.rigid
    sweep, _ = clamp_sweep(geometry, state.sweep)
    fx = fz = my = 0.0
    for row in geometry.slice_table():
        ref, vel, att, om, chord, _cr, width = _slice_kinematics(
            row, s6, sweep, 0.0, state.elevator, 0.0, geometry.chord_sweep_cap)
        ax, az, am = _qs_slice(ref, att, vel, om, chord, geometry.rho, s6[:2].copy())
        fx, fz, my = fx + ax * width, fz + az * width, my + am * width
    return np.array([fx, fz]), my


class Vehicle:
    """Coupled body and fluid stepping for one geometry and fluid setting."""

    def __init__(self, geometry: VehicleGeometry | None = None,
                 fluid: FluidConfig | None = None):
        self.geometry = geometry or VehicleGeometry()
        self.config = fluid or FluidConfig()
        self._table = self.geometry.slice_table()

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def quasi_steady(self) -> bool:
        return self.config.model == QUASI_STEADY

    def initial_fluid(self) -> FluidState:
        return FluidState.empty(self.geometry.n_slices, self.config.n_bound)

    def actuate(self, state: VehicleState, command: ControlInput,
                dt: float) -> tuple[float, float, float, float]:
        """Rate-limit and clamp the commands; returns the new sweep, sweep
        rate, elevator and elevator rate over the step."""
        g = self.geometry
        target = min(max(command.sweep_cmd, g.sweep_min), g.sweep_max)
        old = state.sweep
        lim = g.sweep_rate_limit * dt
        sweep = old + min(max(target - old, -lim), lim)
        sweep = min(max(sweep, g.sweep_min), g.sweep_max)
        target = min(max(command.elevator_cmd, g.elevator_min), g.elevator_max)
        lim = g.elevator_rate_limit * dt
        elev = state.elevator + min(max(target - state.elevator, -lim), lim)
        elev = min(max(elev, g.elevator_min), g.elevator_max)
        return sweep, (sweep - old) / dt, elev, (elev - state.elevator) / dt

    def step(self, state: VehicleState, fluid: FluidState, command: ControlInput,
             dt: float | None = None) -> tuple[VehicleState, FluidState, StepLoads]:
        """Advance one step.  ``fluid`` is updated in place and returned."""
        dt = self.config.dt if dt is None else float(dt)
        if not dt > 0:
            raise ValueError("dt must be positive")
        g, c = self.geometry, self.config
        sweep, sweep_rate, elev, elev_rate = self.actuate(state, command, dt)
        fluid.ensure_capacity(2)
        s6 = state.rigid
        try:
            new6, fx, fz, my, res = _advance(
                s6, sweep, sweep_rate, elev, elev_rate, self._table, g.chord_sweep_cap,
                self.quasi_steady, fluid.positions, fluid.strengths, fluid.counts,
                fluid.prev_cumulative, fluid.has_previous, fluid.le_released,
                fluid.gamma_initial, fluid.bound_strengths, c.n_bound, dt, g.rho,
                c.core_fraction, c.placement_fraction, c.merge_threshold,
                c.merge_radius_chords, c.near_field_chords, c.midpoint, c.bound_core_panels, g.mass,
                g.inertia_yy, g.gravity, g.fuselage_cda, g.fin_cda, g.fin_x)
        except Exception as exc:  # singular boundary solve inside the compiled step
            raise SimulationDiverged(f"fluid solve failed: {exc}") from exc
        if not self.quasi_steady:
            fluid.has_previous = True
        if (not np.all(np.isfinite(new6)) or math.hypot(new6[3], new6[4]) > MAX_SPEED
                or abs(new6[5]) > MAX_RATE):
            raise SimulationDiverged("vehicle state diverged")
        new_state = VehicleState(*(float(v) for v in new6), sweep, sweep, elev)
        return new_state, fluid, StepLoads(np.array([fx, fz]), my, res)

    def run(self, state: VehicleState, controls: ArrayLike, fluid: FluidState | None = None,
            snapshot_stride: int = 0, t0: float = 0.0) -> Trajectory:
        """Simulate ``len(controls)`` steps; ``controls`` rows are
        ``(elevator_cmd, sweep_cmd)`` held over one step each."""
        u = np.asarray(controls, dtype=np.float64).reshape(-1, 2)
        fluid = self.initial_fluid() if fluid is None else fluid
        n = len(u)
        dt = self.config.dt
        states = np.empty((n + 1, 9))
        loads = np.zeros((n + 1, 3))
        counts = np.zeros((n + 1, fluid.n_slices), dtype=np.int64)
        applied = np.zeros((n + 1, 2))
        states[0] = state.as_array()
        counts[0] = fluid.counts
        snaps: list[tuple[int, list[Wake]]] = []
        if snapshot_stride > 0:
            snaps.append((0, [fluid.wake(i) for i in range(fluid.n_slices)]))
        for k in range(n):
            applied[k] = u[k]
            try:
                state, fluid, ld = self.step(state, fluid, ControlInput(u[k, 0], u[k, 1]), dt)
            except SimulationDiverged as exc:
                applied[k + 1:] = u[k]
                exc.trajectory = Trajectory(t0 + dt * np.arange(k + 1), states[:k + 1].copy(),
                                            applied[:k + 1].copy(), loads[:k + 1].copy(),
                                            counts[:k + 1].copy(), snaps)
                raise
            states[k + 1] = state.as_array()
            loads[k + 1] = (ld.force[0], ld.force[1], ld.moment)
            counts[k + 1] = fluid.counts
            if snapshot_stride > 0 and (k + 1) % snapshot_stride == 0:
                snaps.append((k + 1, [fluid.wake(i) for i in range(fluid.n_slices)]))
        if n:
            applied[n] = u[n - 1]
        return Trajectory(t0 + dt * np.arange(n + 1), states, applied, loads, counts, snaps)


def step(vehicle: Vehicle, state: VehicleState, fluid: FluidState, command: ControlInput,
         dt: float | None = None) -> tuple[VehicleState, FluidState, StepLoads]:
    return vehicle.step(state, fluid, command, dt)


def run(vehicle: Vehicle, state: VehicleState, controls: ArrayLike,
        fluid: FluidState | None = None, snapshot_stride: int = 0) -> Trajectory:
    return vehicle.run(state, controls, fluid, snapshot_stride)
