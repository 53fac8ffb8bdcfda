"""Thin flat-plate section: bound vortex sheet, edge shedding and loads.

Geometry conventions
--------------------
``theta`` is the attitude of the nose (trailing edge -> leading edge
direction), measured counter-clockwise from +x with z up.  The chord
tangent points from the leading edge to the trailing edge and the section
normal is that tangent rotated +90 degrees.  With these conventions a
positive pressure jump pushes along the normal, and a sheet carrying
positive circulation speeds up the air on the normal side.

The section carries ``n_bound`` bound vortices at the centres of equal
panels.  Control points sit on the panel boundaries, including both edges,
giving ``n_bound + 1`` no-through-flow conditions.  With a new particle shed
from each edge plus Kelvin's theorem the system is square.  When leading-edge
shedding is switched off the leading-edge control point is dropped, which is
the classical attached-flow (trailing-edge Kutta) discretisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

from .kernel import KernelConfig, add_induced, _pair_regularized, _pair_singular
from .wake import _convect as _convect_core, _merge as _merge_core

FloatArray = NDArray[np.float64]

PLACEMENT_FRACTION = 1.0 / 3.0
MIN_OFFSET_PANELS = 0.25
MIN_OFFSET_CORES = 1.0
LE_MAX_OFFSET = 1.5
# shed strengths are multiples of this (m^2/s), which makes their sums exact
STRENGTH_QUANTUM = 2.0**-50


class BoundarySolveError(RuntimeError):
    """The boundary-condition system could not be solved reliably."""


@dataclass(frozen=True)
class FluidDensity:
    rho: float = 1.225

    def __post_init__(self) -> None:
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError("rho must be positive")


@dataclass
class WingSection:
    """A thin flat plate discretised into ``n_bound`` lumped vortices.

    The reference point sits ``ref_fraction`` of the chord behind the leading
    edge; ``position``/``velocity``/``omega`` describe that point.
    ``chord_rate`` lets the chord stretch about the reference point (used by
    swept slices whose streamwise chord changes with sweep).
    """

    chord: float
    n_bound: int = 16
    position: FloatArray = field(default_factory=lambda: np.zeros(2))
    theta: float = 0.0
    ref_fraction: float = 0.0
    velocity: FloatArray = field(default_factory=lambda: np.zeros(2))
    omega: float = 0.0
    chord_rate: float = 0.0
    shed_leading_edge: bool = True

    # world-frame geometry, refreshed by geometry_update
    tangent: FloatArray = field(init=False, repr=False)
    normal: FloatArray = field(init=False, repr=False)
    leading_edge: FloatArray = field(init=False, repr=False)
    trailing_edge: FloatArray = field(init=False, repr=False)
    bound_world: FloatArray = field(init=False, repr=False)
    control_world: FloatArray = field(init=False, repr=False)
    bound_surface_velocity: FloatArray = field(init=False, repr=False)
    control_surface_velocity: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not (self.chord > 0 and np.isfinite(self.chord)):
            raise ValueError("chord must be positive")
        if self.n_bound < 2:
            raise ValueError("n_bound must be at least 2")
        self.position = np.asarray(self.position, dtype=np.float64).copy()
        self.velocity = np.asarray(self.velocity, dtype=np.float64).copy()
        if not (np.all(np.isfinite(self.position)) and np.isfinite(self.theta)):
            raise ValueError("pose must be finite")
        self._refresh()

    @property
    def panel_length(self) -> float:
        return self.chord / self.n_bound

    @property
    def panel_lengths(self) -> FloatArray:
        return np.full(self.n_bound, self.panel_length)

    @property
    def bound_positions(self) -> FloatArray:
        """Chordwise stations of the bound vortices, measured from the leading edge."""
        return (np.arange(self.n_bound) + 0.5) * self.panel_length

    @property
    def control_points(self) -> FloatArray:
        """Chordwise stations of the control points."""
        k = np.arange(self.n_bound + 1) if self.shed_leading_edge else np.arange(1, self.n_bound + 1)
        return k * self.panel_length

    @property
    def n_unknowns(self) -> int:
        return self.n_bound + (2 if self.shed_leading_edge else 1)

    def _refresh(self) -> None:
        n = self.n_bound
        self.tangent = np.array([-np.cos(self.theta), -np.sin(self.theta)])
        self.normal = np.array([-self.tangent[1], self.tangent[0]])
        self.leading_edge = self.position - self.ref_fraction * self.chord * self.tangent
        self.trailing_edge = self.leading_edge + self.chord * self.tangent
        self.bound_world = np.empty((n, 2))
        self.control_world = np.empty((n + 1 if self.shed_leading_edge else n, 2))
        _layout(self.leading_edge, self.tangent, self.chord, n, self.shed_leading_edge,
                self.bound_world, self.control_world)
        self.bound_surface_velocity = _surface_velocity(
            self.bound_world, self.leading_edge, self.tangent, self.chord, self.position,
            self.velocity, self.omega, self.ref_fraction, self.chord_rate)
        self.control_surface_velocity = _surface_velocity(
            self.control_world, self.leading_edge, self.tangent, self.chord, self.position,
            self.velocity, self.omega, self.ref_fraction, self.chord_rate)


@dataclass
class BoundSolution:
    bound_strengths: FloatArray
    new_le_strength: float
    new_te_strength: float
    strength_rates: FloatArray | None = None
    residual: float = 0.0
    condition: float = 1.0


@dataclass
class LinearSystem:
    matrix: FloatArray
    rhs: FloatArray
    shed_positions: FloatArray  # rows: leading-edge particle (if shed), trailing-edge particle
    shed_leading_edge: bool


# ---------------------------------------------------------------------------
# compiled cores, shared with the fused vehicle step
# ---------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _layout(le, tang, chord, n, shed_le, bound_out, cp_out):
    dl = chord / n
    for i in range(n):
        s = (i + 0.5) * dl
        bound_out[i, 0] = le[0] + s * tang[0]
        bound_out[i, 1] = le[1] + s * tang[1]
    k0 = 0 if shed_le else 1
    for k in range(k0, n + 1):
        s = k * dl
        cp_out[k - k0, 0] = le[0] + s * tang[0]
        cp_out[k - k0, 1] = le[1] + s * tang[1]


@numba.njit(cache=True, nogil=True)
def _surface_velocity(points, le, tang, chord, ref, vel, omega, ref_fraction, chord_rate):
    out = np.empty_like(points)
    for i in range(points.shape[0]):
        rx = points[i, 0] - ref[0]
        rz = points[i, 1] - ref[1]
        xi = ((points[i, 0] - le[0]) * tang[0] + (points[i, 1] - le[1]) * tang[1]) / chord
        stretch = chord_rate * (xi - ref_fraction)
        out[i, 0] = vel[0] - omega * rz + stretch * tang[0]
        out[i, 1] = vel[1] + omega * rx + stretch * tang[1]
    return out


@numba.njit(cache=True, nogil=True)
def _place(edge, outward, prev, has_prev, v_rel, fraction, dt, min_offset, max_offset):
    """Nascent particle location for one edge.

    The offset from the edge is clipped to ``[min_offset, max_offset]``
    (no upper bound when ``max_offset <= 0``).
    """
    if has_prev:
        dx = fraction * (prev[0] - edge[0])
        dz = fraction * (prev[1] - edge[1])
    else:
        speed = np.sqrt(v_rel[0] ** 2 + v_rel[1] ** 2)
        if speed > 0.0:
            dx = fraction * dt * v_rel[0]
            dz = fraction * dt * v_rel[1]
        else:
            dx = 0.0
            dz = 0.0
    d2 = dx * dx + dz * dz
    if d2 < min_offset * min_offset:
        dx = min_offset * outward[0]
        dz = min_offset * outward[1]
    elif max_offset > 0.0 and d2 > max_offset * max_offset:
        k = max_offset / np.sqrt(d2)
        dx *= k
        dz *= k
    out = np.empty(2)
    out[0] = edge[0] + dx
    out[1] = edge[1] + dz
    return out


@numba.njit(cache=True, nogil=True)
def _edge_relative_velocity(edge, edge_vel, ambient, wake_pos, wake_gam, n_wake, core):
    tmp = np.zeros((1, 2))
    pt = np.empty((1, 2))
    pt[0, 0] = edge[0]
    pt[0, 1] = edge[1]
    add_induced(wake_pos, wake_gam, n_wake, True, core, pt, tmp)
    v = np.empty(2)
    v[0] = ambient[0] + tmp[0, 0] - edge_vel[0]
    v[1] = ambient[1] + tmp[0, 1] - edge_vel[1]
    return v


@numba.njit(cache=True, nogil=True)
def _shed_positions(le, te, tang, chord, n, shed_le, cp_vel, ambient, wake_pos, wake_gam,
                    n_wake, core, has_prev, fraction, dt):
    """Placement of the nascent LE/TE particles.

    The previously shed particles are the newest wake entries: the leading-edge
    one at ``n_wake - 2`` and the trailing-edge one at ``n_wake - 1`` (only the
    latter when leading-edge shedding is off).
    """
    min_off = max(MIN_OFFSET_PANELS * chord / n, MIN_OFFSET_CORES * core)
    out = np.zeros((2, 2))
    te_out = np.empty(2)
    te_out[0] = tang[0]
    te_out[1] = tang[1]
    le_out = np.empty(2)
    le_out[0] = -tang[0]
    le_out[1] = -tang[1]
    prev = np.zeros(2)
    ncp = cp_vel.shape[0]
    if shed_le:
        v_rel = _edge_relative_velocity(le, cp_vel[0], ambient, wake_pos, wake_gam, n_wake, core)
        if has_prev:
            prev[0] = wake_pos[n_wake - 2, 0]
            prev[1] = wake_pos[n_wake - 2, 1]
        p = _place(le, le_out, prev, has_prev, v_rel, fraction, dt, min_off, LE_MAX_OFFSET * max(core, chord / n))
        out[0, 0] = p[0]
        out[0, 1] = p[1]
    v_rel = _edge_relative_velocity(te, cp_vel[ncp - 1], ambient, wake_pos, wake_gam, n_wake, core)
    if has_prev:
        prev[0] = wake_pos[n_wake - 1, 0]
        prev[1] = wake_pos[n_wake - 1, 1]
    p = _place(te, te_out, prev, has_prev, v_rel, fraction, dt, min_off, 0.0)
    out[1, 0] = p[0]
    out[1, 1] = p[1]
    return out


@numba.njit(cache=True, nogil=True)
def _assemble(bound, cps, normal, shed, shed_le, wake_pos, wake_gam, n_wake, core, ambient,
              cp_vel, gamma_total):
    n = bound.shape[0]
    ncp = cps.shape[0]
    m = ncp + 1
    mat = np.zeros((m, m))
    rhs = np.zeros(m)
    core2 = core * core
    nx = normal[0]
    nz = normal[1]
    for i in range(ncp):
        cx = cps[i, 0]
        cz = cps[i, 1]
        for j in range(n):
            u, w = _pair_singular(1.0, cx - bound[j, 0], cz - bound[j, 1])
            mat[i, j] = u * nx + w * nz
        col = n
        if shed_le:
            u, w = _pair_regularized(1.0, cx - shed[0, 0], cz - shed[0, 1], core2)
            mat[i, col] = u * nx + w * nz
            col += 1
        u, w = _pair_regularized(1.0, cx - shed[1, 0], cz - shed[1, 1], core2)
        mat[i, col] = u * nx + w * nz
    known = np.zeros((ncp, 2))
    add_induced(wake_pos, wake_gam, n_wake, True, core, cps, known)
    for i in range(ncp):
        vx = ambient[0] + known[i, 0] - cp_vel[i, 0]
        vz = ambient[1] + known[i, 1] - cp_vel[i, 1]
        rhs[i] = -(vx * nx + vz * nz)
    wake_sum = 0.0
    for k in range(n_wake):
        wake_sum += wake_gam[k]
    for j in range(m):
        mat[ncp, j] = 1.0
    rhs[ncp] = gamma_total - wake_sum
    return mat, rhs


@numba.njit(cache=True, nogil=True)
def _solve(mat, rhs):
    x = np.linalg.solve(mat, rhs)
    r = mat @ x - rhs
    res = 0.0
    for i in range(r.shape[0]):
        if abs(r[i]) > res:
            res = abs(r[i])
    return x, res


@numba.njit(cache=True, nogil=True)
def _pressure(bound, tang, panel_len, gb, le_total, prev_cum, has_prev, dt, rho,
              wake_pos, wake_gam, n_wake, core, ambient, bound_vel):
    """Pressure jump per bound vortex and the cumulative circulation used for d/dt.

    ``le_total`` is the circulation released from the leading edge so far
    (including this step's particle); it is the potential jump carried into
    the surface at the leading edge.
    """
    n = bound.shape[0]
    vel = np.zeros((n, 2))
    add_induced(wake_pos, wake_gam, n_wake, True, core, bound, vel)
    add_induced(bound, gb, n, False, core, bound, vel)  # self term skipped
    dp = np.empty(n)
    cum = np.empty(n)
    acc = le_total
    for i in range(n):
        acc += gb[i]
        cum[i] = acc
        vt = (ambient[0] + vel[i, 0] - bound_vel[i, 0]) * tang[0] + \
             (ambient[1] + vel[i, 1] - bound_vel[i, 1]) * tang[1]
        rate = (acc - prev_cum[i]) / dt if has_prev else acc / dt
        dp[i] = rho * (vt * gb[i] / panel_len + rate)
    return dp, cum


@numba.njit(cache=True, nogil=True)
def _loads(bound, normal, panel_len, dp, ref):
    fx = 0.0
    fz = 0.0
    my = 0.0
    for i in range(bound.shape[0]):
        ex = dp[i] * panel_len * normal[0]
        ez = dp[i] * panel_len * normal[1]
        fx += ex
        fz += ez
        my += (bound[i, 0] - ref[0]) * ez - (bound[i, 1] - ref[1]) * ex
    return fx, fz, my


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def geometry_update(
    section: WingSection,
    pose: tuple[ArrayLike, float],
    motion: tuple[ArrayLike, float] | tuple[ArrayLike, float, float],
) -> WingSection:
    """Return ``section`` moved to ``pose`` = (reference position, theta) with
    ``motion`` = (reference velocity, angular rate[, chord rate])."""
    position, theta = pose
    velocity, omega = motion[0], motion[1]
    chord_rate = motion[2] if len(motion) > 2 else section.chord_rate
    return replace(section, position=np.asarray(position, dtype=np.float64), theta=float(theta),
                   velocity=np.asarray(velocity, dtype=np.float64), omega=float(omega),
                   chord_rate=float(chord_rate))


def _wake_arrays(wake) -> tuple[FloatArray, FloatArray, int]:
    if wake is None:
        return np.zeros((1, 2)), np.zeros(1), 0
    pos = np.ascontiguousarray(wake.positions, dtype=np.float64).reshape(-1, 2)
    gam = np.ascontiguousarray(wake.strengths, dtype=np.float64)
    if len(gam) == 0:
        return np.zeros((1, 2)), np.zeros(1), 0
    return pos, gam, len(gam)


def shed_edge_particles(
    section: WingSection,
    previous_shed: ArrayLike | None,
    dt: float,
    ambient_flow: ArrayLike = (0.0, 0.0),
    wake=None,
    kernel: KernelConfig | None = None,
    fraction: float = PLACEMENT_FRACTION,
) -> FloatArray:
    """Positions of the two nascent particles, rows (leading edge, trailing edge).

    ``previous_shed`` holds the current positions of the last particles shed
    from each edge (same row order); ``None`` on the first step, where the
    particles are offset along the local relative flow by
    ``fraction * |v_rel| * dt``.  With leading-edge shedding off the first row
    is zeros.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    core = kernel.core_radius if kernel else 0.01 * section.chord
    wpos, wgam, nw = _wake_arrays(wake)
    min_off = max(MIN_OFFSET_PANELS * section.panel_length, MIN_OFFSET_CORES * core)
    out = np.zeros((2, 2))
    amb = np.asarray(ambient_flow, dtype=np.float64)
    prev = None if previous_shed is None else np.asarray(previous_shed, dtype=np.float64)
    edges = [(0, section.leading_edge, -section.tangent, section.control_surface_velocity[0])] \
        if section.shed_leading_edge else []
    edges.append((1, section.trailing_edge, section.tangent, section.control_surface_velocity[-1]))
    le_cap = LE_MAX_OFFSET * max(core, section.panel_length)
    for row, edge, outward, edge_vel in edges:
        v_rel = _edge_relative_velocity(edge, edge_vel, amb, wpos, wgam, nw, core)
        has_prev = prev is not None
        p = prev[row] if has_prev else np.zeros(2)
        cap = le_cap if row == 0 else 0.0
        out[row] = _place(edge, outward, p, has_prev, v_rel, fraction, dt, min_off, cap)
    return out


def assemble_system(
    section: WingSection,
    wake,
    shed_positions: ArrayLike,
    ambient_flow: ArrayLike = (0.0, 0.0),
    kernel: KernelConfig | None = None,
    gamma_total: float = 0.0,
) -> LinearSystem:
    core = kernel.core_radius if kernel else 0.01 * section.chord
    wpos, wgam, nw = _wake_arrays(wake)
    shed = np.ascontiguousarray(shed_positions, dtype=np.float64).reshape(2, 2)
    mat, rhs = _assemble(section.bound_world, section.control_world, section.normal, shed,
                         section.shed_leading_edge, wpos, wgam, nw, core,
                         np.asarray(ambient_flow, dtype=np.float64),
                         section.control_surface_velocity, float(gamma_total))
    return LinearSystem(mat, rhs, shed, section.shed_leading_edge)


def solve_bound_strengths(system: LinearSystem, max_condition: float = 1e12) -> BoundSolution:
    mat = system.matrix
    cond = float(np.linalg.cond(mat))
    if not np.isfinite(cond) or cond > max_condition:
        raise BoundarySolveError(f"boundary system is ill-conditioned (cond={cond:.3e})")
    try:
        x, res = _solve(mat, system.rhs)
    except Exception as exc:  # numba raises a plain exception on singular LU
        raise BoundarySolveError(f"boundary solve failed (cond={cond:.3e})") from exc
    n_shed = 2 if system.shed_leading_edge else 1
    n = len(x) - n_shed
    le = float(x[n]) if system.shed_leading_edge else 0.0
    return BoundSolution(x[:n].copy(), le, float(x[-1]), None, float(res), cond)


def pressure_distribution(
    section: WingSection,
    solution: BoundSolution,
    wake,
    rho: FluidDensity | float,
    dt: float,
    previous_cumulative: ArrayLike | None = None,
    le_released: float = 0.0,
    ambient_flow: ArrayLike = (0.0, 0.0),
    kernel: KernelConfig | None = None,
) -> tuple[FloatArray, FloatArray]:
    """Pressure jump at each bound vortex; returns ``(dp, cumulative)``.

    ``wake`` must already contain this step's shed particles.  ``le_released``
    is the leading-edge circulation released before this step;
    ``previous_cumulative`` the cumulative sums returned last step (``None``
    at an impulsive start).
    """
    density = rho.rho if isinstance(rho, FluidDensity) else float(rho)
    core = kernel.core_radius if kernel else 0.01 * section.chord
    wpos, wgam, nw = _wake_arrays(wake)
    has_prev = previous_cumulative is not None
    prev = np.zeros(section.n_bound) if not has_prev else np.asarray(previous_cumulative, float)
    le_total = le_released + solution.new_le_strength
    dp, cum = _pressure(section.bound_world, section.tangent, section.panel_length,
                        np.asarray(solution.bound_strengths, dtype=np.float64), le_total, prev,
                        has_prev, dt, density, wpos, wgam, nw, core,
                        np.asarray(ambient_flow, dtype=np.float64), section.bound_surface_velocity)
    solution.strength_rates = (cum - prev) / dt
    return dp, cum


def integrate_loads(
    section: WingSection,
    dp: ArrayLike,
    span: float = 1.0,
    reference: ArrayLike | None = None,
) -> tuple[FloatArray, float]:
    """Force (world frame) and moment about ``reference`` (default: section
    reference point) of the pressure distribution over a strip of ``span``."""
    ref = section.position if reference is None else np.asarray(reference, dtype=np.float64)
    fx, fz, my = _loads(section.bound_world, section.normal, section.panel_length,
                        np.asarray(dp, dtype=np.float64), ref)
    return np.array([fx, fz]) * span, my * span


def thin_airfoil_circulation(chord: float, speed: float, alpha: float) -> float:
    """Steady flat-plate circulation ``pi c U sin(alpha)``."""
    return np.pi * chord * speed * np.sin(alpha)


@numba.njit(cache=True, nogil=True)
def _reflect(before, pos, m, le, tang, normal, chord):
    """Mirror particles whose step crossed the plate back to the side they came from."""
    count = 0
    for i in range(m):
        ax = before[i, 0] - le[0]
        az = before[i, 1] - le[1]
        bx = pos[i, 0] - le[0]
        bz = pos[i, 1] - le[1]
        e0 = ax * normal[0] + az * normal[1]
        e1 = bx * normal[0] + bz * normal[1]
        if e0 * e1 >= 0.0:
            continue
        s0 = ax * tang[0] + az * tang[1]
        s1 = bx * tang[0] + bz * tang[1]
        s = s0 + (s1 - s0) * e0 / (e0 - e1)
        if 0.0 <= s <= chord:
            pos[i, 0] -= 2.0 * e1 * normal[0]
            pos[i, 1] -= 2.0 * e1 * normal[1]
            count += 1
    return count


@numba.njit(cache=True, nogil=True)
def _exclude(pos, start, m, le, tang, normal, chord, h):
    """Push particles to at least ``h`` from the plate segment.

    Over the plate the push is along the normal, to the side the particle is
    on; beyond either edge it is radial from the edge.  The two rules agree
    at the edges, so the displacement is continuous in the particle position.
    """
    for i in range(start, m):
        dx = pos[i, 0] - le[0]
        dz = pos[i, 1] - le[1]
        s = dx * tang[0] + dz * tang[1]
        e = dx * normal[0] + dz * normal[1]
        if 0.0 <= s <= chord:
            if abs(e) >= h:
                continue
            target = h if e >= 0.0 else -h
            pos[i, 0] += (target - e) * normal[0]
            pos[i, 1] += (target - e) * normal[1]
            continue
        sc = 0.0 if s < 0.0 else chord
        rx = dx - sc * tang[0]
        rz = dz - sc * tang[1]
        r = np.sqrt(rx * rx + rz * rz)
        if r >= h or r == 0.0:
            continue
        pos[i, 0] += (h / r - 1.0) * rx
        pos[i, 1] += (h / r - 1.0) * rz


@numba.njit(cache=True, nogil=True)
def _on_grid(g):
    return np.round(g / STRENGTH_QUANTUM) * STRENGTH_QUANTUM


@numba.njit(cache=True, nogil=True)
def _section_step(ref, theta, vel, omega, chord, chord_rate, ref_fraction, n, shed_le,
                  ambient, dt, rho, core, fraction, moment_ref,
                  wpos, wgam, n_wake, prev_cum, has_prev, le_total, gamma_total,
                  merge_thr, merge_rad, merge_near, midpoint, bound_core):
    """Advance one section by one step.

    ``wpos``/``wgam`` need room for two more particles; ``prev_cum`` is updated
    in place.  Returns the new wake count, the new released leading-edge
    circulation, the load per unit span ``(fx, fz, my)`` about ``moment_ref``,
    the solve residual and the bound strengths.
    """
    tang = np.empty(2)
    tang[0] = -np.cos(theta)
    tang[1] = -np.sin(theta)
    normal = np.empty(2)
    normal[0] = -tang[1]
    normal[1] = tang[0]
    le = np.empty(2)
    le[0] = ref[0] - ref_fraction * chord * tang[0]
    le[1] = ref[1] - ref_fraction * chord * tang[1]
    te = np.empty(2)
    te[0] = le[0] + chord * tang[0]
    te[1] = le[1] + chord * tang[1]
    ncp = n + 1 if shed_le else n
    bound = np.empty((n, 2))
    cps = np.empty((ncp, 2))
    _layout(le, tang, chord, n, shed_le, bound, cps)
    cp_vel = _surface_velocity(cps, le, tang, chord, ref, vel, omega, ref_fraction, chord_rate)
    b_vel = _surface_velocity(bound, le, tang, chord, ref, vel, omega, ref_fraction, chord_rate)

    shed = _shed_positions(le, te, tang, chord, n, shed_le, cp_vel, ambient, wpos, wgam,
                           n_wake, core, has_prev, fraction, dt)
    surface_gap = max(core, chord / n)
    if shed_le:
        s0 = (shed[0, 0] - le[0]) * tang[0] + (shed[0, 1] - le[1]) * tang[1]
        if s0 > 0.0:
            shed[0, 0] -= s0 * tang[0]
            shed[0, 1] -= s0 * tang[1]
    _exclude(shed, 0, 1, le, tang, normal, chord, surface_gap)
    mat, rhs = _assemble(bound, cps, normal, shed, shed_le, wpos, wgam, n_wake, core, ambient,
                         cp_vel, gamma_total)
    x, res = _solve(mat, rhs)
    gb = x[:n].copy()
    # shed strengths go on a fixed grid so wake merges add without rounding;
    # the edge bound vortex takes the remainder
    m = n_wake
    g_le = 0.0
    if shed_le:
        g_le = _on_grid(x[n])
        gb[0] += x[n] - g_le
        wpos[m, 0] = shed[0, 0]
        wpos[m, 1] = shed[0, 1]
        wgam[m] = g_le
        m += 1
    g_te = _on_grid(x[x.shape[0] - 1])
    gb[n - 1] += x[x.shape[0] - 1] - g_te
    wpos[m, 0] = shed[1, 0]
    wpos[m, 1] = shed[1, 1]
    wgam[m] = g_te
    m += 1
    le_new = le_total + g_le

    dp, cum = _pressure(bound, tang, chord / n, gb, le_new, prev_cum, has_prev, dt, rho,
                        wpos, wgam, m, core, ambient, b_vel)
    for i in range(n):
        prev_cum[i] = cum[i]
    fx, fz, my = _loads(bound, normal, chord / n, dp, moment_ref)

    # convect with the bound sheet frozen, then coarsen the far wake
    before = wpos[:m].copy()
    _convect_core(wpos, wgam, m, bound, gb, n, core, bound_core, ambient, dt, midpoint)
    _reflect(before, wpos, m, le, tang, normal, chord)
    _exclude(wpos, 0, m, le, tang, normal, chord, surface_gap)
    if merge_thr > 0.0:
        m = _merge_core(wpos, wgam, m, cps, merge_thr, merge_rad, merge_near, 2, core)
    return m, le_new, fx, fz, my, res, gb
