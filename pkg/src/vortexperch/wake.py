"""Free wake: convection of shed particles and error-bounded pair merging."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

from .kernel import KernelConfig, VortexParticle, add_induced, _pair_regularized

FloatArray = NDArray[np.float64]

CANCEL_TOL = 1e-12


@dataclass
class Wake:
    """Ordered free particles; the newest particles are at the end."""

    positions: FloatArray = field(default_factory=lambda: np.zeros((0, 2)))
    strengths: FloatArray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.strengths = np.ascontiguousarray(self.strengths, dtype=np.float64).reshape(-1)
        if len(self.positions) != len(self.strengths):
            raise ValueError("positions and strengths differ in length")

    @classmethod
    def from_particles(cls, particles) -> "Wake":
        if any(p.is_bound for p in particles):
            raise ValueError("wake particles cannot be bound")
        pos = np.array([p.position for p in particles], dtype=np.float64).reshape(-1, 2)
        return cls(pos, np.array([p.strength for p in particles], dtype=np.float64))

    def __len__(self) -> int:
        return len(self.strengths)

    @property
    def particles(self) -> list[VortexParticle]:
        return [VortexParticle(float(g), (float(p[0]), float(p[1])))
                for p, g in zip(self.positions, self.strengths)]

    @property
    def total_strength(self) -> float:
        return math.fsum(self.strengths)

    def appended(self, positions: ArrayLike, strengths: ArrayLike) -> "Wake":
        return Wake(np.vstack([self.positions, np.reshape(positions, (-1, 2))]),
                    np.concatenate([self.strengths, np.ravel(strengths)]))

    def copy(self) -> "Wake":
        return Wake(self.positions.copy(), self.strengths.copy())


@dataclass(frozen=True)
class MergeConfig:
    """Merge controls.

    ``near_field_radius`` excludes particles closer than this to any control
    point (the vehicle uses two chords); ``protect_newest`` keeps the most
    recently shed particles out of consideration.
    """

    velocity_threshold: float = 0.01
    candidate_radius: float = 0.02
    near_field_radius: float = 0.0
    protect_newest: int = 0

    def __post_init__(self) -> None:
        if not (self.velocity_threshold > 0 and self.candidate_radius > 0):
            raise ValueError("velocity_threshold and candidate_radius must be positive")
        if self.near_field_radius < 0 or self.protect_newest < 0:
            raise ValueError("near_field_radius and protect_newest must be non-negative")


# ---------------------------------------------------------------------------
# compiled cores
# ---------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _velocities(pos, gam, n, bpos, bgam, nb, core, bound_core, ambient, targets):
    vel = np.empty((targets.shape[0], 2))
    for i in range(targets.shape[0]):
        vel[i, 0] = ambient[0]
        vel[i, 1] = ambient[1]
    if bound_core > 0.0:
        add_induced(bpos, bgam, nb, True, bound_core, targets, vel)
    else:
        add_induced(bpos, bgam, nb, False, core, targets, vel)
    add_induced(pos, gam, n, True, core, targets, vel)
    return vel


@numba.njit(cache=True, nogil=True)
def _convect(pos, gam, n, bpos, bgam, nb, core, bound_core, ambient, dt, midpoint):
    """Advance the first ``n`` particles of ``pos`` in place.

    With ``bound_core > 0`` the bound vortices act on the particles through
    the finite-core kernel with that radius (a lumped vortex stands for the
    sheet over its whole panel); otherwise they use the singular kernel.
    """
    if n == 0:
        return
    cur = pos[:n].copy()
    v0 = _velocities(cur, gam, n, bpos, bgam, nb, core, bound_core, ambient, cur)
    if not midpoint:
        for i in range(n):
            pos[i, 0] = cur[i, 0] + dt * v0[i, 0]
            pos[i, 1] = cur[i, 1] + dt * v0[i, 1]
        return
    half = cur + 0.5 * dt * v0
    v1 = _velocities(half, gam, n, bpos, bgam, nb, core, bound_core, ambient, half)
    for i in range(n):
        pos[i, 0] = cur[i, 0] + dt * v1[i, 0]
        pos[i, 1] = cur[i, 1] + dt * v1[i, 1]


@numba.njit(cache=True, nogil=True)
def _adds_exactly(a, b):
    """True when ``a + b`` needs no rounding (the two-sum error is zero)."""
    s = a + b
    bb = s - a
    return (a - (s - bb)) + (b - bb) == 0.0


@numba.njit(cache=True, nogil=True)
def _merge(pos, gam, n, cps, threshold, radius, near_radius, protect, core):
    """One greedy merge pass over the first ``n`` particles (in place).

    Returns the new particle count.  Merged particles take the slot of the
    lower index, so survivors keep their relative order.  Only partners whose
    strengths add without rounding are considered, so the total circulation
    is kept bit for bit.  The accumulated
    change of induced velocity at every control point is kept within
    ``threshold`` in each component.
    """
    ncp = cps.shape[0]
    core2 = core * core
    last = n - protect
    if last < 2:
        return n
    eligible = np.zeros(n, dtype=np.bool_)
    near2 = near_radius * near_radius
    for i in range(last):
        ok = gam[i] != 0.0
        for k in range(ncp):
            dx = pos[i, 0] - cps[k, 0]
            dz = pos[i, 1] - cps[k, 1]
            if dx * dx + dz * dz <= near2:
                ok = False
                break
        eligible[i] = ok
    # nearest same-sign eligible neighbour of every eligible particle
    r2max = radius * radius
    pa = np.empty(n, dtype=np.int64)
    pb = np.empty(n, dtype=np.int64)
    pd = np.empty(n)
    npairs = 0
    nearest = np.full(n, -1, dtype=np.int64)
    nearest_d = np.zeros(n)
    # sweep in x so only particles inside the candidate band are inspected
    xs = pos[:last, 0].copy()
    by_x = np.argsort(xs, kind="mergesort")
    rank = np.empty(last, dtype=np.int64)
    for r in range(last):
        rank[by_x[r]] = r
    for i in range(last):
        if not eligible[i]:
            continue
        best = -1
        bd = r2max
        for direction in (-1, 1):
            r = rank[i] + direction
            while 0 <= r < last:
                j = by_x[r]
                if abs(xs[j] - xs[i]) > radius:
                    break
                r += direction
                if not eligible[j] or (gam[i] > 0.0) != (gam[j] > 0.0):
                    continue
                if not _adds_exactly(gam[i], gam[j]):
                    continue
                dx = pos[i, 0] - pos[j, 0]
                dz = pos[i, 1] - pos[j, 1]
                d2 = dx * dx + dz * dz
                if d2 < bd or (d2 == bd and (best < 0 or j < best)):
                    best = j
                    bd = d2
        nearest[i] = best
        nearest_d[i] = bd
    for i in range(last):
        j = nearest[i]
        if j < 0 or (nearest[j] == i and j < i):
            continue
        pa[npairs] = min(i, j)
        pb[npairs] = max(i, j)
        pd[npairs] = nearest_d[i]
        npairs += 1
    if npairs == 0:
        return n
    order = np.argsort(pd[:npairs], kind="mergesort")
    used = np.zeros(n, dtype=np.bool_)
    removed = np.zeros(n, dtype=np.bool_)
    drift = np.zeros((ncp, 2))
    trial = np.empty((ncp, 2))
    for q in order:
        a = pa[q]
        b = pb[q]
        if used[a] or used[b]:
            continue
        ga = gam[a]
        gb = gam[b]
        g = ga + gb
        if abs(g) < CANCEL_TOL * max(abs(ga), abs(gb)):
            continue
        wa = abs(ga)
        wb = abs(gb)
        mx = (wa * pos[a, 0] + wb * pos[b, 0]) / (wa + wb)
        mz = (wa * pos[a, 1] + wb * pos[b, 1]) / (wa + wb)
        ok = True
        for k in range(ncp):
            cx = cps[k, 0]
            cz = cps[k, 1]
            u1, w1 = _pair_regularized(g, cx - mx, cz - mz, core2)
            ua, wa_ = _pair_regularized(ga, cx - pos[a, 0], cz - pos[a, 1], core2)
            ub, wb_ = _pair_regularized(gb, cx - pos[b, 0], cz - pos[b, 1], core2)
            tu = drift[k, 0] + (u1 - ua - ub)
            tw = drift[k, 1] + (w1 - wa_ - wb_)
            if abs(tu) > threshold or abs(tw) > threshold:
                ok = False
                break
            trial[k, 0] = tu
            trial[k, 1] = tw
        if not ok:
            continue
        for k in range(ncp):
            drift[k, 0] = trial[k, 0]
            drift[k, 1] = trial[k, 1]
        gam[a] = g
        pos[a, 0] = mx
        pos[a, 1] = mz
        removed[b] = True
        used[a] = True
        used[b] = True
    m = 0
    for i in range(n):
        if removed[i]:
            continue
        pos[m, 0] = pos[i, 0]
        pos[m, 1] = pos[i, 1]
        gam[m] = gam[i]
        m += 1
    return m


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _bound_arrays(bound) -> tuple[FloatArray, FloatArray]:
    if bound is None:
        return np.zeros((1, 2)), np.zeros(1)
    if isinstance(bound, tuple) and len(bound) == 2 and not isinstance(bound[0], VortexParticle):
        pos = np.ascontiguousarray(bound[0], dtype=np.float64).reshape(-1, 2)
        return pos, np.ascontiguousarray(bound[1], dtype=np.float64).reshape(-1)
    pos = np.array([p.position for p in bound], dtype=np.float64).reshape(-1, 2)
    return np.ascontiguousarray(pos), np.array([p.strength for p in bound], dtype=np.float64)


def convect(
    wake: Wake,
    ambient_flow: ArrayLike,
    dt: float,
    kernel: KernelConfig,
    bound=None,
    midpoint: bool = False,
    bound_core: float = 0.0,
) -> Wake:
    """Move every particle with the local velocity for one step.

    ``bound`` is either a sequence of bound :class:`VortexParticle` or a
    ``(positions, strengths)`` pair; bound vortices are held fixed over the
    step.  Strengths are unchanged.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    out = wake.copy()
    n = len(out)
    if n == 0:
        return out
    bpos, bgam = _bound_arrays(bound)
    nb = 0 if bound is None else len(bgam)
    _convect(out.positions, out.strengths, n, bpos, bgam, nb, kernel.core_radius,
             float(bound_core), np.asarray(ambient_flow, dtype=np.float64), float(dt), bool(midpoint))
    return out


def merge_pass(wake: Wake, wing_control_points: ArrayLike, cfg: MergeConfig,
               kernel: KernelConfig) -> Wake:
    """Return a coarsened copy of ``wake``; see :func:`_merge` for the rule."""
    out = wake.copy()
    cps = np.ascontiguousarray(wing_control_points, dtype=np.float64).reshape(-1, 2)
    m = _merge(out.positions, out.strengths, len(out), cps, cfg.velocity_threshold,
               cfg.candidate_radius, cfg.near_field_radius, cfg.protect_newest,
               kernel.core_radius)
    return Wake(out.positions[:m].copy(), out.strengths[:m].copy())


def control_point_velocity(wake: Wake, points: ArrayLike, kernel: KernelConfig) -> FloatArray:
    """Velocity induced by the wake alone at ``points``."""
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    out = np.zeros_like(pts)
    if len(wake):
        add_induced(wake.positions, wake.strengths, len(wake), True, kernel.core_radius, pts, out)
    return out
