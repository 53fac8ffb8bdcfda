"""Point-vortex influence kernels.

Positions live in the planar x-z plane (x downrange, z up).  A particle of
strength ``gamma`` at ``p`` induces at ``q``::

    v = gamma / (2 pi r^2) * [[0, 1], [-1, 0]] @ (q - p)

so with z up a positive strength drives clockwise flow.  Wake particles use
the finite-core form, which multiplies the above by
``s / sqrt(1 + s^2)`` with ``s = (r / r_core)^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

FloatArray = NDArray[np.float64]

TWO_PI = 2.0 * np.pi


class SingularityError(ValueError):
    """Raised when the singular kernel is evaluated at its own source point."""


@dataclass(frozen=True)
class VortexParticle:
    strength: float
    position: tuple[float, float]
    is_bound: bool = False

    def __post_init__(self) -> None:
        if not np.isfinite(self.strength):
            raise ValueError("strength must be finite")
        if len(self.position) != 2 or not np.all(np.isfinite(self.position)):
            raise ValueError("position must be two finite coordinates")


@dataclass(frozen=True)
class KernelConfig:
    core_radius: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.core_radius) and self.core_radius > 0):
            raise ValueError("core_radius must be positive")


@numba.njit(cache=True, nogil=True)
def _pair_singular(gamma, dx, dz):
    r2 = dx * dx + dz * dz
    f = gamma / (TWO_PI * r2)
    return f * dz, -f * dx


@numba.njit(cache=True, nogil=True)
def _pair_regularized(gamma, dx, dz, core2):
    r2 = dx * dx + dz * dz
    if r2 == 0.0:
        return 0.0, 0.0
    s = r2 / core2
    f = gamma / (TWO_PI * r2) * s / np.sqrt(1.0 + s * s)
    return f * dz, -f * dx


@numba.njit(cache=True, nogil=True)
def add_induced(src_pos, src_gam, n_src, regularized, core_radius, targets, out):
    """Accumulate the velocity of ``n_src`` sources into ``out`` (in place).

    Sources are summed in index order for every target, so results do not
    depend on how targets are batched.  A singular source coinciding with a
    target is skipped (callers that must reject it check beforehand).
    """
    if regularized:
        _add_regularized(src_pos, src_gam, n_src, core_radius * core_radius, targets, out)
    else:
        _add_singular(src_pos, src_gam, n_src, targets, out)


@numba.njit(cache=True, nogil=True)
def _add_regularized(src_pos, src_gam, n_src, core2, targets, out):
    for i in range(targets.shape[0]):
        tx = targets[i, 0]
        tz = targets[i, 1]
        u = 0.0
        w = 0.0
        for j in range(n_src):
            dx = tx - src_pos[j, 0]
            dz = tz - src_pos[j, 1]
            r2 = dx * dx + dz * dz
            # gamma/(2 pi r^2) * s/sqrt(1+s^2), s = r^2/rc^2, written without 1/r^2
            f = src_gam[j] / (TWO_PI * np.sqrt(core2 * core2 + r2 * r2))
            u += f * dz
            w -= f * dx
        out[i, 0] += u
        out[i, 1] += w


@numba.njit(cache=True, nogil=True)
def _add_singular(src_pos, src_gam, n_src, targets, out):
    for i in range(targets.shape[0]):
        tx = targets[i, 0]
        tz = targets[i, 1]
        u = 0.0
        w = 0.0
        for j in range(n_src):
            dx = tx - src_pos[j, 0]
            dz = tz - src_pos[j, 1]
            r2 = dx * dx + dz * dz
            if r2 == 0.0:
                continue
            f = src_gam[j] / (TWO_PI * r2)
            u += f * dz
            w -= f * dx
        out[i, 0] += u
        out[i, 1] += w


def _delta(vortex: VortexParticle, target: ArrayLike) -> FloatArray:
    t = np.asarray(target, dtype=np.float64)
    return t - np.asarray(vortex.position, dtype=np.float64)


def induced_velocity_singular(vortex: VortexParticle, target: ArrayLike) -> FloatArray:
    d = _delta(vortex, target)
    r2 = float(d @ d)
    if r2 == 0.0:
        raise SingularityError("singular kernel evaluated at the vortex position")
    f = vortex.strength / (TWO_PI * r2)
    return np.array([f * d[1], -f * d[0]])


def induced_velocity_regularized(
    vortex: VortexParticle, target: ArrayLike, cfg: KernelConfig
) -> FloatArray:
    d = _delta(vortex, target)
    r2 = float(d @ d)
    if r2 == 0.0:
        return np.zeros(2)
    s = r2 / cfg.core_radius**2
    f = vortex.strength / (TWO_PI * r2) * s / np.sqrt(1.0 + s * s)
    return np.array([f * d[1], -f * d[0]])


def regularized_peak_radius(core_radius: float) -> float:
    """Radius at which the finite-core kernel's speed peaks (``r_core``)."""
    # |v| ~ r / sqrt(1 + (r/rc)^4); derivative vanishes at r = rc.
    return core_radius


def total_induced_velocity(
    sources: list[VortexParticle] | tuple[VortexParticle, ...],
    targets: ArrayLike,
    cfg: KernelConfig,
) -> FloatArray:
    """Superposed velocity of ``sources`` at each row of ``targets``.

    Bound particles use the singular kernel, wake particles the finite-core
    kernel.  A bound source sitting exactly on a target raises
    :class:`SingularityError`.
    """
    tgt = np.ascontiguousarray(np.atleast_2d(np.asarray(targets, dtype=np.float64)))
    if tgt.size == 0:
        return np.zeros((0, 2))
    out = np.zeros((tgt.shape[0], 2))
    bound = [s for s in sources if s.is_bound]
    wake = [s for s in sources if not s.is_bound]
    if bound:
        bpos, bgam = particle_arrays(bound)
        if np.any(np.all(tgt[:, None, :] == bpos[None, :, :], axis=-1)):
            raise SingularityError("a target coincides with a bound vortex")
        add_induced(bpos, bgam, len(bound), False, cfg.core_radius, tgt, out)
    if wake:
        wpos, wgam = particle_arrays(wake)
        add_induced(wpos, wgam, len(wake), True, cfg.core_radius, tgt, out)
    return out


def particle_arrays(particles) -> tuple[FloatArray, FloatArray]:
    pos = np.array([p.position for p in particles], dtype=np.float64).reshape(-1, 2)
    gam = np.array([p.strength for p in particles], dtype=np.float64)
    return np.ascontiguousarray(pos), gam
