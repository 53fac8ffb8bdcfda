"""Stand-alone flat plate in a uniform stream, used for validation runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .wake import Wake
from .wing import PLACEMENT_FRACTION, _section_step

FloatArray = NDArray[np.float64]


@dataclass
class PlateResult:
    time: FloatArray
    lift_coefficient: FloatArray
    drag_coefficient: FloatArray
    total_circulation: FloatArray
    bound_circulation: FloatArray
    residual: FloatArray
    wake: Wake


@dataclass
class PlateRun:
    """Fixed plate, leading edge at the origin, stream along +x at ``alpha``.

    ``core_fraction`` sets the particle core radius in chords.  Merging is off
    unless ``merge_threshold`` is positive.
    """

    alpha: float
    speed: float = 5.0
    chord: float = 0.1
    n_bound: int = 16
    dt: float = 0.005
    rho: float = 1.225
    core_fraction: float = 0.01
    bound_core_panels: float = 1.0
    shed_leading_edge: bool = True
    midpoint: bool = False
    merge_threshold: float = 0.0
    merge_radius: float = 0.0
    gamma_total: float = 0.0
    fraction: float = PLACEMENT_FRACTION
    _capacity: int = field(default=0, init=False, repr=False)

    def run(self, steps: int) -> PlateResult:
        n = self.n_bound
        cap = 2 * steps + 2
        wpos = np.zeros((cap, 2))
        wgam = np.zeros(cap)
        prev = np.zeros(n)
        ref = np.zeros(2)
        theta = math.pi - self.alpha
        ambient = np.array([self.speed, 0.0])
        zero = np.zeros(2)
        core = self.core_fraction * self.chord
        q = 0.5 * self.rho * self.speed**2 * self.chord
        m = 0
        le_total = 0.0
        out = np.zeros((6, steps))
        for k in range(steps):
            m, le_total, fx, fz, _my, res, gb = _section_step(
                ref, theta, zero, 0.0, self.chord, 0.0, 0.0, n, self.shed_leading_edge,
                ambient, self.dt, self.rho, core, self.fraction, ref,
                wpos, wgam, m, prev, k > 0, le_total, self.gamma_total,
                self.merge_threshold, self.merge_radius, 2.0 * self.chord, self.midpoint,
                self.bound_core_panels * self.chord / n)
            bsum = math.fsum(gb)
            out[:, k] = ((k + 1) * self.dt, fz / q, fx / q, bsum + math.fsum(wgam[:m]), bsum, res)
        return PlateResult(out[0], out[1], out[2], out[3], out[4], out[5],
                           Wake(wpos[:m].copy(), wgam[:m].copy()))
