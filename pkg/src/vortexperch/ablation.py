"""Four-configuration perch comparison.

Each mode plans (and linearizes) with its own internal model, then every
perturbed launch is flown closed loop against the unsteady simulator.  Costs
are normalized by the mean of the fixed-wing quasi-steady mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .config import MODES, ScenarioConfig
from .mppi import PlanResult, plan, trajectory_cost
from .tvlqr import GainSchedule, Nominal, simulate_closed_loop, synthesize
from .vehicle import UNSTEADY, Vehicle, VehicleState

FloatArray = NDArray[np.float64]

BASELINE = ("fixed", "quasi-steady")


@dataclass
class ModePlan:
    wing: str
    model: str
    plan: PlanResult | None
    gains: GainSchedule | None
    error: str = ""

    @property
    def label(self) -> str:
        return f"{self.wing}/{self.model}"


@dataclass
class ModeOutcome:
    label: str
    costs: FloatArray
    diverged: int
    failed: bool = False
    normalized: FloatArray = field(default_factory=lambda: np.zeros(0))

    @property
    def mean(self) -> float:
        return float(np.mean(self.normalized)) if len(self.normalized) else math.nan

    @property
    def std(self) -> float:
        return float(np.std(self.normalized)) if len(self.normalized) else math.nan


def perturbed_launches(cfg: ScenarioConfig, n: int, seed: int) -> list[VehicleState]:
    """Uniform position (x and z) and speed offsets around the configured
    launch; identical for every mode so the modes see the same launches."""
    rng = np.random.default_rng([seed, 0xAB1A])
    base = cfg.launch.state()
    a = cfg.ablation
    out = []
    for _ in range(n):
        dx, dz = rng.uniform(-a.position_noise, a.position_noise, 2)
        dv = rng.uniform(-a.speed_noise, a.speed_noise)
        out.append(replace(base, x=base.x + dx, z=base.z + dz, xdot=base.xdot + dv))
    return out


def plan_mode(cfg: ScenarioConfig, wing: str, model: str, seed: int, threads: int = 1,
              log: Callable | None = None) -> ModePlan:
    morphing = wing == "morphing"
    vehicle = Vehicle(cfg.vehicle, cfg.fluid_for(model))
    params = cfg.planner.params(seed, morphing, threads)
    try:
        result = plan(cfg.launch.state(), cfg.target, params, vehicle, log=log)
        fb = cfg.feedback
        q = np.diag(fb.q)
        r = np.diag([v for v, on in zip(fb.r, params.channels) if on])
        gains = synthesize(vehicle, cfg.launch.state(), result.sequence, params.channels,
                           q, r, fb.qf_scale * q, fb.eps, spacing=fb.knot_spacing)
    except Exception as exc:  # a failed mode is reported, not fatal
        return ModePlan(wing, model, None, None, f"{type(exc).__name__}: {exc}")
    return ModePlan(wing, model, result, gains)


def fly(cfg: ScenarioConfig, mode: ModePlan, launches: list[VehicleState]) -> ModeOutcome:
    truth = Vehicle(cfg.vehicle, cfg.fluid_for(UNSTEADY))
    if mode.plan is None:
        return ModeOutcome(mode.label, np.full(len(launches), math.nan), len(launches), True)
    nominal = Nominal(mode.plan.sequence, mode.plan.trajectory)
    costs, diverged = [], 0
    for state in launches:
        res = simulate_closed_loop(truth, state, nominal, mode.gains)
        diverged += int(res.diverged)
        costs.append(trajectory_cost(res.trajectory, cfg.target))
    c = np.array(costs)
    return ModeOutcome(mode.label, c, diverged, bool(np.all(~np.isfinite(c))))


def normalize(outcomes: list[ModeOutcome]) -> None:
    base = next(o for o in outcomes if o.label == "/".join(BASELINE))
    ok = base.costs[np.isfinite(base.costs)]
    scale = float(np.mean(ok)) if len(ok) else math.nan
    for o in outcomes:
        o.normalized = o.costs[np.isfinite(o.costs)] / scale


def run_ablation(cfg: ScenarioConfig, seed: int, n_seeds: int | None = None, threads: int = 1,
                 log: Callable[[str], None] | None = None) -> tuple[list[ModeOutcome], list[ModePlan]]:
    n = cfg.ablation.seeds if n_seeds is None else n_seeds
    launches = perturbed_launches(cfg, n, seed)
    plans, outcomes = [], []
    for wing, model in MODES:
        if log:
            log(f"planning {wing}/{model}")
        mp = plan_mode(cfg, wing, model, seed, threads)
        plans.append(mp)
        outcomes.append(fly(cfg, mp, launches))
    normalize(outcomes)
    return outcomes, plans


def format_table(outcomes: list[ModeOutcome], n_seeds: int) -> str:
    lines = [f"perch cost normalized by the {'/'.join(BASELINE)} mean ({n_seeds} launches)",
             f"{'mode':<26}{'mean':>10}{'std':>10}{'raw mean':>12}{'diverged':>10}"]
    for o in outcomes:
        if o.failed:
            lines.append(f"{o.label:<26}{'failed':>10}")
            continue
        raw = float(np.nanmean(o.costs))
        lines.append(f"{o.label:<26}{o.mean:>10.4f}{o.std:>10.4f}{raw:>12.4f}{o.diverged:>10d}")
    return "\n".join(lines) + "\n"
