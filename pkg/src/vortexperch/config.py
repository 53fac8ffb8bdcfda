"""Scenario configuration: an INI-style document with one section per block.

Every key is optional; unknown sections or keys are errors.  Messages carry
the line number of the offending entry.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field, fields, replace

from .mppi import MppiParams, TargetSpec
from .vehicle import QUASI_STEADY, UNSTEADY, FluidConfig, VehicleGeometry, VehicleState

WINGS = ("fixed", "morphing")
MODES = tuple((w, m) for w in WINGS for m in (QUASI_STEADY, UNSTEADY))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FeedbackConfig:
    q: tuple[float, ...] = (10.0, 10.0, 10.0, 1.0, 1.0, 1.0)
    r: tuple[float, ...] = (1.0, 1.0)
    qf_scale: float = 10.0
    knot_spacing: float = 0.05
    eps: float = 3e-2

    def __post_init__(self) -> None:
        if len(self.q) != 6 or any(not (math.isfinite(v) and v >= 0) for v in self.q):
            raise ValueError("q needs six non-negative values")
        if len(self.r) != 2 or any(not (math.isfinite(v) and v > 0) for v in self.r):
            raise ValueError("r needs two positive values")
        if not self.qf_scale >= 0:
            raise ValueError("qf_scale must be non-negative")
        if not (self.knot_spacing > 0 and self.eps > 0):
            raise ValueError("knot_spacing and eps must be positive")


@dataclass(frozen=True)
class AblationConfig:
    seeds: int = 10
    position_noise: float = 0.05
    speed_noise: float = 0.3

    def __post_init__(self) -> None:
        if self.seeds < 1:
            raise ValueError("seeds must be at least 1")
        if self.position_noise < 0 or self.speed_noise < 0:
            raise ValueError("noise amplitudes must be non-negative")


@dataclass(frozen=True)
class LaunchConfig:
    x: float = 0.0
    z: float = 0.0
    theta: float = 0.0
    xdot: float = 7.0
    zdot: float = 0.0
    thetadot: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(getattr(self, f.name)) for f in fields(self)):
            raise ValueError("launch values must be finite")

    def state(self) -> VehicleState:
        return VehicleState(self.x, self.z, self.theta, self.xdot, self.zdot, self.thetadot)


@dataclass(frozen=True)
class ModeConfig:
    wing: str = "morphing"
    model: str = UNSTEADY

    def __post_init__(self) -> None:
        if self.wing not in WINGS:
            raise ValueError(f"wing must be one of {WINGS}")
        if self.model not in (QUASI_STEADY, UNSTEADY):
            raise ValueError(f"model must be '{QUASI_STEADY}' or '{UNSTEADY}'")

    @property
    def morphing(self) -> bool:
        return self.wing == "morphing"

    @property
    def label(self) -> str:
        return f"{self.wing}/{self.model}"


@dataclass(frozen=True)
class PlannerConfig:
    samples: int = 32
    iterations: int = 50
    sigma_elevator: float = math.radians(5.0)
    sigma_sweep: float = math.radians(10.0)
    temperature: float = 0.0
    temperature_scale: float = 0.05
    horizon: float = 1.5
    knot_dt: float = 0.05

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative (0 means automatic)")
        self.params()

    def params(self, seed: int = 0, morphing: bool = True, threads: int = 1) -> MppiParams:
        return MppiParams(self.samples, self.iterations, (self.sigma_elevator, self.sigma_sweep),
                          self.temperature or None, self.temperature_scale, seed,
                          (True, bool(morphing)), self.horizon, self.knot_dt, threads)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    snapshot_stride: int = 0

    def __post_init__(self) -> None:
        if self.seed < 0 or self.snapshot_stride < 0:
            raise ValueError("seed and snapshot_stride must be non-negative")


@dataclass(frozen=True)
class ScenarioConfig:
    vehicle: VehicleGeometry = field(default_factory=VehicleGeometry)
    fluid: FluidConfig = field(default_factory=FluidConfig)
    launch: LaunchConfig = field(default_factory=LaunchConfig)
    target: TargetSpec = field(default_factory=TargetSpec)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    mode: ModeConfig = field(default_factory=ModeConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def with_mode(self, wing: str, model: str) -> "ScenarioConfig":
        return replace(self, mode=ModeConfig(wing, model))

    def fluid_for(self, model: str) -> FluidConfig:
        return replace(self.fluid, model=model)


SECTIONS = {f.name: f for f in fields(ScenarioConfig)}
# the fluid model is selected through [mode]
_HIDDEN = {"fluid": {"model"}}


def _block_type(name: str):
    return type(SECTIONS[name].default_factory())


def _keys(name: str) -> list[dataclasses.Field]:
    hidden = _HIDDEN.get(name, set())
    return [f for f in fields(_block_type(name)) if f.name not in hidden]


def _convert(kind, text: str):
    text = text.strip()
    if kind is bool or kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int or kind == "int":
        return int(text)
    if kind is float or kind == "float":
        return float(text)
    if kind is str or kind == "str":
        return text
    if "tuple" in str(kind):
        return tuple(float(v) for v in text.replace(",", " ").split())
    raise TypeError(f"unsupported field type {kind!r}")


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """Map ``(section, key)`` (and ``(section, "")``) to 1-based line numbers."""
    out: dict[tuple[str, str], int] = {}
    section = ""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out.setdefault((section, ""), no)
            continue
        for sep in ("=", ":"):
            if sep in line:
                out.setdefault((section, line.split(sep, 1)[0].strip().lower()), no)
                break
    return out


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document; defaults fill missing keys."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="__unused__")
    lines = _line_index(text)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax error: {exc}") from exc
    blocks = {}
    for section in cp.sections():
        where = lines.get((section, ""), 0)
        if section not in SECTIONS:
            raise ConfigError(f"line {where}: unknown section [{section}]")
        known = {f.name: f for f in _keys(section)}
        values = {}
        for key, raw in cp.items(section):
            at = lines.get((section, key), where)
            if key not in known:
                raise ConfigError(f"line {at}: unknown key '{key}' in [{section}]")
            try:
                values[key] = _convert(known[key].type, raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"line {at}: [{section}] {key}: {exc}") from exc
        try:
            blocks[section] = _block_type(section)(**values)
        except ValueError as exc:
            msg = str(exc)
            hit = next((k for k in values if k in msg), None)
            at = lines.get((section, hit), where) if hit else where
            name = f" {hit}" if hit else ""
            raise ConfigError(f"line {at}: [{section}]{name}: {msg}") from exc
    cfg = ScenarioConfig(**blocks)
    return replace(cfg, fluid=cfg.fluid_for(cfg.mode.model))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def serialize_config(cfg: ScenarioConfig) -> str:
    """Write every key explicitly; ``parse_config`` of the result returns ``cfg``."""
    out = []
    for name in SECTIONS:
        block = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in _keys(name):
            out.append(f"{f.name} = {_format(getattr(block, f.name))}")
        out.append("")
    return "\n".join(out)


def load_config(path: str | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
