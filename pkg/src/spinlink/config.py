"""Run configuration: a flat ``key = value`` text format with dotted keys.

Blank lines and ``#`` comments are ignored.  Lists are comma separated.
Unknown keys are an error.  ``dump_config`` writes every resolved key, so a
run directory always records exactly what was simulated.  The key reference
lives in ``KEYS`` below and in the README.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .detection import DetectorParams
from .errors import ConfigError, InvalidArgument
from .memory import LossBudget, MemoryParams, calibrate_eta0
from .source import SourceParams, default_p_double, tune_p_double


class Campaign(str, enum.Enum):
    CAUCHY_SCHWARZ = "CAUCHY_SCHWARZ"
    HERALDED_G2 = "HERALDED_G2"
    WHICHPATH = "WHICHPATH"
    CHSH = "CHSH"
    TOMO = "TOMO"
    EFFICIENCY_SCAN = "EFFICIENCY_SCAN"


@dataclass(frozen=True)
class ExperimentSchedule:
    trap_ms: float = 7.5
    op_window_ms: float = 1.5
    cycles_per_window: int = 3000
    cycle_ns: float = 500.0
    state_prep_ms: float = 1.0
    storage_time_ns: float = 300.0

    def __post_init__(self):
        if self.cycles_per_window < 1 or self.cycle_ns <= 0:
            raise InvalidArgument("cycles_per_window and cycle_ns must be positive")
        if self.cycles_per_window * self.cycle_ns * 1e-6 > self.op_window_ms * (1 + 1e-12):
            raise InvalidArgument("operation cycles do not fit into the operating window")
        if min(self.trap_ms, self.state_prep_ms, self.op_window_ms) < 0 or self.storage_time_ns <= 0:
            raise InvalidArgument("schedule durations must be positive")

    @property
    def super_cycle_ms(self) -> float:
        return self.trap_ms + self.state_prep_ms + self.op_window_ms

    def cycle_time_s(self, cycle_index: int) -> float:
        """Start time of a global cycle; windows run trap, preparation, operation."""
        w, i = divmod(int(cycle_index), self.cycles_per_window)
        t_ms = w * self.super_cycle_ms + self.trap_ms + self.state_prep_ms
        return t_ms * 1e-3 + i * self.cycle_ns * 1e-9


@dataclass(frozen=True)
class RunConfig:
    campaign: Campaign = Campaign.CHSH
    seed: int = 1
    windows: int = 64
    schedule: ExperimentSchedule = field(default_factory=ExperimentSchedule)
    source: SourceParams = field(default_factory=SourceParams)
    memory: MemoryParams = field(default_factory=MemoryParams)
    memory_enabled: bool = True
    detectors: dict = field(default_factory=dict)
    losses: LossBudget = field(default_factory=LossBudget)
    chsh_angles: tuple = (0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8)
    scan_points: int = 12
    stage: str = "output"
    storage_times_ns: tuple = (0.0, 150.0, 300.0, 600.0, 1000.0, 1500.0, 2000.0, 3000.0)

    def __post_init__(self):
        if self.windows < 0:
            raise InvalidArgument("windows must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgument("seed must be a 64-bit unsigned integer")
        if self.stage not in ("input", "output"):
            raise InvalidArgument("stage must be 'input' or 'output'")
        if self.scan_points < 0 or self.scan_points in (1, 2, 3, 4):
            raise InvalidArgument("scan_points must be 0 or >= 5")
        if len(self.chsh_angles) != 4:
            raise InvalidArgument("chsh.angles needs four values")
        dets = {k: self.detectors.get(k, DetectorParams()) for k in ("D1", "D2", "D3")}
        object.__setattr__(self, "detectors", dets)

    def detector(self, name: str) -> DetectorParams:
        return self.detectors[name]

    @property
    def signal1_survival(self) -> float:
        """Probability that a signal-1 photon reaches its detector stage (before detection)."""
        t = self.losses.path_transmission
        if self.memory_enabled and self.stage == "output":
            return t * self.memory.efficiency
        return t

    @property
    def cycles(self) -> int:
        return self.windows * self.schedule.cycles_per_window


# --- text format ----------------------------------------------------------

# key -> (section, attribute, type)
_SECTIONS = {
    "schedule": (ExperimentSchedule, {"trap_ms": float, "op_window_ms": float, "cycles_per_window": int,
                                      "cycle_ns": float, "state_prep_ms": float, "storage_time_ns": float}),
    "source": (SourceParams, {"p_pair": float, "p_double": float, "mode_number": float,
                              "phase_phi": float, "visibility": float, "noise_mean": float}),
    "memory": (MemoryParams, {"eta0": float, "tau_doppler": float, "tau_life": float, "tau_extra": float,
                              "phase_jitter_sigma": float}),
    "losses": (LossBudget, {"detection_loss": float, "fiber_loss": float, "filtering_loss": float,
                            "excitation_loss": float}),
}
_DETECTOR_KEYS = {"efficiency": float, "dark_prob": float, "gate_ns": float}
_TOP = {"campaign": str, "seed": int, "windows": int}
_EXTRA = {"source.heralded_g2_target": float, "memory.enabled": "bool", "memory.calibrate_to": float, "chsh.angles": "floats",
          "scan.points": int, "stage": str, "scan.storage_times_ns": "floats"}

KEYS = sorted(
    list(_TOP)
    + [f"{s}.{k}" for s, (_, ks) in _SECTIONS.items() for k in ks]
    + [f"detector.{k}" for k in _DETECTOR_KEYS]
    + [f"detector.{d}.{k}" for d in ("d1", "d2", "d3") for k in _DETECTOR_KEYS]
    + list(_EXTRA)
)


def _convert(key: str, raw: str, kind):
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if kind is int:
            return int(float(raw)) if "e" in raw.lower() else int(raw, 0)
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text: str) -> dict[str, object]:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = raw
    return values


def _kind(key: str):
    if key in _TOP:
        return _TOP[key]
    if key in _EXTRA:
        return _EXTRA[key]
    parts = key.split(".")
    if parts[0] == "detector":
        return _DETECTOR_KEYS[parts[-1]]
    return _SECTIONS[parts[0]][1][parts[1]]


def build_config(raw: dict[str, str], seed_override: int | None = None) -> RunConfig:
    v = {k: _convert(k, r, _kind(k)) for k, r in raw.items()}
    try:
        campaign = Campaign(str(v.get("campaign", "CHSH")).upper())
    except ValueError as exc:
        raise ConfigError(f"unknown campaign {v.get('campaign')!r}") from exc
    try:
        schedule = ExperimentSchedule(**{k.split(".")[1]: x for k, x in v.items() if k.startswith("schedule.")})
        src = {k.split(".")[1]: x for k, x in v.items()
               if k.startswith("source.") and k.split(".")[1] in _SECTIONS["source"][1]}
        g2_target = v.get("source.heralded_g2_target")
        if g2_target is not None and "p_double" in src:
            raise ConfigError("set either source.p_double or source.heralded_g2_target, not both")
        if "p_double" not in src:
            src["p_double"] = default_p_double(src.get("p_pair", SourceParams.p_pair))
        source = SourceParams(**src)
        mem = {k.split(".")[1]: x for k, x in v.items()
               if k.startswith("memory.") and k.split(".")[1] in _SECTIONS["memory"][1]}
        mem["storage_time"] = schedule.storage_time_ns * 1e-9
        memory = MemoryParams(**mem)
        if "memory.calibrate_to" in v:
            eta0 = calibrate_eta0(v["memory.calibrate_to"], memory.storage_time, memory.tau_doppler,
                                  memory.tau_life, memory.tau_extra)
            memory = replace(memory, eta0=eta0)
        losses = LossBudget(**{k.split(".")[1]: x for k, x in v.items() if k.startswith("losses.")})
        base = {k.split(".")[1]: x for k, x in v.items() if k.count(".") == 1 and k.startswith("detector.")}
        detectors = {}
        for d in ("d1", "d2", "d3"):
            spec = dict(base)
            spec.update({k.split(".")[2]: x for k, x in v.items() if k.startswith(f"detector.{d}.")})
            detectors[d.upper()] = DetectorParams(**spec)
        seed = seed_override if seed_override is not None else v.get("seed", 1)
        kwargs = dict(campaign=campaign, seed=int(seed), windows=v.get("windows", 64), schedule=schedule,
                      source=source, memory=memory, memory_enabled=v.get("memory.enabled", True),
                      detectors=detectors, losses=losses, scan_points=v.get("scan.points", 12),
                      stage=v.get("stage", "output"))
        if "chsh.angles" in v:
            kwargs["chsh_angles"] = v["chsh.angles"]
        if "scan.storage_times_ns" in v:
            kwargs["storage_times_ns"] = v["scan.storage_times_ns"]
        cfg = RunConfig(**kwargs)
        if g2_target is not None:
            cfg = replace(cfg, source=replace(source, p_double=tune_for_config(cfg, g2_target)))
        return cfg
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc


def tune_for_config(cfg: RunConfig, heralded_g2: float) -> float:
    """``p_double`` that gives ``heralded_g2`` with this run's HBT efficiencies."""
    s = cfg.signal1_survival
    d = cfg.detectors
    return tune_p_double(cfg.source.p_pair, heralded_g2,
                         herald_eff=cfg.losses.path_transmission * d["D3"].efficiency,
                         eff_a=0.5 * s * d["D1"].efficiency, eff_b=0.5 * s * d["D2"].efficiency,
                         dark_herald=d["D3"].dark_prob, dark_a=d["D1"].dark_prob, dark_b=d["D2"].dark_prob)


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config_text(text), seed_override)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, tuple):
        return ", ".join(_fmt(float(i)) for i in x)
    if isinstance(x, enum.Enum):
        return x.value
    return str(x)


def dump_config(cfg: RunConfig) -> str:
    lines = [f"campaign = {cfg.campaign.value}", f"seed = {cfg.seed}", f"windows = {cfg.windows}",
             f"stage = {cfg.stage}"]
    for section, obj in (("schedule", cfg.schedule), ("source", cfg.source), ("memory", cfg.memory),
                         ("losses", cfg.losses)):
        for f in fields(obj):
            if f.name in _SECTIONS[section][1]:
                lines.append(f"{section}.{f.name} = {_fmt(getattr(obj, f.name))}")
    lines.append(f"memory.enabled = {_fmt(cfg.memory_enabled)}")
    for name, det in cfg.detectors.items():
        for f in fields(det):
            lines.append(f"detector.{name.lower()}.{f.name} = {_fmt(getattr(det, f.name))}")
    lines.append(f"chsh.angles = {_fmt(tuple(cfg.chsh_angles))}")
    lines.append(f"scan.points = {cfg.scan_points}")
    lines.append(f"scan.storage_times_ns = {_fmt(tuple(cfg.storage_times_ns))}")
    return "\n".join(lines) + "\n"
