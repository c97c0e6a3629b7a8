"""Run configuration: TOML loading, validation, bundled presets."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .analysis import QuadratureSpec
from .channel import ChannelParams
from .modem import SystemParams
from .montecarlo import ENGINES, StopRule
from .pulse import (
    DEFAULT_BANDWIDTH_10DB,
    DEFAULT_DURATION,
    DoubletAutocorrelation,
    autocorrelation,
    calibrate_shape_parameter,
    make_gaussian_doublet,
)

PRESETS = ("awgn", "fig1_15mbps", "fig1_1mbps", "fig2_users")


class ConfigError(ValueError):
    """Raised for unreadable or semantically invalid configurations."""


@dataclass(frozen=True)
class PulseConfig:
    duration_ns: float = DEFAULT_DURATION
    bandwidth_ghz: float = DEFAULT_BANDWIDTH_10DB
    shape_parameter_ns: float | None = None  # calibrated from bandwidth_ghz when unset
    sample_period_ns: float | None = None

    def build(self):
        tp = self.shape_parameter_ns
        if tp is None:
            tp = calibrate_shape_parameter(self.bandwidth_ghz, self.duration_ns, self.sample_period_ns)
        return make_gaussian_doublet(tp, self.duration_ns, self.sample_period_ns)


@dataclass(frozen=True)
class AnalysisOptions:
    # "untruncated": closed-form R of the infinite doublet; "truncated": the simulator's table
    autocorrelation: str = "untruncated"
    omega_sigma_reading: str = "s_Tf"

    def __post_init__(self):
        if self.autocorrelation not in ("untruncated", "truncated"):
            raise ConfigError("analysis.autocorrelation must be 'untruncated' or 'truncated'")
        if self.omega_sigma_reading not in ("s_Tf", "s_Ts"):
            raise ConfigError("analysis.omega_sigma_reading must be 's_Tf' or 's_Ts'")


@dataclass(frozen=True)
class RunConfig:
    channel: ChannelParams = field(default_factory=ChannelParams)
    system: SystemParams = field(default_factory=SystemParams)
    pulse: PulseConfig = field(default_factory=PulseConfig)
    ebn0_grid: tuple = tuple(range(0, 21, 2))
    engines: tuple = ENGINES
    toggles: dict = field(default_factory=lambda: {"iasi": True, "isi": True, "mui": True})
    stop_rule: StopRule = field(default_factory=StopRule)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    seed: int = 0
    output: str = "results"
    name: str = "run"
    # total user counts (N_u + 1) to sweep; empty means a single run
    users: tuple = ()
    workers: int = 1

    def runs(self) -> list["RunConfig"]:
        """Expand a user sweep into one config per user count."""
        if not self.users:
            return [self]
        return [
            replace(self, system=replace(self.system, N_u=n - 1, user_delays=None), users=(), name=f"{self.name}_{n}users")
            for n in self.users
        ]

    def build_pulse(self):
        p = self.pulse.build()
        R_sim = autocorrelation(p)
        if self.analysis.autocorrelation == "truncated":
            R_an = R_sim
        else:
            R_an = DoubletAutocorrelation(p.shape_parameter, p.duration)
        return p, R_sim, R_an

    def to_dict(self) -> dict:
        """Fully resolved configuration in the same layout :func:`from_dict` reads."""
        s = self.system
        system = {
            "bit_rate_mbps": s.bit_rate_mbps, "N_s": s.N_s, "N_h": s.N_h, "T_c": s.T_c,
            "N_u": s.N_u, "E_p": s.E_p,
            "user_delays": list(s.user_delays) if s.user_delays is not None else None,
        }
        if system["user_delays"] is None:
            del system["user_delays"]
        pulse = {k: v for k, v in dataclasses.asdict(self.pulse).items() if v is not None}
        return {
            "name": self.name,
            "seed": int(self.seed),
            "output": self.output,
            "workers": self.workers,
            "engines": list(self.engines),
            "ebn0_grid": list(self.ebn0_grid),
            "users": list(self.users),
            "toggles": dict(self.toggles),
            "system": system,
            "channel": dataclasses.asdict(self.channel),
            "pulse": pulse,
            "stop_rule": dataclasses.asdict(self.stop_rule),
            "quadrature": dataclasses.asdict(self.quadrature),
            "analysis": dataclasses.asdict(self.analysis),
        }


_SECTIONS = {
    "channel": ChannelParams,
    "pulse": PulseConfig,
    "stop_rule": StopRule,
    "quadrature": QuadratureSpec,
    "analysis": AnalysisOptions,
}
_SYSTEM_KEYS = {"bit_rate_mbps", "N_s", "N_h", "T_c", "N_u", "E_p", "T_f", "user_delays"}
_TOP_KEYS = {"seed", "output", "name", "ebn0_grid", "engines", "users", "workers", "toggles", "system", *_SECTIONS}


def _check_keys(section: str, data: dict, allowed) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        where = f"[{section}]" if section else "top level"
        raise ConfigError(f"unknown key(s) at {where}: {', '.join(unknown)}")


def _grid(value):
    if isinstance(value, dict):
        _check_keys("ebn0_grid", value, {"start", "stop", "step"})
        start, stop, step = value["start"], value["stop"], value.get("step", 1.0)
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(x) for x in np.round(start + step * np.arange(n), 12))
    return tuple(float(x) for x in value)


def from_dict(data: dict) -> RunConfig:
    _check_keys("", data, _TOP_KEYS)
    kw = {}
    try:
        for section, cls in _SECTIONS.items():
            if section in data:
                names = {f.name for f in dataclasses.fields(cls)}
                _check_keys(section, data[section], names)
                kw[section] = cls(**data[section])
        if "system" in data:
            sysd = dict(data["system"])
            _check_keys("system", sysd, _SYSTEM_KEYS)
            rate = sysd.pop("bit_rate_mbps", 15.0)
            if "user_delays" in sysd and sysd["user_delays"] is not None:
                sysd["user_delays"] = tuple(sysd["user_delays"])
            kw["system"] = SystemParams.from_mbps(rate, **sysd)
        if "toggles" in data:
            _check_keys("toggles", data["toggles"], {"iasi", "isi", "mui"})
            kw["toggles"] = {"iasi": True, "isi": True, "mui": True, **{k: bool(v) for k, v in data["toggles"].items()}}
        if "ebn0_grid" in data:
            kw["ebn0_grid"] = _grid(data["ebn0_grid"])
        if "engines" in data:
            kw["engines"] = tuple(data["engines"])
        if "users" in data:
            kw["users"] = tuple(int(u) for u in data["users"])
        for key in ("seed", "output", "name", "workers"):
            if key in data:
                kw[key] = data[key]
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(**kw)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if not cfg.engines:
        raise ConfigError("engines must name at least one of " + ", ".join(ENGINES))
    bad = set(cfg.engines) - set(ENGINES)
    if bad:
        raise ConfigError(f"unknown engines: {sorted(bad)}")
    g = cfg.ebn0_grid
    if not g or any(not math.isfinite(x) for x in g) or any(b <= a for a, b in zip(g, g[1:])):
        raise ConfigError("ebn0_grid must be a nonempty, strictly ascending list of finite values")
    if any(u < 1 for u in cfg.users):
        raise ConfigError("users lists total user counts and must be >= 1")
    if not 0 <= int(cfg.seed) < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.pulse.duration_ns > cfg.system.T_c * (1 + 1e-12):
        # pulses in adjacent hop slots would overlap
        raise ConfigError(f"pulse duration T_m={cfg.pulse.duration_ns} exceeds hop slot T_c={cfg.system.T_c}")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return loads(text, str(path))


def loads(text: str, origin: str = "<string>") -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: parse error: {exc}") from exc
    return from_dict(data)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("iruwb.presets").joinpath(f"{name}.toml").read_text()


def load_preset(name: str) -> RunConfig:
    return loads(preset_text(name), f"preset:{name}")
