"""Scenario description and the flat ``section.key = value`` config format.

One file describes one cell::

    # 5 uplink bulk TCP flows, RTS on every frame, adaptive FEC
    scenario.duration = 310
    scenario.warmup = 10
    workload.kind = bulk
    workload.n = 5
    workload.mss = 1000
    workload.window = 10
    mac.rts_mode = always
    fec.policy = adaptive

Sections: ``scenario``, ``channel``, ``mac``, ``fec``, ``tcp``, ``workload``,
``web``. Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from ..channel import ChannelParams, FecConfig
from ..mac import MacParams
from ..traffic import DOWNLINK, UPLINK, WebParams
from ..transport import TcpParams

WORKLOADS = ("bulk", "web", "voice", "saturated")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending key."""


@dataclass(frozen=True)
class Workload:
    kind: str = "bulk"
    n: int = 5  # connections, web sessions, voice pairs or saturated stations
    mss: int = 1000
    window: int = 10
    direction: str = UPLINK
    udp_bytes: int = 200
    bulk_mss: int = 1500
    bulk_window: int = 1
    bulk_direction: str = UPLINK
    talk_mean: float = 1.0
    silence_mean: float = 1.35
    codec_rate: int = 32_000
    deadline: float = 0.5

    def __post_init__(self):
        if self.kind not in WORKLOADS:
            raise ConfigError(f"workload.kind: expected one of {', '.join(WORKLOADS)}, got {self.kind!r}")
        for name in ("n", "mss", "window", "udp_bytes", "bulk_mss", "bulk_window", "codec_rate"):
            if getattr(self, name) < 1:
                raise ConfigError(f"workload.{name}: must be >= 1")
        for name in ("talk_mean", "silence_mean", "deadline"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"workload.{name}: must be positive")
        for name in ("direction", "bulk_direction"):
            if getattr(self, name) not in (UPLINK, DOWNLINK):
                raise ConfigError(f"workload.{name}: expected uplink or downlink")

    @property
    def stations_needed(self) -> int:
        return self.n + 1 if self.kind == "voice" else self.n


@dataclass(frozen=True)
class Scenario:
    n_mobiles: int = 0  # 0: as many as the workload needs
    wired_rate: int = 5_000_000
    wired_delay: float = 0.002
    duration: float = 310.0
    warmup: float = 10.0
    channel: ChannelParams = field(default_factory=ChannelParams)
    mac: MacParams = field(default_factory=MacParams)
    fec: FecConfig = field(default_factory=FecConfig)
    tcp: TcpParams = field(default_factory=TcpParams)
    workload: Workload = field(default_factory=Workload)
    web: WebParams = field(default_factory=WebParams)

    def __post_init__(self):
        if self.wired_rate <= 0:
            raise ConfigError("scenario.wired_rate: must be positive")
        if self.wired_delay < 0:
            raise ConfigError("scenario.wired_delay: must be >= 0")
        if self.warmup < 0:
            raise ConfigError("scenario.warmup: must be >= 0")
        if not self.duration > self.warmup:
            raise ConfigError(
                f"scenario.duration: must exceed scenario.warmup ({self.duration} <= {self.warmup})"
            )
        if self.n_mobiles and self.n_mobiles < self.workload.stations_needed:
            raise ConfigError(
                f"scenario.n_mobiles: workload needs {self.workload.stations_needed} mobiles"
            )

    @property
    def mobiles(self) -> int:
        return self.n_mobiles or self.workload.stations_needed


_SECTIONS = {
    "channel": ChannelParams,
    "mac": MacParams,
    "fec": FecConfig,
    "tcp": TcpParams,
    "workload": Workload,
    "web": WebParams,
}


def _convert(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            try:
                return int(raw)
            except ValueError:
                f = float(raw)
                if not f.is_integer():
                    raise
                return int(f)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(default).__name__}") from None


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines to an ordered dict; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"{key}: set twice (line {lineno})")
        out[key] = value.strip()
    return out


def scenario_from_dict(values: dict[str, str]) -> Scenario:
    """Build a validated Scenario from flat ``section.key`` strings."""
    top: dict[str, object] = {}
    parts: dict[str, dict[str, object]] = {name: {} for name in _SECTIONS}
    top_fields = {f.name: f for f in fields(Scenario) if f.name not in _SECTIONS}
    for key, raw in values.items():
        section, _, name = key.partition(".")
        if section == "scenario":
            f = top_fields.get(name)
            if f is None:
                raise ConfigError(f"{key}: unknown key")
            top[name] = _convert(key, raw, f.default)
        elif section in _SECTIONS:
            cls = _SECTIONS[section]
            known = {f.name: f for f in fields(cls)}
            f = known.get(name)
            if f is None:
                raise ConfigError(f"{key}: unknown key")
            parts[section][name] = _convert(key, raw, f.default)
        else:
            raise ConfigError(f"{key}: unknown section {section!r}")
    built = {}
    for section, cls in _SECTIONS.items():
        try:
            built[section] = cls(**parts[section])
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc) if str(exc).startswith(section) else f"{section}: {exc}") from None
    try:
        return Scenario(**top, **built)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from None


def load_scenario(text: str, overrides: dict[str, str] | None = None) -> Scenario:
    values = parse_config_text(text)
    if overrides:
        values.update(overrides)
    return scenario_from_dict(values)


def scenario_to_dict(s: Scenario) -> dict[str, str]:
    out = {}
    for f in fields(Scenario):
        val = getattr(s, f.name)
        if dataclasses.is_dataclass(val):
            for g in fields(val):
                out[f"{f.name}.{g.name}"] = str(getattr(val, g.name))
        else:
            out[f"scenario.{f.name}"] = str(val)
    return out


def scenario_to_text(s: Scenario) -> str:
    return "".join(f"{k} = {v}\n" for k, v in scenario_to_dict(s).items())


def with_overrides(s: Scenario, overrides: dict[str, str]) -> Scenario:
    values = scenario_to_dict(s)
    values.update(overrides)
    return scenario_from_dict(values)


__all__ = [
    "ConfigError",
    "Scenario",
    "Workload",
    "load_scenario",
    "parse_config_text",
    "scenario_from_dict",
    "scenario_to_dict",
    "scenario_to_text",
    "with_overrides",
]
