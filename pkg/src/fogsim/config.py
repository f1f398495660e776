"""Scenario configuration: flat ``key = value`` files with published defaults."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .domain import Policy

ALL_POLICIES = (Policy.DEADLINE_AWARE, Policy.ENERGY_AWARE, Policy.HYBRID, Policy.BASELINE_POWER_MIN)
TRACE_DIR_ENV = "FOGSIM_TRACE_DIR"


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, line_no: int, msg: str):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


class UnknownKey(ConfigError):
    def __init__(self, name: str, line_no: int | None = None):
        where = f"line {line_no}: " if line_no else ""
        super().__init__(f"{where}unknown key {name!r}")
        self.name = name


class OutOfRange(ConfigError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass(frozen=True)
class ScenarioConfig:
    # scale
    n_devices: int = 50
    n_servers: int = 1
    n_apps: int = 280
    horizon_s: float = 3600.0
    policies: tuple[Policy, ...] = ALL_POLICIES
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    # fog devices
    device_mips_min: float = 2000.0
    device_mips_max: float = 6000.0
    device_bandwidth_bps: float = 100_000.0
    device_ram_mb: float = 2048.0
    distance_min_m: float = 5.0
    distance_max_m: float = 40.0
    battery_min: float = 0.20
    battery_max: float = 0.90
    battery_capacity_j: float = 36_000.0
    power_idle_w: float = 1.0
    power_max_w: float = 5.0
    # fog server
    server_mips: float = 10_000.0
    server_bandwidth_bps: float = 1_000_000.0
    server_ram_mb: float = 302_768.0
    server_power_idle_w: float = 1.0
    server_power_max_w: float = 5.0
    # workload
    tasks_per_app: int = 10
    task_length_mi: float = 3000.0
    subtask_length_mi: float = 500.0
    data_size_min_b: float = 5120.0
    data_size_max_b: float = 10240.0
    deadline_slack_min: float = 0.10
    deadline_slack_max: float = 0.80
    min_deadline_slack_s: float = 4.0
    # execution dynamics
    cpu_avail_min: float = 0.50
    cpu_avail_max: float = 1.30
    util_var_min: float = 0.10
    util_var_max: float = 0.40
    # traces; empty trace_dir means synthetic
    trace_dir: str = ""
    synth_trace_count: int = 32
    synth_trace_length: int = 288
    synth_mean_min: float = 0.05
    synth_mean_max: float = 0.50
    synth_jitter: float = 0.10
    # learning and allocation
    window_capacity: int = 500
    retrain_every: int = 25
    hybrid_weight: float = 0.5
    safety_margin: float = 1.2
    # sla and pricing
    sla_alpha: float = 1.0
    sla_beta: float = 0.5
    price_per_million_msgs: float = 1.65
    price_per_million_conn_min: float = 0.132
    messages_per_task: int = 2
    # guards
    max_events: int = 10_000_000

    def __post_init__(self):
        _validate(self)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def resolved_trace_dir(self) -> str:
        return os.environ.get(TRACE_DIR_ENV) or self.trace_dir


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def _check(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise OutOfRange(key, msg)


def _validate(c: ScenarioConfig) -> None:
    for key in ("n_devices", "tasks_per_app", "synth_trace_count", "synth_trace_length",
                "window_capacity", "retrain_every", "max_events"):
        _check(getattr(c, key) >= 1, key, "must be >= 1")
    for key in ("n_servers", "n_apps", "messages_per_task"):
        _check(getattr(c, key) >= 0, key, "must be >= 0")
    for key in ("horizon_s", "device_mips_min", "device_bandwidth_bps", "server_mips",
                "server_bandwidth_bps", "battery_capacity_j", "subtask_length_mi"):
        _check(getattr(c, key) > 0, key, "must be > 0")
    for lo, hi in (("device_mips_min", "device_mips_max"), ("distance_min_m", "distance_max_m"),
                   ("battery_min", "battery_max"), ("data_size_min_b", "data_size_max_b"),
                   ("deadline_slack_min", "deadline_slack_max"), ("cpu_avail_min", "cpu_avail_max"),
                   ("util_var_min", "util_var_max"), ("synth_mean_min", "synth_mean_max")):
        _check(getattr(c, lo) <= getattr(c, hi), lo, f"must not exceed {hi}")
    for key in ("battery_min", "battery_max", "synth_mean_min", "synth_mean_max", "hybrid_weight",
                "util_var_min", "util_var_max"):
        _check(0.0 <= getattr(c, key) <= 1.0, key, "must be in [0, 1]")
    for key in ("distance_min_m", "task_length_mi", "data_size_min_b", "deadline_slack_min",
                "min_deadline_slack_s", "cpu_avail_min", "synth_jitter", "sla_alpha", "sla_beta",
                "price_per_million_msgs", "price_per_million_conn_min"):
        _check(getattr(c, key) >= 0, key, "must be >= 0")
    _check(c.cpu_avail_min > 0, "cpu_avail_min", "must be > 0")
    _check(0 <= c.power_idle_w < c.power_max_w, "power_idle_w", "need 0 <= idle < max")
    _check(0 <= c.server_power_idle_w < c.server_power_max_w, "server_power_idle_w", "need 0 <= idle < max")
    _check(c.safety_margin >= 0, "safety_margin", "must be >= 0")
    _check(len(c.policies) >= 1, "policies", "need at least one policy")
    _check(len(c.seeds) >= 1, "seeds", "need at least one seed")


def _parse_value(key: str, text: str):
    ftype = _FIELDS[key].type
    if key == "policies":
        return tuple(Policy.parse(p) for p in text.split(",") if p.strip())
    if key == "seeds":
        return tuple(int(s) for s in text.split(",") if s.strip())
    if ftype == "int":
        return int(text)
    if ftype == "float":
        return float(text)
    return text


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(v.value if isinstance(v, Policy) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, unset keys keep defaults."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(line_no, f"expected 'key = value', got {raw.strip()!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in _FIELDS:
            raise UnknownKey(key, line_no)
        try:
            values[key] = _parse_value(key, val)
        except ValueError as exc:
            raise ParseError(line_no, f"bad value for {key}: {val!r} ({exc})") from None
    return dataclasses.replace(base or ScenarioConfig(), **values)


def load_config(path: str | os.PathLike | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: ScenarioConfig) -> str:
    return "".join(f"{k} = {_format_value(getattr(cfg, k))}\n" for k in _FIELDS)
