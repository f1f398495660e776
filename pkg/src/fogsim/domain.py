"""Entities shared by the trace, energy, allocation and simulation layers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple


class Policy(str, enum.Enum):
    """Placement policies. The first three double as application requirements."""

    DEADLINE_AWARE = "DeadlineAware"
    ENERGY_AWARE = "EnergyAware"
    HYBRID = "Hybrid"
    BASELINE_POWER_MIN = "BaselinePowerMin"

    @classmethod
    def parse(cls, name: str) -> "Policy":
        for p in cls:
            if p.value.lower() == name.strip().lower():
                return p
        raise ValueError(f"unknown policy {name!r}")


REGRESSION_POLICIES = (Policy.DEADLINE_AWARE, Policy.ENERGY_AWARE, Policy.HYBRID)


@dataclass
class FogDevice:
    """A battery-powered fog node.

    ``battery_pct`` is the only field the simulator mutates; it never increases.
    """

    id: int
    mips_capacity: float
    bandwidth_bps: float = 100_000.0
    ram_mb: float = 2048.0
    distance_m: float = 20.0
    battery_pct: float = 0.5
    cpu_availability_factor: float = 1.0
    trace_id: int = 0
    power_idle_w: float = 1.0
    power_max_w: float = 5.0
    battery_capacity_j: float = 36_000.0
    mains_powered: bool = field(default=False, repr=False)

    @property
    def remaining_j(self) -> float:
        if self.mains_powered:
            return math.inf
        return self.battery_pct * self.battery_capacity_j

    @property
    def depleted(self) -> bool:
        return not self.mains_powered and self.battery_pct <= 0.0


@dataclass
class FogServer(FogDevice):
    """Mains-powered fog server; battery fields are carried but ignored."""

    mips_capacity: float = 10_000.0
    bandwidth_bps: float = 1_000_000.0
    ram_mb: float = 302_768.0
    battery_pct: float = 1.0
    mains_powered: bool = field(default=True, repr=False)


@dataclass(frozen=True)
class Task:
    task_id: int
    length_mi: float
    data_size_b: float
    subtasks: tuple[float, ...] = ()

    @classmethod
    def split(cls, task_id: int, length_mi: float, subtask_mi: float, data_size_b: float) -> "Task":
        """Cut a task into equal subtasks; a remainder becomes a final short subtask."""
        if length_mi <= 0:
            return cls(task_id, 0.0, data_size_b, ())
        n_full, rest = divmod(length_mi, subtask_mi)
        parts = [subtask_mi] * int(n_full)
        if rest > 0:
            parts.append(rest)
        return cls(task_id, length_mi, data_size_b, tuple(parts))


@dataclass
class ApplicationRequest:
    app_id: int
    submit_time_s: float
    tasks: tuple[Task, ...]
    deadline_s: float
    requirement: Policy | str = Policy.DEADLINE_AWARE

    @property
    def agreed_response_s(self) -> float:
        return self.deadline_s - self.submit_time_s


@dataclass(frozen=True)
class TelemetryRecord:
    """One observed execution: predictor values plus the two outcomes."""

    device_id: int
    cpu_utilization: float
    mobility_m: float
    net_comm_s: float
    response_time_s: float
    power_available: int
    energy_usage_j: float
    exec_time_s: float
    energy_consumed_j: float
    time_s: float = 0.0

    def is_valid(self) -> bool:
        values = (
            self.cpu_utilization,
            self.mobility_m,
            self.net_comm_s,
            self.response_time_s,
            self.energy_usage_j,
            self.exec_time_s,
            self.energy_consumed_j,
        )
        return (
            all(math.isfinite(v) and v >= 0 for v in values)
            and 0.0 <= self.cpu_utilization <= 1.0
            and self.power_available in (0, 1)
        )


@dataclass(frozen=True)
class DeviceLimits:
    """Admissible ranges for generated fog devices."""

    mips_min: float = 2000.0
    mips_max: float = 6000.0
    distance_min_m: float = 5.0
    distance_max_m: float = 40.0
    battery_min: float = 0.20
    battery_max: float = 0.90


class ValidationResult(NamedTuple):
    ok: bool
    violations: tuple[str, ...]


def validate_device(dev: FogDevice, limits: DeviceLimits = DeviceLimits()) -> ValidationResult:
    """Check a freshly generated device against ``limits``.

    Violations are reported by name; nothing is raised.
    """
    bad = []
    if dev.id < 0:
        bad.append("id non-negative")
    if not dev.mains_powered:
        if not limits.mips_min <= dev.mips_capacity <= limits.mips_max:
            bad.append("mips range")
        if not limits.battery_min <= dev.battery_pct <= limits.battery_max:
            bad.append("battery initial range")
        if dev.battery_capacity_j <= 0:
            bad.append("battery capacity positive")
    if not limits.distance_min_m <= dev.distance_m <= limits.distance_max_m:
        bad.append("distance range")
    if dev.power_idle_w < 0 or not dev.power_idle_w < dev.power_max_w:
        bad.append("power ordering")
    if dev.bandwidth_bps <= 0:
        bad.append("bandwidth positive")
    return ValidationResult(not bad, tuple(bad))


def validate_server(srv: FogDevice, mips: float = 10_000.0, bandwidth_bps: float = 1_000_000.0,
                    ram_mb: float = 302_768.0) -> ValidationResult:
    bad = []
    if not srv.mains_powered:
        bad.append("mains powered")
    if srv.mips_capacity != mips:
        bad.append("server mips")
    if srv.bandwidth_bps != bandwidth_bps:
        bad.append("server bandwidth")
    if srv.ram_mb != ram_mb:
        bad.append("server ram")
    if srv.power_idle_w < 0 or not srv.power_idle_w < srv.power_max_w:
        bad.append("power ordering")
    return ValidationResult(not bad, tuple(bad))
