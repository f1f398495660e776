"""Utilisation-driven power model, exact trace integration and battery bookkeeping."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .domain import FogDevice
from .trace import UtilizationTrace

DEFAULT_SAFETY_MARGIN = 1.2


class EnergyError(ValueError):
    pass


class UtilizationOutOfRange(EnergyError):
    pass


class InvalidWindow(EnergyError):
    pass


@dataclass(frozen=True)
class PowerModel:
    power_idle_w: float = 1.0
    power_max_w: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.power_idle_w < self.power_max_w:
            raise EnergyError(f"need 0 <= idle < max, got {self.power_idle_w}, {self.power_max_w}")

    @classmethod
    def of(cls, dev: FogDevice) -> "PowerModel":
        return cls(dev.power_idle_w, dev.power_max_w)


def power_at(model: PowerModel, utilization: float) -> float:
    if not 0.0 <= utilization <= 1.0:
        raise UtilizationOutOfRange(f"utilization {utilization} outside [0, 1]")
    return model.power_idle_w + (model.power_max_w - model.power_idle_w) * utilization


def _segments(trace: UtilizationTrace, t0: float, t1: float):
    """Yield (sample_index, start, end) for trace segments covering [t0, t1)."""
    dt = trace.sample_interval_s
    t = t0
    k = math.floor(t / dt)
    while t < t1:
        end = (k + 1) * dt
        if end <= t:  # rounding put t on the far side of a boundary
            k += 1
            continue
        end = min(end, t1)
        yield k, t, end
        t = end
        k += 1


def energy_over(model: PowerModel, trace: UtilizationTrace, t0_s: float, t1_s: float,
                load: float = 0.0) -> float:
    """Integrate power over [t0, t1] under the trace raised by ``load`` (capped at 1)."""
    if not 0.0 <= t0_s <= t1_s:
        raise InvalidWindow(f"bad window [{t0_s}, {t1_s}]")
    samples = trace.samples
    n = samples.size
    total = 0.0
    for k, a, b in _segments(trace, t0_s, t1_s):
        u = float(samples[k % n])
        if load:
            u = min(1.0, u + load)
        total += power_at(model, u) * (b - a)
    return total


@functools.lru_cache(maxsize=4096)
def _profile(model: PowerModel, trace: UtilizationTrace) -> tuple[np.ndarray, np.ndarray]:
    powers = model.power_idle_w + (model.power_max_w - model.power_idle_w) * trace.samples
    cum = np.concatenate(([0.0], np.cumsum(powers * trace.sample_interval_s)))
    return powers, cum


def depletion_time(model: PowerModel, trace: UtilizationTrace, t0_s: float, joules: float,
                   load: float = 0.0, load_until_s: float | None = None) -> float:
    """Earliest t >= t0 at which the device has drawn ``joules`` since t0.

    ``load`` raises utilisation until ``load_until_s``; background only afterwards.
    Returns ``inf`` if the device never draws power.
    """
    if joules <= 0:
        return t0_s
    remaining = joules
    t = t0_s
    samples = trace.samples
    n = samples.size
    if load and load_until_s is not None and load_until_s > t0_s:
        for k, a, b in _segments(trace, t0_s, load_until_s):
            p = power_at(model, min(1.0, float(samples[k % n]) + load))
            e = p * (b - a)
            if e >= remaining and p > 0:
                return a + remaining / p
            remaining -= e
        t = load_until_s

    powers, cum = _profile(model, trace)
    period_e = float(cum[-1])
    if period_e <= 0:
        return math.inf
    dt = trace.sample_interval_s

    # finish the partial segment
    k = math.floor(t / dt)
    if (k + 1) * dt <= t:
        k += 1
    p = float(powers[k % n])
    e = p * ((k + 1) * dt - t)
    if e >= remaining and p > 0:
        return t + remaining / p
    remaining -= e
    k += 1

    i = k % n
    to_period_end = period_e - float(cum[i])
    if remaining > to_period_end:
        remaining -= to_period_end
        k += n - i
        i = 0
        q = math.floor(remaining / period_e)
        remaining -= q * period_e
        k += q * n
        if remaining <= 0:
            return k * dt
    target = float(cum[i]) + remaining
    j = int(np.searchsorted(cum, target, side="left"))
    seg = min(max(j - 1, i), n - 1)
    start = (k + seg - i) * dt
    return start + (target - float(cum[seg])) / float(powers[seg])


def drain_battery(dev: FogDevice, joules: float) -> tuple[float, bool]:
    """Remove ``joules`` from the battery; returns (new battery_pct, depleted)."""
    if joules < 0:
        raise EnergyError("cannot drain negative energy")
    if dev.mains_powered:
        return dev.battery_pct, False
    dev.battery_pct = max(0.0, dev.battery_pct - joules / dev.battery_capacity_j)
    return dev.battery_pct, dev.battery_pct == 0.0


def power_available(dev: FogDevice, predicted_exec_s: float, predicted_power_w: float,
                    margin: float = DEFAULT_SAFETY_MARGIN) -> int:
    """1 if the battery covers the predicted run with ``margin`` to spare."""
    return int(power_available_array(
        np.array([dev.remaining_j]), np.array([dev.mains_powered]),
        np.array([predicted_exec_s]), np.array([predicted_power_w]), margin)[0])


def power_available_array(remaining_j: np.ndarray, mains: np.ndarray, predicted_exec_s: np.ndarray,
                          predicted_power_w: np.ndarray, margin: float = DEFAULT_SAFETY_MARGIN) -> np.ndarray:
    need = predicted_exec_s * predicted_power_w * margin
    return (mains | (remaining_j >= need)).astype(np.int64)
