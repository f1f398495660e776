"""Regression-driven device selection and the power-minimising baseline."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .domain import ApplicationRequest, Policy, REGRESSION_POLICIES
from .energy import DEFAULT_SAFETY_MARGIN, power_available_array
from .regression import EPSILON_ENERGY_J, EPSILON_TIME_S, RegressionModel, Schema


class NoDevices(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FleetView:
    """Column snapshot of the candidate devices at one decision instant."""

    device_id: np.ndarray
    cpu_util: np.ndarray
    mobility_m: np.ndarray
    netcomm_s: np.ndarray
    resptime_s: np.ndarray
    energy_usage_j: np.ndarray
    remaining_j: np.ndarray
    mains: np.ndarray
    power_idle_w: np.ndarray
    power_max_w: np.ndarray
    time_s: float = 0.0

    def __post_init__(self):
        n = len(self.device_id)
        for name in ("cpu_util", "mobility_m", "netcomm_s", "resptime_s", "energy_usage_j",
                     "remaining_j", "mains", "power_idle_w", "power_max_w"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        ids = np.asarray(self.device_id, dtype=np.int64)
        ids.setflags(write=False)
        object.__setattr__(self, "device_id", ids)

    def __len__(self) -> int:
        return len(self.device_id)

    @classmethod
    def from_rows(cls, rows: Sequence[dict], time_s: float = 0.0) -> "FleetView":
        """Build a view from per-device dicts; missing keys take harmless defaults."""
        def col(key, default=0.0, dtype=float):
            return np.array([r.get(key, default) for r in rows], dtype=dtype)
        return cls(
            device_id=col("device_id", 0, np.int64),
            cpu_util=col("cpu_util"),
            mobility_m=col("mobility_m"),
            netcomm_s=col("netcomm_s"),
            resptime_s=col("resptime_s"),
            energy_usage_j=col("energy_usage_j"),
            remaining_j=col("remaining_j", math.inf),
            mains=col("mains", False, bool),
            power_idle_w=col("power_idle_w", 1.0),
            power_max_w=col("power_max_w", 5.0),
            time_s=time_s,
        )

    def subset(self, mask: np.ndarray) -> "FleetView":
        return FleetView(**{k: (getattr(self, k)[mask] if k != "time_s" else self.time_s)
                            for k in self.__dataclass_fields__})


@dataclass(frozen=True)
class ModelSet:
    exec_time: RegressionModel
    energy: RegressionModel
    version: int = 0

    def __post_init__(self):
        if self.exec_time.schema not in (Schema.EXEC_TIME_FULL, Schema.EXEC_TIME_BASE):
            raise ValueError("exec_time model must use an ExecTime schema")
        if self.energy.schema is not Schema.ENERGY_FULL:
            raise ValueError("energy model must use the EnergyFull schema")


@dataclass(frozen=True, eq=False)
class Scores:
    device_id: np.ndarray
    etp: np.ndarray
    eec: np.ndarray
    power_available: np.ndarray = field(default=None)

    def __post_init__(self):
        ids = np.asarray(self.device_id, dtype=np.int64)
        etp = np.asarray(self.etp, dtype=float)
        eec = np.asarray(self.eec, dtype=float)
        if not ids.shape == etp.shape == eec.shape:
            raise ValueError("score columns differ in length")
        pa = np.ones(ids.shape, dtype=np.int64) if self.power_available is None \
            else np.asarray(self.power_available, dtype=np.int64)
        object.__setattr__(self, "device_id", ids)
        object.__setattr__(self, "etp", etp)
        object.__setattr__(self, "eec", eec)
        object.__setattr__(self, "power_available", pa)

    def __len__(self) -> int:
        return len(self.device_id)

    def subset(self, mask: np.ndarray) -> "Scores":
        return Scores(self.device_id[mask], self.etp[mask], self.eec[mask], self.power_available[mask])


@dataclass(frozen=True)
class AllocParams:
    hybrid_weight: float = 0.5
    safety_margin: float = DEFAULT_SAFETY_MARGIN

    def __post_init__(self):
        if not 0.0 <= self.hybrid_weight <= 1.0:
            raise ValueError("hybrid_weight must be in [0, 1]")


@dataclass(frozen=True)
class AllocationDecision:
    app_id: int
    chosen_device_id: int | None
    policy: Policy | None
    predicted_exec_s: float = math.nan
    predicted_energy_j: float = math.nan
    decided_at_s: float = 0.0
    filtered_fallback: bool = False


def _exec_matrix(view: FleetView, schema: Schema, pa: np.ndarray) -> np.ndarray:
    X = np.empty((len(view), schema.arity))
    X[:, 0] = view.cpu_util
    X[:, 1] = view.mobility_m
    X[:, 2] = view.netcomm_s
    X[:, 3] = view.resptime_s
    if schema is Schema.EXEC_TIME_FULL:
        X[:, 4] = pa
        X[:, 5] = view.energy_usage_j
    return X


def score_all(view: FleetView, app: ApplicationRequest | None, models: ModelSet,
              params: AllocParams = AllocParams()) -> Scores:
    """Predicted execution time and energy for every candidate.

    Power availability is itself a predictor, so it is settled first from an
    execution-time estimate that assumes power is available.
    """
    if len(view) == 0:
        raise NoDevices("no candidate devices")
    et = models.exec_time
    ones = np.ones(len(view))
    X = _exec_matrix(view, et.schema, ones)
    etp_assumed = np.maximum(EPSILON_TIME_S, et.evaluate(X))
    pa = power_available_array(view.remaining_j, view.mains, etp_assumed, view.power_max_w,
                               params.safety_margin)
    if et.schema is Schema.EXEC_TIME_FULL and not pa.all():
        X[:, 4] = pa
        etp = np.maximum(EPSILON_TIME_S, et.evaluate(X))
    else:
        etp = etp_assumed
    Xe = _exec_matrix(view, Schema.EXEC_TIME_FULL, pa)
    Xe[:, 5] = etp
    eec = np.maximum(EPSILON_ENERGY_J, models.energy.evaluate(Xe))
    return Scores(view.device_id, etp, eec, pa)


def _argmin_lowest_id(ids: np.ndarray, values: np.ndarray) -> int:
    if len(ids) == 0:
        raise NoDevices("no candidate devices")
    best = values.min()
    return int(ids[values == best].min())


def select_deadline(scores: Scores) -> int:
    return _argmin_lowest_id(scores.device_id, scores.etp)


def select_energy(scores: Scores) -> int:
    return _argmin_lowest_id(scores.device_id, scores.eec)


def _minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def select_hybrid(scores: Scores, weight_w: float = 0.5) -> int:
    """Weighted sum of min-max normalised time and energy; w=1 is pure deadline."""
    if not 0.0 <= weight_w <= 1.0:
        raise ValueError("weight must be in [0, 1]")
    if len(scores) == 0:
        raise NoDevices("no candidate devices")
    combined = weight_w * _minmax(scores.etp) + (1.0 - weight_w) * _minmax(scores.eec)
    return _argmin_lowest_id(scores.device_id, combined)


def allocate(view: FleetView, app: ApplicationRequest, models: ModelSet,
             params: AllocParams = AllocParams()) -> AllocationDecision:
    """Choose a device for ``app`` according to its requirement.

    Devices predicted to run out of battery are dropped first; if that empties
    the candidate set the full set is used and the decision is flagged.
    An unrecognised requirement yields a decision with no device.
    """
    if len(view) == 0:
        raise NoDevices("empty fleet")
    req = app.requirement
    if req not in REGRESSION_POLICIES:
        return AllocationDecision(app.app_id, None, None, decided_at_s=view.time_s)
    req = Policy(req)
    scores = score_all(view, app, models, params)
    ok = scores.power_available == 1
    fallback = not ok.any()
    cand = scores if fallback or ok.all() else scores.subset(ok)
    if req is Policy.DEADLINE_AWARE:
        chosen = select_deadline(cand)
    elif req is Policy.ENERGY_AWARE:
        chosen = select_energy(cand)
    else:
        chosen = select_hybrid(cand, params.hybrid_weight)
    i = int(np.flatnonzero(scores.device_id == chosen)[0])
    return AllocationDecision(app.app_id, chosen, req, float(scores.etp[i]), float(scores.eec[i]),
                              view.time_s, fallback)


def baseline_power_min(view: FleetView, app: ApplicationRequest) -> AllocationDecision:
    """Greedy proxy for a power-minimising placement: least current draw wins."""
    if len(view) == 0:
        raise NoDevices("empty fleet")
    draw = view.power_idle_w + (view.power_max_w - view.power_idle_w) * view.cpu_util
    chosen = _argmin_lowest_id(view.device_id, draw)
    return AllocationDecision(app.app_id, chosen, Policy.BASELINE_POWER_MIN, decided_at_s=view.time_s)


DECISION_LOG_HEADER = ["time_s", "app_id", "policy", "device_id", "etp_s", "eec_j", "filtered_fallback"]


def _num(x: float | None) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(x)


def decisions_to_csv(decisions: Iterable[AllocationDecision]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DECISION_LOG_HEADER)
    for d in decisions:
        w.writerow([repr(d.decided_at_s), d.app_id, d.policy.value if d.policy else "",
                    "" if d.chosen_device_id is None else d.chosen_device_id,
                    _num(d.predicted_exec_s), _num(d.predicted_energy_j), int(d.filtered_fallback)])
    return buf.getvalue()


def decisions_from_csv(text: str) -> list[AllocationDecision]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(AllocationDecision(
            app_id=int(row["app_id"]),
            chosen_device_id=int(row["device_id"]) if row["device_id"] else None,
            policy=Policy(row["policy"]) if row["policy"] else None,
            predicted_exec_s=float(row["etp_s"]) if row["etp_s"] else math.nan,
            predicted_energy_j=float(row["eec_j"]) if row["eec_j"] else math.nan,
            decided_at_s=float(row["time_s"]),
            filtered_fallback=bool(int(row["filtered_fallback"])),
        ))
    return out
