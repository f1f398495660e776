"""Deterministic discrete-event simulation of a battery-powered fog fleet.

One run replays seeded application arrivals against a fleet whose background
load follows utilisation traces. Every task is placed by the configured
policy, executes with fluctuating CPU availability, drains the battery of its
device and, on completion, feeds a telemetry record back into the regression
window used by the next placements.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import heapq
import io
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import trace as tr
from .alloc import (AllocationDecision, AllocParams, FleetView, ModelSet, NoDevices, allocate,
                    baseline_power_min)
from .config import ScenarioConfig
from .domain import ApplicationRequest, FogDevice, FogServer, Policy, Task, TelemetryRecord
from .energy import PowerModel, depletion_time, drain_battery, energy_over, power_available_array
from .metrics import Prices, RunReport, SlaTerms, TaskRecord, aggregate
from .regression import (InsufficientData, RankDeficient, RegressionModel, Schema, TrainingWindow,
                         cold_start_model, fit)


class SimError(RuntimeError):
    pass


class DiagnosticAbort(SimError):
    pass


class EventKind(enum.IntEnum):
    APP_ARRIVAL = 0
    TASK_START = 1
    TASK_COMPLETE = 2
    DEVICE_DEPLETED = 3
    RETRAIN_MODELS = 4


class Event(NamedTuple):
    """Heap entry; ``seq`` makes the (time, seq) order total."""

    time_s: float
    seq: int
    kind: EventKind
    payload: object = None


def effective_mips(dev: FogDevice, availability: float = 1.0) -> float:
    return dev.mips_capacity * availability


def draw_fluctuation(rng: np.random.Generator, cfg: ScenarioConfig) -> tuple[float, float]:
    """(CPU availability factor, utilisation increase) for one task start."""
    return (float(rng.uniform(cfg.cpu_avail_min, cfg.cpu_avail_max)),
            float(rng.uniform(cfg.util_var_min, cfg.util_var_max)))


def transfer_time(data_size_b: float, bandwidth_bps: float) -> float:
    return data_size_b * 8.0 / bandwidth_bps


def task_service_time(task: Task, dev: FogDevice, availability: float = 1.0) -> float:
    """Compute time of all subtasks at the fluctuated rate plus input transfer."""
    mips = effective_mips(dev, availability)
    compute = sum(sub / mips for sub in task.subtasks)
    return compute + transfer_time(task.data_size_b, dev.bandwidth_bps)


@dataclass
class Scenario:
    devices: list[FogDevice]
    traces: list[tr.UtilizationTrace]
    apps: list[ApplicationRequest]

    def trace_of(self, dev: FogDevice) -> tr.UtilizationTrace:
        return self.traces[dev.trace_id]


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)]


def build_scenario(cfg: ScenarioConfig, seed: int) -> Scenario:
    """Generate the fleet, trace assignment and workload for one seed.

    Independent random streams keep the fleet identical across sweep points
    that only change the number of applications, and vice versa.
    """
    dev_rng, trace_rng, assign_rng, app_rng, _ = _streams(seed)

    trace_dir = cfg.resolved_trace_dir()
    if trace_dir:
        traces = tr.load_trace_dir(trace_dir)
    else:
        traces = tr.synth_trace_set(trace_rng, cfg.synth_trace_count, cfg.synth_trace_length,
                                    cfg.synth_mean_min, cfg.synth_mean_max, cfg.synth_jitter)

    n = cfg.n_devices
    mips = dev_rng.uniform(cfg.device_mips_min, cfg.device_mips_max, n)
    dist = dev_rng.uniform(cfg.distance_min_m, cfg.distance_max_m, n + cfg.n_servers)
    batt = dev_rng.uniform(cfg.battery_min, cfg.battery_max, n)
    devices: list[FogDevice] = [
        FogDevice(id=i, mips_capacity=float(mips[i]), bandwidth_bps=cfg.device_bandwidth_bps,
                  ram_mb=cfg.device_ram_mb, distance_m=float(dist[i]), battery_pct=float(batt[i]),
                  power_idle_w=cfg.power_idle_w, power_max_w=cfg.power_max_w,
                  battery_capacity_j=cfg.battery_capacity_j)
        for i in range(n)
    ]
    devices += [
        FogServer(id=n + j, mips_capacity=cfg.server_mips, bandwidth_bps=cfg.server_bandwidth_bps,
                  ram_mb=cfg.server_ram_mb, distance_m=float(dist[n + j]),
                  power_idle_w=cfg.server_power_idle_w, power_max_w=cfg.server_power_max_w)
        for j in range(cfg.n_servers)
    ]
    mapping = tr.assign_traces([d.id for d in devices], traces, assign_rng)
    for d in devices:
        d.trace_id = mapping[d.id]

    nominal_mips = 0.5 * (cfg.device_mips_min + cfg.device_mips_max)
    submits = np.sort(app_rng.uniform(0.0, cfg.horizon_s, cfg.n_apps))
    apps = []
    for a in range(cfg.n_apps):
        sizes = app_rng.integers(int(cfg.data_size_min_b), int(cfg.data_size_max_b), cfg.tasks_per_app,
                                 endpoint=True)
        tasks = tuple(Task.split(t, cfg.task_length_mi, cfg.subtask_length_mi, float(sizes[t]))
                      for t in range(cfg.tasks_per_app))
        slack = float(app_rng.uniform(cfg.deadline_slack_min, cfg.deadline_slack_max))
        est = cfg.task_length_mi / nominal_mips + transfer_time(float(sizes.max()), cfg.device_bandwidth_bps)
        agreed = est + max(est * slack, cfg.min_deadline_slack_s)
        submit = float(submits[a])
        apps.append(ApplicationRequest(a, submit, tasks, submit + agreed))
    return Scenario(devices, traces, apps)


@dataclass
class _Attempt:
    app: ApplicationRequest
    task: Task
    retries: int
    alloc_s: float = 0.0
    device: int = -1
    cpu: float = 0.0
    mobility: float = 0.0
    netcomm: float = 0.0
    pa: int = 1
    energy_usage: float = 0.0
    nominal_s: float = 0.0
    start_s: float = math.nan
    end_s: float = math.nan
    util_increase: float = 0.0


@dataclass(frozen=True)
class DecisionSnapshot:
    """Everything ``allocate`` saw, so a decision can be replayed offline."""

    view: FleetView
    app: ApplicationRequest
    models_version: int
    params: AllocParams
    decision: AllocationDecision


@dataclass
class DeviceEnergy:
    device_id: int
    busy: list[tuple[float, float, float]]
    task_j: float
    idle_j: float
    alive_until_s: float

    @property
    def total_j(self) -> float:
        return self.task_j + self.idle_j


@dataclass
class RunResult:
    policy: Policy
    seed: int
    config: ScenarioConfig
    report: RunReport
    records: list[TaskRecord]
    telemetry: list[TelemetryRecord]
    decisions: list[AllocationDecision]
    models: list[ModelSet]
    device_energy: list[DeviceEnergy]
    scenario: Scenario
    end_s: float
    events_processed: int
    snapshots: list[DecisionSnapshot] = field(default_factory=list)

    @property
    def total_tasks(self) -> int:
        return sum(len(a.tasks) for a in self.scenario.apps)


class Simulator:
    def __init__(self, cfg: ScenarioConfig, policy: Policy | str, seed: int, keep_snapshots: bool = False):
        self.cfg = cfg
        self.policy = Policy(policy)
        self.seed = seed
        self.keep_snapshots = keep_snapshots
        self.params = AllocParams(cfg.hybrid_weight, cfg.safety_margin)
        self.prices = Prices(cfg.price_per_million_msgs, cfg.price_per_million_conn_min, cfg.messages_per_task)
        self.prices.check()
        self.scenario = build_scenario(cfg, seed)
        self.exec_rng = _streams(seed)[4]
        for app in self.scenario.apps:
            if self.policy is not Policy.BASELINE_POWER_MIN:
                app.requirement = self.policy
        self._init_fleet()

        fog = [d for d in self.devices if not d.mains_powered] or self.devices
        self.models = ModelSet(cold_start_model(Schema.EXEC_TIME_FULL, fog, cfg.task_length_mi),
                               cold_start_model(Schema.ENERGY_FULL, fog, cfg.task_length_mi), 0)
        self.model_history = [self.models]
        self.base_model: RegressionModel = cold_start_model(Schema.EXEC_TIME_BASE, fog, cfg.task_length_mi)
        self.window = TrainingWindow(cfg.window_capacity)

        self.now = 0.0
        self._heap: list[Event] = []
        self._seq = 0
        self.records: list[TaskRecord] = []
        self.telemetry: list[TelemetryRecord] = []
        self.decisions: list[AllocationDecision] = []
        self.snapshots: list[DecisionSnapshot] = []
        self.completions = 0
        self.resolved = 0
        self.events_processed = 0

    # fleet state -------------------------------------------------------------

    def _init_fleet(self) -> None:
        devs = self.devices = [dataclasses.replace(d) for d in self.scenario.devices]
        traces = self.traces = [self.scenario.trace_of(d) for d in devs]
        self.power_models = [PowerModel.of(d) for d in devs]
        intervals = {t.sample_interval_s for t in traces}
        if len(intervals) != 1:
            raise SimError("all traces must share one sample interval")
        self.dt = intervals.pop()
        n = len(devs)
        self.ids = np.arange(n, dtype=np.int64)
        self.mips = np.array([d.mips_capacity for d in devs])
        self.bw = np.array([d.bandwidth_bps for d in devs])
        self.dist = np.array([d.distance_m for d in devs])
        self.idle_w = np.array([d.power_idle_w for d in devs])
        self.max_w = np.array([d.power_max_w for d in devs])
        self.mains = np.array([d.mains_powered for d in devs])
        self.S, self.O, self.L = tr.as_flat(traces)
        dev_of_sample = np.repeat(np.arange(n), self.L)
        self.P = self.idle_w[dev_of_sample] + (self.max_w - self.idle_w)[dev_of_sample] * self.S
        # per-device prefix energies of the background load, one extra slot each
        self.C = np.concatenate([np.concatenate(([0.0], np.cumsum(self.P[o:o + l] * self.dt)))
                                 for o, l in zip(self.O, self.L)])
        self.O2 = self.O + np.arange(n)
        self.E_period = self.C[self.O2 + self.L]

        self.alive = np.ones(n, dtype=bool)
        self._refresh_alive()
        self.t_last = np.zeros(n)
        self.B_last = np.zeros(n)
        self.R_last = np.array([d.remaining_j for d in devs])
        self.run_var = np.zeros(n)
        self.run_start = np.zeros(n)
        self.busy_until = np.zeros(n)
        self.queued_nominal = np.zeros(n)
        self.queues: list[deque[_Attempt]] = [deque() for _ in range(n)]
        self.running: list[_Attempt | None] = [None] * n
        self.start_pending = [False] * n
        self.dep_version = [0] * n
        self.death_s = [math.nan] * n
        self.busy: list[list[tuple[float, float, float]]] = [[] for _ in range(n)]
        self.task_j = [0.0] * n

    def _background_cum_one(self, i: int, t: float) -> float:
        k = math.floor(t / self.dt)
        q, r = divmod(k, int(self.L[i]))
        return float(q * self.E_period[i] + self.C[self.O2[i] + r] + self.P[self.O[i] + r] * (t - k * self.dt))

    def _background_cum(self, idx: np.ndarray, t: float) -> np.ndarray:
        k = math.floor(t / self.dt)
        L = self.L[idx]
        q, r = np.divmod(k, L)
        return q * self.E_period[idx] + self.C[self.O2[idx] + r] + self.P[self.O[idx] + r] * (t - k * self.dt)

    def _refresh_alive(self) -> None:
        """Cache per-device constants restricted to the live devices."""
        idx = self.alive_idx = self.ids[self.alive]
        self._live = {
            "ids": self.ids[idx], "O": self.O[idx], "L": self.L[idx], "O2": self.O2[idx],
            "E": self.E_period[idx], "dist": self.dist[idx], "idle": self.idle_w[idx],
            "span": (self.max_w - self.idle_w)[idx], "max": self.max_w[idx], "mains": self.mains[idx],
            "inv_bw": 8.0 / self.bw[idx], "inv_mips": 1.0 / self.mips[idx],
        }

    def view(self, task: Task) -> FleetView:
        """Candidate features of every live device for placing ``task`` now."""
        idx = self.alive_idx
        c = self._live
        now = self.now
        k = math.floor(now / self.dt)
        q, r = np.divmod(k, c["L"])
        pos = c["O"] + r
        cpu = np.minimum(1.0, self.S[pos] + self.run_var[idx])
        run_var = self.run_var[idx]
        backlog = np.maximum(0.0, self.busy_until[idx] - now) + self.queued_nominal[idx]
        cum = q * c["E"] + self.C[c["O2"] + r] + self.P[pos] * (now - k * self.dt)
        drawn = cum - self.B_last[idx] + c["span"] * run_var * (now - self.t_last[idx])
        remaining = np.where(c["mains"], np.inf, np.maximum(0.0, self.R_last[idx] - drawn))
        return FleetView(
            device_id=c["ids"],
            cpu_util=cpu,
            mobility_m=c["dist"],
            netcomm_s=task.data_size_b * c["inv_bw"],
            resptime_s=backlog,
            energy_usage_j=(c["idle"] + c["span"] * cpu) * task.length_mi * c["inv_mips"],
            remaining_j=remaining,
            mains=c["mains"],
            power_idle_w=c["idle"],
            power_max_w=c["max"],
            time_s=now,
        )

    # events ------------------------------------------------------------------

    def _push(self, t: float, kind: EventKind, payload=None) -> None:
        if t < self.now:
            raise SimError(f"event {kind.name} scheduled in the past ({t} < {self.now})")
        heapq.heappush(self._heap, Event(t, self._seq, kind, payload))
        self._seq += 1

    def _settle_battery(self, i: int, joules: float) -> bool:
        """Book ``joules`` drawn on device i up to now; returns True if it is now empty."""
        dev = self.devices[i]
        _, depleted = drain_battery(dev, joules)
        self.t_last[i] = self.now
        self.B_last[i] = self._background_cum_one(i, self.now)
        self.R_last[i] = dev.remaining_j
        return depleted

    def _schedule_depletion(self, i: int) -> None:
        self.dep_version[i] += 1
        if self.mains[i] or not self.alive[i]:
            return
        run = self.running[i]
        if run is not None:
            t = depletion_time(self.power_models[i], self.traces[i], self.now, self.R_last[i],
                               run.util_increase, run.end_s)
        else:
            t = depletion_time(self.power_models[i], self.traces[i], self.now, self.R_last[i])
        if math.isfinite(t):
            self._push(max(t, self.now), EventKind.DEVICE_DEPLETED, (i, self.dep_version[i]))

    def _fail(self, att: _Attempt, device: int, start: float, energy: float) -> None:
        self.records.append(TaskRecord(att.app.app_id, att.task.task_id, device, att.app.submit_time_s,
                                       start, self.now, att.app.agreed_response_s, energy, False, att.retries))

    def _dispatch(self, att: _Attempt) -> None:
        if len(self.alive_idx) == 0:
            self._fail(att, -1, self.now, 0.0)
            self.resolved += 1
            return
        view = self.view(att.task)
        if self.policy is Policy.BASELINE_POWER_MIN:
            dec = baseline_power_min(view, att.app)
        else:
            dec = allocate(view, att.app, self.models, self.params)
        self.decisions.append(dec)
        if self.keep_snapshots:
            self.snapshots.append(DecisionSnapshot(view, att.app, self.models.version, self.params, dec))
        if dec.chosen_device_id is None:
            self._fail(att, -1, self.now, 0.0)
            self.resolved += 1
            return
        i = dec.chosen_device_id
        j = int(np.flatnonzero(view.device_id == i)[0])
        dev = self.devices[i]
        att.alloc_s = self.now
        att.device = i
        att.cpu = float(view.cpu_util[j])
        att.mobility = float(view.mobility_m[j])
        att.netcomm = float(view.netcomm_s[j])
        att.energy_usage = float(view.energy_usage_j[j])
        att.nominal_s = task_service_time(att.task, dev)
        expected = dec.predicted_exec_s if math.isfinite(dec.predicted_exec_s) else \
            float(view.resptime_s[j]) + att.nominal_s
        att.pa = int(power_available_array(view.remaining_j[j:j + 1], view.mains[j:j + 1],
                                           np.array([expected]), view.power_max_w[j:j + 1],
                                           self.params.safety_margin)[0])
        self.queues[i].append(att)
        self.queued_nominal[i] += att.nominal_s
        if self.running[i] is None and not self.start_pending[i]:
            self.start_pending[i] = True
            self._push(self.now, EventKind.TASK_START, i)

    def _on_arrival(self, app: ApplicationRequest) -> None:
        for task in app.tasks:
            self._dispatch(_Attempt(app, task, 0))

    def _on_start(self, i: int) -> None:
        self.start_pending[i] = False
        if not self.alive[i] or self.running[i] is not None or not self.queues[i]:
            return
        att = self.queues[i].popleft()
        self.queued_nominal[i] = sum(a.nominal_s for a in self.queues[i])
        idle = energy_over(self.power_models[i], self.traces[i], self.t_last[i], self.now)
        if self._settle_battery(i, idle):
            self.queues[i].appendleft(att)
            self._deplete(i)
            return
        availability, var = draw_fluctuation(self.exec_rng, self.cfg)
        att.util_increase = var
        att.start_s = self.now
        att.end_s = self.now + task_service_time(att.task, self.devices[i], availability)
        self.running[i] = att
        self.run_var[i] = var
        self.run_start[i] = self.now
        self.busy_until[i] = att.end_s
        self._push(att.end_s, EventKind.TASK_COMPLETE, (i, att))
        self._schedule_depletion(i)

    def _on_complete(self, i: int, att: _Attempt) -> None:
        if self.running[i] is not att:
            return
        energy = energy_over(self.power_models[i], self.traces[i], att.start_s, att.end_s, att.util_increase)
        depleted = self._settle_battery(i, energy)
        self.running[i] = None
        self.run_var[i] = 0.0
        self.busy[i].append((att.start_s, att.end_s, att.util_increase))
        self.task_j[i] += energy
        self.records.append(TaskRecord(att.app.app_id, att.task.task_id, i, att.app.submit_time_s,
                                       att.start_s, att.end_s, att.app.agreed_response_s, energy, True,
                                       att.retries))
        rec = TelemetryRecord(
            device_id=i, cpu_utilization=att.cpu, mobility_m=att.mobility, net_comm_s=att.netcomm,
            response_time_s=att.start_s - att.alloc_s, power_available=att.pa,
            energy_usage_j=att.energy_usage, exec_time_s=att.end_s - att.alloc_s,
            energy_consumed_j=energy, time_s=att.end_s)
        self.telemetry.append(rec)
        self.window.add(rec)
        self.resolved += 1
        self.completions += 1
        if self.completions % self.cfg.retrain_every == 0:
            self._push(self.now, EventKind.RETRAIN_MODELS)
        if depleted:
            self._deplete(i)
            return
        if self.queues[i] and not self.start_pending[i]:
            self.start_pending[i] = True
            self._push(self.now, EventKind.TASK_START, i)
        self._schedule_depletion(i)

    def _on_depleted(self, i: int, version: int) -> None:
        if version != self.dep_version[i] or not self.alive[i]:
            return
        run = self.running[i]
        load = run.util_increase if run is not None else 0.0
        drawn = energy_over(self.power_models[i], self.traces[i], self.t_last[i], self.now, load)
        self._settle_battery(i, drawn)
        self._deplete(i)

    def _deplete(self, i: int) -> None:
        """Take device i out of service and re-place whatever it was holding."""
        dev = self.devices[i]
        dev.battery_pct = 0.0
        self.R_last[i] = 0.0
        self.alive[i] = False
        self._refresh_alive()
        self.death_s[i] = self.now
        self.dep_version[i] += 1
        orphans = list(self.queues[i])
        self.queues[i].clear()
        self.queued_nominal[i] = 0.0
        run = self.running[i]
        self.running[i] = None
        self.run_var[i] = 0.0
        self.busy_until[i] = self.now
        if run is not None:
            partial = energy_over(self.power_models[i], self.traces[i], run.start_s, self.now, run.util_increase)
            self.busy[i].append((run.start_s, self.now, run.util_increase))
            self.task_j[i] += partial
            self._fail(run, i, run.start_s, partial)
            if run.retries == 0:
                orphans.insert(0, _Attempt(run.app, run.task, 1))
            else:
                self.resolved += 1
        for att in orphans:
            self._dispatch(_Attempt(att.app, att.task, att.retries))

    def _refit(self, schema: Schema, previous: RegressionModel) -> RegressionModel:
        try:
            return fit(self.window, schema, drop_constant=True)
        except (RankDeficient, InsufficientData):
            return previous

    def _on_retrain(self) -> None:
        self.base_model = self._refit(Schema.EXEC_TIME_BASE, self.base_model)
        self.models = ModelSet(self._refit(Schema.EXEC_TIME_FULL, self.models.exec_time),
                               self._refit(Schema.ENERGY_FULL, self.models.energy),
                               self.models.version + 1)
        self.model_history.append(self.models)

    # driver -------------------------------------------------------------------

    def run(self) -> RunResult:
        total = sum(len(a.tasks) for a in self.scenario.apps)
        for app in self.scenario.apps:
            self._push(app.submit_time_s, EventKind.APP_ARRIVAL, app)
        while self.resolved < total:
            if not self._heap:
                break
            ev = heapq.heappop(self._heap)
            self.events_processed += 1
            if self.events_processed > self.cfg.max_events:
                raise DiagnosticAbort(f"event cap {self.cfg.max_events} exceeded at t={self.now:.3f}s "
                                      f"({self.resolved}/{total} tasks resolved)")
            self.now = ev.time_s
            if ev.kind is EventKind.APP_ARRIVAL:
                self._on_arrival(ev.payload)
            elif ev.kind is EventKind.TASK_START:
                self._on_start(ev.payload)
            elif ev.kind is EventKind.TASK_COMPLETE:
                self._on_complete(*ev.payload)
            elif ev.kind is EventKind.DEVICE_DEPLETED:
                self._on_depleted(*ev.payload)
            else:
                self._on_retrain()
        return self._result()

    def _device_energy(self) -> list[DeviceEnergy]:
        out = []
        for i in range(len(self.devices)):
            until = self.death_s[i] if math.isfinite(self.death_s[i]) else self.now
            idle = 0.0
            t = 0.0
            for a, b, _ in sorted(self.busy[i]):
                if a > t:
                    idle += energy_over(self.power_models[i], self.traces[i], t, a)
                t = max(t, b)
            if until > t:
                idle += energy_over(self.power_models[i], self.traces[i], t, until)
            out.append(DeviceEnergy(i, list(self.busy[i]), self.task_j[i], idle, until))
        return out

    def _result(self) -> RunResult:
        report = aggregate(self.records, SlaTerms(self.cfg.sla_alpha, self.cfg.sla_beta), self.prices)
        return RunResult(self.policy, self.seed, self.cfg, report, self.records, self.telemetry,
                         self.decisions, self.model_history, self._device_energy(), self.scenario,
                         self.now, self.events_processed, self.snapshots)


def run(cfg: ScenarioConfig, policy: Policy | str, seed: int, keep_snapshots: bool = False) -> RunResult:
    return Simulator(cfg, policy, seed, keep_snapshots).run()


TELEMETRY_HEADER = ["time_s", "device_id", "cpu_util", "mobility_m", "netcomm_s", "resptime_s",
                    "power_avail", "energy_j", "exec_s"]


def telemetry_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TELEMETRY_HEADER)
    for r in records:
        w.writerow([repr(r.time_s), r.device_id, repr(r.cpu_utilization), repr(r.mobility_m),
                    repr(r.net_comm_s), repr(r.response_time_s), r.power_available,
                    repr(r.energy_consumed_j), repr(r.exec_time_s)])
    return buf.getvalue()
