"""Delay, processing time, processing cost and SLA penalty, plus run aggregation."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

MSG_PRICE_RANGE = (1.0, 1.65)
CONN_PRICE_RANGE = (0.08, 0.132)


class NegativeDelay(ValueError):
    pass


class NegativeDuration(ValueError):
    pass


@dataclass(frozen=True)
class SlaTerms:
    alpha: float = 1.0
    beta: float = 0.5
    agreed_response_s: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or not self.agreed_response_s > 0:
            raise ValueError("need alpha >= 0, beta >= 0 and agreed_response_s > 0")


@dataclass(frozen=True)
class Prices:
    """Dollars per million messages and per million connection-minutes."""

    per_million_msgs: float = 1.65
    per_million_conn_min: float = 0.132
    messages_per_task: int = 2

    def check(self) -> None:
        lo, hi = MSG_PRICE_RANGE
        if not lo <= self.per_million_msgs <= hi:
            log.warning("message price %s outside quoted range %s", self.per_million_msgs, MSG_PRICE_RANGE)
        lo, hi = CONN_PRICE_RANGE
        if not lo <= self.per_million_conn_min <= hi:
            log.warning("connectivity price %s outside quoted range %s",
                        self.per_million_conn_min, CONN_PRICE_RANGE)


@dataclass(frozen=True)
class TaskRecord:
    """One execution attempt of a task.

    Failed attempts carry the energy they burned but no timing metrics.
    """

    app_id: int
    task_id: int
    device_id: int
    submit_s: float
    start_s: float
    end_s: float
    agreed_response_s: float
    energy_j: float = 0.0
    completed: bool = True
    attempt: int = 0


@dataclass(frozen=True)
class RunReport:
    avg_delay_s: float = 0.0
    avg_processing_s: float = 0.0
    total_processing_s: float = 0.0
    total_processing_cost: float = 0.0
    sla_violation_count: int = 0
    sla_violation_pct: float = 0.0
    total_penalty: float = 0.0
    total_energy_j: float = 0.0
    tasks_completed: int = 0
    tasks_failed: int = 0


def delay(exec_start_s: float, user_submit_s: float) -> float:
    if exec_start_s < user_submit_s:
        raise NegativeDelay(f"execution started at {exec_start_s} before submission at {user_submit_s}")
    return exec_start_s - user_submit_s


def processing_time(p_start_s: float, p_end_s: float) -> float:
    if p_end_s < p_start_s:
        raise NegativeDuration(f"processing ended at {p_end_s} before it started at {p_start_s}")
    return p_end_s - p_start_s


def processing_cost(message_count: float, connection_minutes: float, price_per_million_msgs: float,
                    price_per_million_conn_min: float) -> float:
    if min(message_count, connection_minutes, price_per_million_msgs, price_per_million_conn_min) < 0:
        raise ValueError("cost inputs must be non-negative")
    return (message_count / 1e6 * price_per_million_msgs
            + connection_minutes / 1e6 * price_per_million_conn_min)


def sla_penalty(terms: SlaTerms, response_s: float) -> tuple[bool, float]:
    """Linear penalty alpha + beta * DT once the response exceeds the agreed time."""
    if response_s < 0:
        raise ValueError("response time must be non-negative")
    dt = max(0.0, response_s - terms.agreed_response_s)
    if dt > 0:
        return True, terms.alpha + terms.beta * dt
    return False, 0.0


def aggregate(task_records: Iterable[TaskRecord], sla_terms: SlaTerms = SlaTerms(),
              prices: Prices = Prices()) -> RunReport:
    """Fold attempt records into a report.

    Means and the violation percentage are over completed tasks. Each record's
    own agreed response time overrides the one in ``sla_terms``. A task counts
    as failed once, on its final failed attempt.
    """
    recs = list(task_records)
    done = [r for r in recs if r.completed]
    finished_ok = {(r.app_id, r.task_id) for r in done}
    failed = {(r.app_id, r.task_id) for r in recs if not r.completed} - finished_ok

    delays, procs, costs, penalties = [], [], [], []
    violations = 0
    for r in done:
        delays.append(delay(r.start_s, r.submit_s))
        pt = processing_time(r.start_s, r.end_s)
        procs.append(pt)
        costs.append(processing_cost(prices.messages_per_task, pt / 60.0,
                                     prices.per_million_msgs, prices.per_million_conn_min))
        terms = SlaTerms(sla_terms.alpha, sla_terms.beta, r.agreed_response_s)
        hit, pen = sla_penalty(terms, r.end_s - r.submit_s)
        violations += hit
        penalties.append(pen)

    n = len(done)
    return RunReport(
        avg_delay_s=math.fsum(delays) / n if n else 0.0,
        avg_processing_s=math.fsum(procs) / n if n else 0.0,
        total_processing_s=math.fsum(procs),
        total_processing_cost=math.fsum(costs),
        sla_violation_count=violations,
        sla_violation_pct=100.0 * violations / n if n else 0.0,
        total_penalty=math.fsum(penalties),
        total_energy_j=math.fsum(r.energy_j for r in recs),
        tasks_completed=n,
        tasks_failed=len(failed),
    )


REPORT_CSV_HEADER = ["policy", "seed", "n_devices", "n_apps", "avg_delay_s", "avg_proc_s", "total_cost",
                     "sla_viol_pct", "total_penalty", "total_energy_j", "completed", "failed"]

METRIC_COLUMNS = ["avg_delay_s", "avg_proc_s", "total_cost", "sla_viol_pct", "total_penalty", "total_energy_j"]


def report_row(policy: str, seed: int, n_devices: int, n_apps: int, rep: RunReport) -> list[str]:
    return [policy, str(seed), str(n_devices), str(n_apps),
            repr(rep.avg_delay_s), repr(rep.avg_processing_s), repr(rep.total_processing_cost),
            repr(rep.sla_violation_pct), repr(rep.total_penalty), repr(rep.total_energy_j),
            str(rep.tasks_completed), str(rep.tasks_failed)]


def reports_to_csv(rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


def report_fields() -> list[str]:
    return [f.name for f in fields(RunReport)]
