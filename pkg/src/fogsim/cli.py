"""Command-line harness: single runs, the two experiment sweeps and summaries.

Exit codes: 0 success, 1 configuration or input-format error, 2 run error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .alloc import decisions_to_csv
from .config import ConfigError, ScenarioConfig, load_config
from .domain import Policy
from .metrics import METRIC_COLUMNS, REPORT_CSV_HEADER, report_row, reports_to_csv
from .regression import SchemaMismatch, models_to_csv
from .sim import SimError, run, telemetry_to_csv

log = logging.getLogger("fogsim")

APP_SWEEP_POINTS = tuple(range(70, 561, 70))
DEVICE_SWEEP_POINTS = tuple(range(10, 51, 10))
PRESETS = {"app": "AppSweep", "device": "DeviceSweep"}


class SweepError(SimError):
    """A run inside a sweep failed; the message names the combination."""


def sweep_configs(preset: str, base: ScenarioConfig) -> list[ScenarioConfig]:
    """One config per sweep point; other settings come from ``base``."""
    key = preset.lower().removesuffix("sweep")
    if key == "app":
        return [base.replace(n_apps=n) for n in APP_SWEEP_POINTS]
    if key == "device":
        return [base.replace(n_devices=n) for n in DEVICE_SWEEP_POINTS]
    raise ConfigError(f"unknown preset {preset!r}; expected app or device")


def _one(job: tuple[ScenarioConfig, str, int]) -> list[str]:
    cfg, policy, seed = job
    try:
        rep = run(cfg, policy, seed).report
    except Exception as exc:
        raise SweepError(f"run failed for policy={policy} seed={seed} n_devices={cfg.n_devices} "
                         f"n_apps={cfg.n_apps}: {exc}") from exc
    return report_row(policy, seed, cfg.n_devices, cfg.n_apps, rep)


def _sort_key(row: Sequence[str]):
    return int(row[2]), int(row[3]), row[0], int(row[1])


def run_sweep(preset: str, base: ScenarioConfig, jobs: int = 1) -> str:
    """Run every (point, policy, seed) combination and return the report CSV text."""
    work = [(cfg, p.value, s) for cfg in sweep_configs(preset, base) for p in base.policies for s in base.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one, work))
    else:
        rows = [_one(w) for w in work]
    return reports_to_csv(sorted(rows, key=_sort_key))


@dataclass(frozen=True)
class Summary:
    header: list[str]
    rows: list[list]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow(["" if isinstance(v, float) and math.isnan(v) else
                        repr(v) if isinstance(v, float) else v for v in r])
        return buf.getvalue()


def improvement_pct(baseline: float, value: float) -> float:
    """Relative reduction versus the baseline, in percent; NaN for a zero baseline."""
    if baseline == 0:
        return math.nan
    return (baseline - value) / baseline * 100.0


def summarize(report_csv: str) -> Summary:
    """Per sweep point and policy, mean of each metric over seeds.

    When the baseline and at least one regression policy are present, an
    ``<metric>_impr_pct`` column gives each policy's improvement over the
    baseline (blank on the baseline's own rows).
    """
    reader = csv.reader(io.StringIO(report_csv))
    header = next(reader, None)
    if header != REPORT_CSV_HEADER:
        raise SchemaMismatch(f"expected header {REPORT_CSV_HEADER}, got {header}")
    groups: dict[tuple[int, int, str], list[list[float]]] = {}
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(REPORT_CSV_HEADER):
            raise SchemaMismatch(f"line {line_no}: expected {len(REPORT_CSV_HEADER)} fields, got {len(row)}")
        rec = dict(zip(REPORT_CSV_HEADER, row))
        key = (int(rec["n_devices"]), int(rec["n_apps"]), rec["policy"])
        groups.setdefault(key, []).append([float(rec[m]) for m in METRIC_COLUMNS])

    means = {k: [math.fsum(col) / len(v) for col in zip(*v)] for k, v in groups.items()}
    policies = {k[2] for k in means}
    base_name = Policy.BASELINE_POWER_MIN.value
    compare = base_name in policies and len(policies) > 1
    out_header = ["n_devices", "n_apps", "policy", "n_seeds"] + METRIC_COLUMNS
    if compare:
        out_header += [f"{m}_impr_pct" for m in METRIC_COLUMNS]
    rows = []
    for key in sorted(means):
        row = [key[0], key[1], key[2], len(groups[key])] + means[key]
        if compare:
            base = means.get((key[0], key[1], base_name))
            if key[2] == base_name or base is None:
                row += [math.nan] * len(METRIC_COLUMNS)
            else:
                row += [improvement_pct(b, v) for b, v in zip(base, means[key])]
        rows.append(row)
    return Summary(out_header, rows)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    try:
        policies = [Policy.parse(args.policy)] if args.policy else list(cfg.policies)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seeds = [args.seed] if args.seed is not None else list(cfg.seeds)
    out = Path(args.out)
    rows = []
    for p in policies:
        for s in seeds:
            res = run(cfg, p, s)
            rows.append(report_row(p.value, s, cfg.n_devices, cfg.n_apps, res.report))
            tag = f"{p.value}_{s}"
            _write(out / f"decisions_{tag}.csv", decisions_to_csv(res.decisions))
            _write(out / f"telemetry_{tag}.csv", telemetry_to_csv(res.telemetry))
            final = res.models[-1]
            _write(out / f"models_{tag}.csv", models_to_csv([final.exec_time, final.energy]))
            log.info("%s seed %d: sla %.2f%% energy %.1f J", p.value, s,
                     res.report.sla_violation_pct, res.report.total_energy_j)
    _write(out / "report.csv", reports_to_csv(rows))
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    text = run_sweep(args.preset, cfg, jobs=args.jobs)
    _write(Path(args.out) / f"sweep_{args.preset}.csv", text)
    return 0


def _cmd_summarize(args) -> int:
    try:
        text = Path(args.input).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {args.input}: {exc}") from None
    summary = summarize(text)
    if args.out:
        _write(Path(args.out), summary.to_csv())
    else:
        sys.stdout.write(summary.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fogsim", description="Regression-driven Fog allocation simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario for the given policies and seeds")
    r.add_argument("--config", default=None)
    r.add_argument("--policy", default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=".")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="run an experiment sweep")
    s.add_argument("--preset", choices=sorted(PRESETS), required=True)
    s.add_argument("--config", default=None)
    s.add_argument("--out", default=".")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=_cmd_sweep)

    m = sub.add_parser("summarize", help="average a sweep CSV over seeds and compare to the baseline")
    m.add_argument("--in", dest="input", required=True)
    m.add_argument("--out", default=None)
    m.set_defaults(func=_cmd_summarize)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SchemaMismatch) as exc:
        print(f"fogsim: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any failure inside a run maps to exit 2
        print(f"fogsim: run failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
