"""Print a side-by-side policy comparison for one scenario and seed.

    python3 scripts/compare_policies.py [--config FILE] [--seed N]
"""

import argparse

from fogsim.config import load_config
from fogsim.domain import Policy
from fogsim.sim import run


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=None)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    cfg = load_config(args.config)
    print(f"{'policy':<18}{'delay s':>10}{'proc s':>10}{'SLA %':>9}{'energy J':>12}{'failed':>8}")
    for p in Policy:
        r = run(cfg, p, args.seed).report
        print(f"{p.value:<18}{r.avg_delay_s:>10.3f}{r.avg_processing_s:>10.3f}{r.sla_violation_pct:>9.2f}"
              f"{r.total_energy_j:>12.1f}{r.tasks_failed:>8d}")


if __name__ == "__main__":
    main()
