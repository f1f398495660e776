"""Device-count sweep (10..50 devices at the configured application count).

Writes results/sweep_device.csv and results/summary_device.csv.

    python3 scripts/run_device_sweep.py [--config FILE] [--out DIR] [--jobs N]
"""

import argparse
from pathlib import Path

from fogsim.cli import run_sweep, summarize
from fogsim.config import load_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None)
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = run_sweep("device", load_config(args.config), jobs=args.jobs)
    (out / "sweep_device.csv").write_text(text, encoding="utf-8")
    (out / "summary_device.csv").write_text(summarize(text).to_csv(), encoding="utf-8")
    print(f"wrote {out / 'sweep_device.csv'} and {out / 'summary_device.csv'}")


if __name__ == "__main__":
    main()
