"""Application-count sweep (70..560 apps at the configured device count).

Writes results/sweep_app.csv and results/summary_app.csv.

    python3 scripts/run_app_sweep.py [--config FILE] [--out DIR] [--jobs N]
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
    text = run_sweep("app", load_config(args.config), jobs=args.jobs)
    (out / "sweep_app.csv").write_text(text, encoding="utf-8")
    (out / "summary_app.csv").write_text(summarize(text).to_csv(), encoding="utf-8")
    print(f"wrote {out / 'sweep_app.csv'} and {out / 'summary_app.csv'}")


if __name__ == "__main__":
    main()
