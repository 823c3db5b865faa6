"""Hitting times of the absorbing event for a five-agent system in the plane.

    python scripts/run_convergence.py --trials 500 --out runs/convergence
"""

import argparse
import json
from pathlib import Path

import numpy as np

from ribc.experiments import ExperimentConfig, run_trials, summarize
from ribc.interaction import erdos_renyi
from ribc.output import write_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/convergence")
    args = ap.parse_args()

    bounds = [1.5, 1.2, 0.9, 0.6, 0.3]
    cfg = ExperimentConfig(5, 2, bounds, erdos_renyi(5, args.p), trials=args.trials, master_seed=args.seed)
    records = run_trials(cfg, args.workers)
    out = Path(args.out)
    write_rows(
        [{"trial_id": r.trial_id, "tau": r.tau, "clusters": len(r.partition)} for r in records],
        out / "taus.csv", "csv",
    )
    taus = np.array([r.tau for r in records if not r.capped])
    summary = summarize(records) | {"tau_quantiles": np.quantile(taus, [0.5, 0.9, 0.99]).tolist()}
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
