"""Empirical tail of the hitting time and the MSE curve against their envelopes.

    python scripts/run_dominance.py --trials 10000 --out runs/dominance
"""

import argparse
import json
from pathlib import Path

from ribc.control import floor_Tn
from ribc.experiments import ExperimentConfig, dominance_experiment
from ribc.interaction import erdos_renyi
from ribc.output import write_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--bound", type=float, default=0.7, help="common confidence bound of the three agents")
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/dominance")
    args = ap.parse_args()

    cfg = ExperimentConfig(3, 1, [args.bound] * 3, erdos_renyi(3, args.p), trials=args.trials,
                           master_seed=args.seed)
    rep = dominance_experiment(cfg, args.workers)
    out = Path(args.out)
    write_rows(rep.survival.rows(), out / "survival.csv", "csv")
    write_rows(rep.mse.rows(), out / "mse.csv", "csv")
    print(json.dumps({
        "trials": rep.trials,
        "delta": rep.delta,
        "floor_T_n": floor_Tn(3, args.bound),
        "survival_dominated": rep.survival.dominated(),
        "mse_dominated": rep.mse.dominated(),
        "min_survival_slack": float((rep.survival.bound - rep.survival.value).min()),
    }, indent=2))


if __name__ == "__main__":
    main()
