"""Greedy-scheduler terminal times on random instances, next to the step bounds.

Prints one row per agent count: the worst observed terminal time, the
smallest bound T_n* seen for that n, and the table of T_n* and T_n over r_n.

    python scripts/run_cibc_bounds.py --instances 200
"""

import argparse
from collections import defaultdict

import numpy as np

from ribc.control import algorithm1_run, compute_Tn, compute_Tn_star
from ribc.interaction import make_rng
from ribc.verify import random_cibc_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = make_rng(args.seed, 0)
    ratios = defaultdict(list)
    worst = defaultdict(int)
    for _ in range(args.instances):
        state, profile = random_cibc_instance(rng)
        run = algorithm1_run(state, profile)
        bound = compute_Tn_star(state.n, profile.r_min)
        ratios[state.n].append(run.terminal_time / bound)
        worst[state.n] = max(worst[state.n], run.terminal_time)

    print(f"{'n':>3} {'runs':>5} {'max T':>6} {'max T/T*':>9} {'mean T/T*':>10}")
    for n in sorted(ratios):
        r = np.array(ratios[n])
        print(f"{n:>3} {r.size:>5} {worst[n]:>6} {r.max():>9.3f} {r.mean():>10.3f}")

    print()
    print(f"{'n':>3} {'r_n':>5} {'T_n*':>8} {'T_n':>12}")
    for n in (3, 5, 10, 50, 100):
        for r_n in (0.1, 0.5, 1.0, 1.9):
            print(f"{n:>3} {r_n:>5} {compute_Tn_star(n, r_n):>8} {compute_Tn(n, r_n):>12.3f}")


if __name__ == "__main__":
    main()
