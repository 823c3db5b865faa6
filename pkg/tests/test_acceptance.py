"""Acceptance criteria at full scale, each under its own runtime budget.

One PASS/FAIL line per criterion is printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from ribc import verify
from ribc.experiments import ExperimentConfig, run_trial
from ribc.interaction import erdos_renyi

FULL = verify.SCALES["full"]


def _reproducible(seed: int = 0) -> bool:
    cfg = ExperimentConfig(5, 2, [1.5, 1.2, 0.9, 0.6, 0.3], erdos_renyi(5, 0.5), master_seed=seed,
                           keep_trajectory=True)
    for trial in range(5):
        a, b = run_trial(cfg, trial), run_trial(cfg, trial)
        if a.tau != b.tau or len(a.trajectory) != len(b.trajectory):
            return False
        if any(xa.tobytes() != xb.tobytes() for (_, xa), (_, xb) in zip(a.trajectory, b.trajectory)):
            return False
    return True


def _invariants():
    t0 = time.perf_counter()
    chk = verify.check_core_invariants(FULL["invariant_cases"], 0)
    repro = _reproducible()
    return verify.Check(chk.name, chk.passed and repro, {**chk.detail, "seeded_reproducible": repro},
                        time.perf_counter() - t0)


CRITERIA = [
    (1, lambda: verify.check_formulas(), 1.0),
    (2, lambda: verify.check_delta(), 1.0),
    (3, lambda: verify.check_convergence(FULL["convergence"], 0), 60.0),
    (4, lambda: verify.check_dominance(FULL["dominance"], 0), 60.0),
    (5, lambda: verify.check_merge_bound(FULL["merges"], 0), 10.0),
    (6, lambda: verify.check_scheduler(FULL["schedules"], 0), 30.0),
    (7, lambda: verify.check_subsystem(FULL["subsystem_runs"], 0), 30.0),
    (8, lambda: verify.check_corollary1(FULL["cor1"], 0), 10.0),
    (9, lambda: verify.check_corollary2(FULL["cor2_steps"], 0), 10.0),
    (10, _invariants, 10.0),
]


@pytest.mark.slow
@pytest.mark.parametrize("number, run, budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, run, budget, record_criterion):
    chk = run()
    ok = record_criterion(number, chk, budget)
    assert chk.passed, chk.detail
    assert ok, f"{chk.name} took {chk.seconds:.2f}s, budget {budget}s"


def test_parameters_match_criteria():
    assert FULL["dominance"] == 10_000 and FULL["convergence"] == 500 and FULL["merges"] == 1000
    assert FULL["schedules"] == 200 and FULL["subsystem_runs"] == 50 and FULL["cor1"] == 1000
    assert FULL["cor2_steps"] == 10_000
    assert list(verify.BOUND_SWEEP_N) == list(range(3, 101))
    assert np.allclose(verify.BOUND_SWEEP_R, (0.1, 0.5, 1.0, 1.5, 1.9))
