"""Verification battery: bound formulas, invariants and Monte Carlo dominance.

Each check returns a :class:`Check`; :func:`verify_suite` runs them all at a
chosen scale.  ``"full"`` uses the acceptance sizes, ``"quick"`` a smaller
desk-check size.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import control
from .core import ConfidenceProfile, EdgeSet, SystemState, is_e1, step, update
from .experiments import (
    ExperimentConfig,
    corollary1_experiment,
    corollary2_counterexample_init,
    dominance_experiment,
    run_trials,
    separation_run,
    uniform_ball,
)
from .interaction import erdos_renyi, make_rng, verify_lowbound_exhaustive

TN_3_1 = 2 * (7 + 8 * (3 + 5 / 3 - 2 * math.log(5))) + 1  # T_n at n=3, r_n=1, written out by hand
BOUND_SWEEP_N = range(3, 101)
BOUND_SWEEP_R = (0.1, 0.5, 1.0, 1.5, 1.9)

SCALES = {
    "quick": dict(invariant_cases=50, merges=200, schedules=40, subsystem_runs=10, convergence=100,
                  dominance=2000, cor1=200, cor2_steps=2000),
    "full": dict(invariant_cases=200, merges=1000, schedules=200, subsystem_runs=50, convergence=500,
                 dominance=10_000, cor1=1000, cor2_steps=10_000),
}


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  ({self.seconds:.2f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        check = fn(*args, **kwargs)
        check.seconds = time.perf_counter() - t0
        return check

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------


def random_unit_vector(d: int, rng) -> np.ndarray:
    u = rng.normal(size=d)
    return u / np.linalg.norm(u)


def random_merge_instance(rng, max_size: int = 5, max_dim: int = 3):
    """Two connected co-located clusters with ``d0`` in ``(r_min, r_lead]``.

    Returns ``(state, profile, alpha, beta)``.
    """
    J = int(rng.integers(1, max_size + 1))
    K = int(rng.integers(1, max_size + 1))
    d = int(rng.integers(1, max_dim + 1))
    n = J + K
    while True:
        r = np.sort(rng.uniform(0.05, 1.95, n))[::-1]
        if r[0] > r[-1] * 1.01:
            break
    rest = rng.permutation(np.arange(1, n))
    alpha = tuple(sorted([0, *rest[: J - 1].tolist()]))
    beta = tuple(sorted(rest[J - 1:].tolist()))
    d0 = rng.uniform(r[-1], r[0])
    while d0 <= r[-1]:
        d0 = rng.uniform(r[-1], r[0])
    u = random_unit_vector(d, rng)
    center = 0.1 * uniform_ball(1, d, rng)[0]
    x = np.empty((n, d))
    x[list(alpha)] = center - 0.5 * d0 * u
    x[list(beta)] = center + 0.5 * d0 * u
    return SystemState(x), ConfidenceProfile(r), alpha, beta


def random_cibc_instance(rng, n_range=(3, 8), max_dim: int = 3):
    """Opinions in the unit ball, some agents sharing an opinion, bounds in (0.05, 1.99)."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    d = int(rng.integers(1, max_dim + 1))
    x = uniform_ball(n, d, rng)
    for i in range(1, n):
        if rng.random() < 0.25:
            x[i] = x[rng.integers(0, i)]
    r = np.sort(rng.uniform(0.05, 1.99, n))[::-1]
    return SystemState(x), ConfidenceProfile(r)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


@_timed
def check_formulas(tn=None, tn_star=None) -> Check:
    """Known values of both step bounds and strict dominance over the sweep grid."""
    tn = tn or control.compute_Tn
    tn_star = tn_star or control.compute_Tn_star
    t3 = tn(3, 1.0)
    value_ok = math.isclose(t3, TN_3_1, rel_tol=1e-9) and abs(t3 - 38.165) < 5e-4
    star_ok = tn_star(3, 1.0) == 15
    failures = [(n, r) for n in BOUND_SWEEP_N for r in BOUND_SWEEP_R if not tn_star(n, r) < tn(n, r)]
    return Check(
        "formulas", value_ok and star_ok and not failures,
        {"Tn(3,1)": t3, "Tn_star(3,1)": tn_star(3, 1.0), "dominance_failures": failures[:10]},
    )


@_timed
def check_delta(ps=(0.3, 0.5, 0.7), n: int = 3) -> Check:
    """Exhaustive subset enumeration reproduces the closed-form subset floor."""
    reports = {p: verify_lowbound_exhaustive(erdos_renyi(n, p)) for p in ps}
    detail = {str(p): {"min": r.min_probability, "delta": r.delta, "total": r.total_probability} for p, r in reports.items()}
    return Check("delta_exact", all(r.ok for r in reports.values()), detail)


def _rotation(d: int, rng) -> np.ndarray:
    q, rr = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(rr))


def _rel_close(a, b, rel=1e-12) -> bool:
    scale = max(1.0, float(np.abs(a).max()), float(np.abs(b).max()))
    return float(np.abs(a - b).max()) <= rel * scale


@_timed
def check_core_invariants(cases: int = 200, seed: int = 0) -> Check:
    """Convex hull, equivariance, determinism, and the exhaustive absorbing test."""
    rng = make_rng(seed, 10)
    bad = {"hull": 0, "rotation": 0, "translation": 0, "permutation": 0, "determinism": 0, "absorbing": 0}
    for _ in range(cases):
        n = int(rng.integers(3, 9))
        d = int(rng.integers(1, 4))
        state = SystemState(uniform_ball(n, d, rng))
        profile = ConfidenceProfile(np.sort(rng.uniform(0.05, 2.5, n))[::-1])
        edges = EdgeSet((rng.random((n, n)) < rng.uniform(0.2, 0.9)) & ~np.eye(n, dtype=bool))
        nxt = step(state, profile, edges)
        x, y = state.opinions, nxt.opinions

        for e in [random_unit_vector(d, rng) for _ in range(5)]:
            px, py = x @ e, y @ e
            if py.min() < px.min() - 1e-12 or py.max() > px.max() + 1e-12:
                bad["hull"] += 1
                break
        if np.linalg.norm(y, axis=1).max() > np.linalg.norm(x, axis=1).max() + 1e-12:
            bad["hull"] += 1

        Q = _rotation(d, rng)
        v = rng.normal(size=d)
        if not _rel_close(step(SystemState(x @ Q.T), profile, edges).opinions, y @ Q.T):
            bad["rotation"] += 1
        if not _rel_close(step(SystemState(x + v), profile, edges).opinions, y + v):
            bad["translation"] += 1

        # relabelled bounds are no longer sorted, so go through the array kernel
        perm = rng.permutation(n)
        moved = update(x[perm], profile.bounds[perm], edges.adj[np.ix_(perm, perm)])
        if not _rel_close(moved, y[perm]):
            bad["permutation"] += 1

        if not np.array_equal(step(state, profile, edges).opinions, y):
            bad["determinism"] += 1

    # absorbing: every edge set on every n=3 instance that is already absorbed
    absorbed_cases = 0
    for _ in range(max(cases // 10, 5)):
        d = int(rng.integers(1, 4))
        pts = uniform_ball(3, d, rng)
        pts[1] = pts[0] if rng.random() < 0.5 else pts[1]
        profile = ConfidenceProfile(np.sort(rng.uniform(0.01, 0.5, 3))[::-1])
        state = SystemState(pts)
        if not is_e1(state, profile):
            continue
        absorbed_cases += 1
        for bits in itertools.product([False, True], repeat=6):
            e = EdgeSet.from_indices(3, [k for k, b in enumerate(bits) if b])
            if not np.array_equal(step(state, profile, e).opinions, state.opinions):
                bad["absorbing"] += 1
    return Check("core_invariants", not any(bad.values()) and absorbed_cases > 0,
                 {**bad, "absorbed_cases": absorbed_cases})


@_timed
def check_merge_bound(instances: int = 1000, seed: int = 0) -> Check:
    """Two-cluster merges: step bound, strict per-phase decrements, halving closed form."""
    rng = make_rng(seed, 20)
    over, weak, worst_halving, errors = 0, 0, 0.0, []
    for _ in range(instances):
        state, profile, alpha, beta = random_merge_instance(rng)
        try:
            res = control.merge_clusters(state, profile, alpha, beta)
        except control.ScheduleError as exc:
            errors.append(str(exc))
            continue
        task = res.task
        if res.steps_used > task.predicted_bound or control.subset_diameter(res.state, task.agents) != 0.0:
            over += 1
        weak += sum(not ph.satisfied for ph in task.phases)
        errs = task.halving_errors()
        worst_halving = max([worst_halving, *errs])
    ok = over == 0 and weak == 0 and worst_halving <= 1e-12 and not errors
    return Check("merge_bound", ok, {"over_bound": over, "weak_phases": weak,
                                     "worst_halving_rel_err": worst_halving, "errors": errors[:5]})


def _coarsens(before, after) -> bool:
    return all(any(set(c) <= set(c2) for c2 in after) for c in before)


@_timed
def check_scheduler(instances: int = 200, seed: int = 0) -> Check:
    """Greedy scheduler: terminal time bound, monotone coarsening, disjoint merge edges."""
    rng = make_rng(seed, 30)
    over, split, overlap, errors = 0, 0, 0, []
    worst = 0.0
    for _ in range(instances):
        state, profile = random_cibc_instance(rng)
        try:
            run = control.algorithm1_run(state, profile)
        except control.ScheduleError as exc:
            errors.append(str(exc))
            continue
        bound = control.compute_Tn_star(state.n, profile.r_min)
        worst = max(worst, run.terminal_time / bound)
        over += run.terminal_time > bound
        split += sum(not _coarsens(a, b) for a, b in zip(run.partitions, run.partitions[1:]))
        for per_task in run.task_edges:
            for (ag1, e1), (ag2, e2) in itertools.combinations(per_task, 2):
                if set(ag1) & set(ag2):
                    overlap += 1
            for ag, e in per_task:
                outside = [p for p in e.pairs() if p[0] not in ag or p[1] not in ag]
                overlap += bool(outside)
        if not is_e1(run.final_state, profile):
            errors.append("final state not absorbing")
    ok = over == 0 and split == 0 and overlap == 0 and not errors
    return Check("scheduler_bound", ok, {"over_bound": over, "splits": split, "overlaps": overlap,
                                         "worst_ratio": worst, "errors": errors[:5]})


@_timed
def check_subsystem(runs: int = 50, seed: int = 0) -> Check:
    """Every generated cluster, re-run alone, finishes exactly at its generation time."""
    rng = make_rng(seed, 40)
    mismatches, checked, errors = [], 0, []
    for _ in range(runs):
        state, profile = random_cibc_instance(rng)
        try:
            run = control.algorithm1_run(state, profile)
            for agents, t in run.generated:
                checked += 1
                sub_t = control.subsystem_terminal_time(state, profile, agents)
                if sub_t != t:
                    mismatches.append((agents, t, sub_t))
        except control.ScheduleError as exc:
            errors.append(str(exc))
    return Check("subsystem_consistency", not mismatches and not errors and checked > 0,
                 {"clusters_checked": checked, "mismatches": mismatches[:5], "errors": errors[:5]})


@_timed
def check_convergence(trials: int = 500, seed: int = 0) -> Check:
    """Every random-interaction trial absorbs, with the equal-or-far dichotomy at the end."""
    cfg = ExperimentConfig(5, 2, [1.5, 1.2, 0.9, 0.6, 0.3], erdos_renyi(5, 0.5),
                           trials=trials, master_seed=seed, max_steps=100_000)
    records = run_trials(cfg)  # raises AbsorptionError if an absorbed state moves
    capped = sum(r.capped for r in records)
    r = cfg.profile.bounds
    broken = 0
    for rec in records:
        x = rec.final_state.opinions
        for i, j in itertools.combinations(range(cfg.n), 2):
            dist = float(np.linalg.norm(x[i] - x[j]))
            if not (dist <= cfg.eps_eq or dist > max(r[i], r[j])):
                broken += 1
    taus = [rec.tau for rec in records if not rec.capped]
    return Check("convergence", capped == 0 and broken == 0,
                 {"trials": trials, "capped": capped, "dichotomy_violations": broken,
                  "tau_max": max(taus) if taus else None})


@_timed
def check_dominance(trials: int = 10_000, seed: int = 0) -> Check:
    """Empirical hitting-time tail and MSE stay under their envelopes (3 sigma)."""
    cfg = ExperimentConfig(3, 1, [0.7, 0.7, 0.7], erdos_renyi(3, 0.5), trials=trials, master_seed=seed)
    rep = dominance_experiment(cfg)
    return Check("tail_mse_dominance", rep.ok,
                 {"survival_ok": rep.survival.dominated(), "mse_ok": rep.mse.dominated(),
                  "delta": rep.delta, "tau_max": int(rep.survival.t[-1]) - 1})


@_timed
def check_corollary1(trials: int = 1000, seed: int = 0) -> Check:
    """A lead bound of at least 2 forces consensus."""
    cfg = ExperimentConfig(3, 1, [2.0, 0.4, 0.3], erdos_renyi(3, 0.5), trials=trials, master_seed=seed)
    rep = corollary1_experiment(cfg)
    return Check("corollary1_consensus", rep.ok,
                 {"trials": rep.trials, "consensus": rep.consensus, "tau_max": rep.tau_max})


@_timed
def check_corollary2(steps: int = 10_000, seed: int = 0, n: int = 5) -> Check:
    """The separated start keeps agent 0 out of range and fixed forever."""
    results = {}
    for r1 in (0.5, 1.0, 1.5):
        for d in (1, 2, 3):
            rng = make_rng(seed, 1000 + int(10 * r1) * 10 + d)
            state = corollary2_counterexample_init(n, d, r1, rng)
            profile = ConfidenceProfile(np.linspace(r1, 0.5 * r1, n))
            rep = separation_run(state, profile, erdos_renyi(n, 0.5), rng, steps)
            results[f"r1={r1},d={d}"] = {"min_gap": rep.min_gap, "constant": rep.lead_constant}
    ok = all(v["min_gap"] > 0 and v["constant"] for v in results.values())
    return Check("corollary2_separation", ok, results)


def verify_suite(scale: str = "quick", seed: int = 0) -> list[Check]:
    p = SCALES[scale]
    return [
        check_formulas(),
        check_delta(),
        check_core_invariants(p["invariant_cases"], seed),
        check_merge_bound(p["merges"], seed),
        check_scheduler(p["schedules"], seed),
        check_subsystem(p["subsystem_runs"], seed),
        check_convergence(p["convergence"], seed),
        check_dominance(p["dominance"], seed),
        check_corollary1(p["cor1"], seed),
        check_corollary2(p["cor2_steps"], seed),
    ]
