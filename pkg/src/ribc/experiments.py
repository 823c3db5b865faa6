"""Monte Carlo harness for the random-interaction system."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .control import floor_Tn, mse_envelope, tau_tail_bound
from .core import ClusterPartition, ConfidenceProfile, SystemState, absorbed, detect_clusters, update
from .interaction import EdgeSampler, InteractionModel, delta_lower_bound, make_rng


class AbsorptionError(AssertionError):
    """A state flagged as absorbing moved during the post-hitting check."""


# ---------------------------------------------------------------------------
# initial states
# ---------------------------------------------------------------------------


def uniform_ball(n: int, d: int, rng: np.random.Generator, center=None, radius: float = 1.0) -> np.ndarray:
    """``n`` i.i.d. points uniform in the closed ball of the given radius."""
    g = rng.normal(size=(n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pts = g * (radius * rng.random(n) ** (1.0 / d))[:, None]
    if center is not None:
        pts += np.asarray(center, dtype=float)
    return pts


def corollary2_counterexample_init(n: int, d: int, r1: float, rng: np.random.Generator) -> SystemState:
    """Agent 0 near ``z`` and everyone else near ``-z``, too far apart for agent 0 to ever see them.

    ``|z| = (4 + r1)/6`` and both balls have radius ``(2 - r1)/6``, which keeps
    every opinion in the unit ball and every cross distance at least
    ``(2 + 2*r1)/3 > r1``.
    """
    if not 0.0 < r1 < 2.0:
        raise ValueError(f"largest bound must lie in (0, 2), got {r1}")
    u = rng.normal(size=d)
    z = u / np.linalg.norm(u) * (4.0 + r1) / 6.0
    a = (2.0 - r1) / 6.0
    x = np.empty((n, d))
    x[:1] = uniform_ball(1, d, rng, z, a)
    x[1:] = uniform_ball(n - 1, d, rng, -z, a)
    return SystemState(x)


def sphere_volume(d: int, a: float) -> float:
    """Volume of a ``d``-dimensional ball of radius ``a``."""
    if d < 1 or a <= 0:
        raise ValueError("need d >= 1 and a > 0")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * a**d


# ---------------------------------------------------------------------------
# configuration and trial records
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    n: int
    d: int
    bounds: list
    model: InteractionModel
    init: str = "uniform_ball"  # "explicit" | "uniform_ball" | "corollary2"
    opinions: list | None = None
    eps_eq: float = 1e-9
    trials: int = 1
    max_steps: int = 100_000
    master_seed: int = 0
    decimate: int = 1
    keep_trajectory: bool = False
    absorb_steps: int = 100

    def __post_init__(self):
        self.profile = ConfidenceProfile(self.bounds)
        if self.profile.n != self.n:
            raise ValueError(f"{self.profile.n} confidence bounds given for n={self.n}")
        if self.model.n != self.n:
            raise ValueError(f"interaction model is for {self.model.n} agents, not {self.n}")
        if self.trials < 1 or self.max_steps < 1 or self.decimate < 1:
            raise ValueError("trials, max_steps and decimate must be at least 1")
        if self.init == "explicit":
            x = np.asarray(self.opinions, dtype=float).reshape(self.n, self.d)
            self.opinions = x.tolist()
        elif self.init not in ("uniform_ball", "corollary2"):
            raise ValueError(f"unknown initial-state kind {self.init!r}")

    def initial_state(self, rng: np.random.Generator) -> SystemState:
        if self.init == "explicit":
            return SystemState(self.opinions)
        if self.init == "uniform_ball":
            return SystemState(uniform_ball(self.n, self.d, rng))
        return corollary2_counterexample_init(self.n, self.d, self.profile.r_max, rng)


@dataclass
class TrialRecord:
    trial_id: int
    master_seed: int
    tau: int | None  # None if the step cap was hit
    final_state: SystemState
    partition: ClusterPartition
    consensus: bool
    trajectory: list = field(default_factory=list)  # (t, opinions) pairs

    @property
    def capped(self) -> bool:
        return self.tau is None


def run_trial(config: ExperimentConfig, trial_id: int) -> TrialRecord:
    """Simulate until the absorbing event, then confirm it is absorbing."""
    rng = make_rng(config.master_seed, trial_id)
    x = config.initial_state(rng).opinions
    r, eps = config.profile.bounds, config.eps_eq
    sample = EdgeSampler(config.model).adjacency
    traj = []

    tau = None
    for t in range(config.max_steps + 1):
        if config.keep_trajectory and t % config.decimate == 0:
            traj.append((t, x))
        if absorbed(x, r, eps):
            tau = t
            break
        if t == config.max_steps:
            break
        x = update(x, r, sample(rng))

    if tau is not None:
        if config.keep_trajectory and traj[-1][0] != tau:
            traj.append((tau, x))
        _check_absorbed(x, r, sample, rng, eps, config.absorb_steps)

    state = SystemState(x, t)
    partition = detect_clusters(state, config.profile, eps)
    return TrialRecord(
        trial_id, config.master_seed, tau, state, partition,
        consensus=tau is not None and len(partition) == 1, trajectory=traj,
    )


def _check_absorbed(x0, r, sample, rng, eps, steps):
    """Extra random steps must leave the state in place (within ``eps``, bitwise if 0)."""
    x = x0
    for k in range(steps):
        x = update(x, r, sample(rng))
        drift = float(np.abs(x - x0).max())
        if drift > eps or (eps == 0 and not np.array_equal(x, x0)) or not absorbed(x, r, eps):
            raise AbsorptionError(f"absorbed state moved by {drift:.3g} after {k + 1} extra steps")


def run_trials(config: ExperimentConfig, workers: int = 1) -> list[TrialRecord]:
    ids = range(config.trials)
    if workers <= 1:
        return [run_trial(config, i) for i in ids]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(run_trial, [config] * config.trials, ids, chunksize=16))


# ---------------------------------------------------------------------------
# curves and dominance
# ---------------------------------------------------------------------------


@dataclass
class Curve:
    t: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray | None = None

    def dominated(self, sigmas: float = 3.0) -> bool:
        return bool(np.all(self.value <= self.bound + sigmas * self.stderr))

    def rows(self):
        bound = self.bound if self.bound is not None else [math.nan] * len(self.t)
        return [
            {"t": int(t), "value": float(v), "stderr": float(s), "bound": float(b)}
            for t, v, s, b in zip(self.t, self.value, self.stderr, bound)
        ]


def tau_survival_curve(records: list[TrialRecord], t_max: int | None = None) -> Curve:
    """Empirical ``P(tau >= t)`` for ``t = 0 .. t_max`` with binomial standard errors."""
    if not records:
        raise ValueError("no trial records")
    if any(r.capped for r in records):
        raise ValueError("survival curve needs every trial to have hit the absorbing set")
    taus = np.array([r.tau for r in records])
    t_max = int(taus.max()) + 1 if t_max is None else t_max
    t = np.arange(t_max + 1)
    surv = (taus[None, :] >= t[:, None]).mean(axis=1)
    se = np.sqrt(surv * (1 - surv) / taus.size)
    return Curve(t, surv, se)


def mse_curve(records: list[TrialRecord], decimate: int = 1, t_max: int | None = None) -> Curve:
    """Ensemble mean of ``sum_i |x_i(t) - x_i*|^2`` with the trial's absorbed state as ``x*``.

    Evaluated at multiples of ``decimate``, the grid trajectories are stored on.
    """
    if not records:
        raise ValueError("no trial records")
    if any(r.capped or not r.trajectory for r in records):
        raise ValueError("MSE curve needs completed trials with stored trajectories")
    if t_max is None:
        t_max = max(r.tau for r in records) + 1
    times = np.arange(0, t_max + 1, decimate)
    dev = np.zeros((len(records), times.size))
    for row, rec in enumerate(records):
        x_star = rec.final_state.opinions
        stored = dict(rec.trajectory)
        for k, t in enumerate(times):
            if t >= rec.tau:
                break
            dev[row, k] = float(((stored[int(t)] - x_star) ** 2).sum())
    se = dev.std(axis=0, ddof=1) / math.sqrt(len(records)) if len(records) > 1 else np.zeros(times.size)
    return Curve(times, dev.mean(axis=0), se)


def attach_tail_bound(curve: Curve, n: int, r_n: float, delta: float) -> Curve:
    T = floor_Tn(n, r_n)
    curve.bound = np.array([1.0 if t < 1 else tau_tail_bound(int(t), T, delta) for t in curve.t])
    return curve


def attach_mse_bound(curve: Curve, n: int, r_n: float, delta: float) -> Curve:
    curve.bound = np.array([mse_envelope(int(t), n, r_n, delta) for t in curve.t])
    return curve


@dataclass
class DominanceReport:
    trials: int
    delta: float
    survival: Curve
    mse: Curve

    @property
    def ok(self) -> bool:
        return self.survival.dominated() and self.mse.dominated()


def dominance_experiment(config: ExperimentConfig, workers: int = 1) -> DominanceReport:
    """Empirical tail and MSE curves against their theoretical envelopes."""
    cfg = ExperimentConfig(**{**_fields(config), "keep_trajectory": True})
    records = run_trials(cfg, workers)
    delta = delta_lower_bound(cfg.model)
    r_n = cfg.profile.r_min
    surv = attach_tail_bound(tau_survival_curve(records), cfg.n, r_n, delta)
    mse = attach_mse_bound(mse_curve(records, cfg.decimate), cfg.n, r_n, delta)
    return DominanceReport(len(records), delta, surv, mse)


def _fields(config: ExperimentConfig) -> dict:
    return {k: getattr(config, k) for k in config.__dataclass_fields__}


# ---------------------------------------------------------------------------
# consensus experiments
# ---------------------------------------------------------------------------


@dataclass
class ConsensusReport:
    trials: int
    consensus: int
    tau_mean: float
    tau_max: int

    @property
    def ok(self) -> bool:
        return self.consensus == self.trials


def corollary1_experiment(config: ExperimentConfig, workers: int = 1) -> ConsensusReport:
    """Every trial must end in one cluster when the largest bound covers the unit ball's diameter."""
    if config.profile.r_max < 2.0:
        raise ValueError(f"largest confidence bound must be at least 2, got {config.profile.r_max}")
    if config.init == "explicit" and np.any(np.linalg.norm(np.asarray(config.opinions), axis=1) > 1.0):
        raise ValueError("initial opinions must lie in the unit ball")
    records = run_trials(config, workers)
    taus = [r.tau for r in records if not r.capped]
    return ConsensusReport(
        len(records),
        sum(r.consensus for r in records),
        float(np.mean(taus)) if taus else math.nan,
        max(taus) if taus else -1,
    )


@dataclass
class SeparationReport:
    steps: int
    min_gap: float  # smallest |x_0(t) - x_i(t)| - r_0 seen
    lead_constant: bool

    @property
    def ok(self) -> bool:
        return self.min_gap > 0 and self.lead_constant


def separation_run(
    state: SystemState, profile: ConfidenceProfile, model: InteractionModel, rng: np.random.Generator, steps: int
) -> SeparationReport:
    """Simulate and track how far agent 0 stays outside its own range of everyone else."""
    sample = EdgeSampler(model).adjacency
    x, r = state.opinions, profile.bounds
    lead = x[0].copy()
    gap, constant = math.inf, True
    for _ in range(steps + 1):
        gap = min(gap, float(np.linalg.norm(x[1:] - x[0], axis=1).min()) - r[0])
        constant &= bool(np.array_equal(x[0], lead))
        x = update(x, r, sample(rng))
    return SeparationReport(steps, gap, constant)


def summarize(records: list[TrialRecord]) -> dict:
    taus = [r.tau for r in records if not r.capped]
    return {
        "trials": len(records),
        "capped": sum(r.capped for r in records),
        "consensus": sum(r.consensus for r in records),
        "tau_mean": float(np.mean(taus)) if taus else None,
        "tau_max": max(taus) if taus else None,
        "clusters_mean": float(np.mean([len(r.partition) for r in records])),
    }

