"""Controlled-interaction merging: two-cluster merge schedules, the greedy
global scheduler, and the closed-form step and rate bounds that go with them.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfidenceProfile,
    EdgeSet,
    SystemState,
    connected,
    detect_clusters,
    distances,
    is_e1,
    neighbor_matrix,
    step,
    subset_diameter,
)


class ScheduleError(AssertionError):
    """A constructed control step did not behave as the construction requires.

    This signals a bug (or a floating-point edge case), never bad user input.
    """


# ---------------------------------------------------------------------------
# closed-form bounds
# ---------------------------------------------------------------------------


def _check_rn(n: int, r_n: float, n_min: int = 3):
    if n < n_min:
        raise ValueError(f"n must be at least {n_min}, got {n}")
    if not 0.0 < r_n < 2.0:
        raise ValueError(f"smallest confidence bound must lie in (0, 2), got {r_n}")


def halving_count(dist: float, radius: float) -> int:
    """Smallest ``t >= 0`` with ``dist <= 2**t * radius``, i.e. ``max(ceil(log2(dist/radius)), 0)``.

    Computed by exact doubling so powers of two are not misjudged by ``log2``.
    """
    t, reach = 0, radius
    while dist > reach:
        t += 1
        reach *= 2.0
    return t


def compute_S_T(J: int, K: int, d0: float, r_min: float) -> tuple[int, int, int]:
    """Phase bound ``S``, per-phase halving bound ``T`` and step bound ``S*(T+1)+1``."""
    if J < 1 or K < 1:
        raise ValueError("cluster sizes must be at least 1")
    if d0 <= 0 or r_min <= 0:
        raise ValueError("distance and confidence bound must be positive")
    ratio = d0 / r_min
    S = max(math.ceil((ratio - 1.0) * 4 * J * (K + 1) / (J + K + 1) + 2), 0)
    T = halving_count(d0, r_min)
    return S, T, S * (T + 1) + 1


def compute_Tn_star(n: int, r_n: float) -> int:
    """Terminal-time bound of the greedy scheduler for ``n`` agents."""
    _check_rn(n, r_n)
    c = 2.0 / r_n - 1.0
    total = 1 + sum(math.ceil(c * 8 * i / (i + 2) + 2) for i in range(2, n))
    return total * (halving_count(2.0, r_n) + 1) + n - 2


def compute_Tn(n: int, r_n: float) -> float:
    """Closed-form relaxation of :func:`compute_Tn_star` (natural log)."""
    _check_rn(n, r_n)
    bracket = 3 * n - 2 + 8 * (2.0 / r_n - 1.0) * (n + 5.0 / 3.0 - 2.0 * math.log(n + 2))
    return bracket * (halving_count(2.0, r_n) + 1) + n - 2


def floor_Tn(n: int, r_n: float) -> int:
    return math.floor(compute_Tn(n, r_n))


def tau_tail_bound(t: int, tstar: int, delta: float) -> float:
    """Upper bound on ``P(tau >= t)`` from a ``tstar``-step control and subset floor ``delta``."""
    if t < 1 or tstar < 1:
        raise ValueError("t and tstar must be at least 1")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return (1.0 - delta**tstar) ** (t // (tstar + 1))


def mse_envelope(t: int, n: int, r_n: float, delta: float) -> float:
    """Bound on the summed mean-square distance to the limit at time ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    T = floor_Tn(n, r_n)
    return 4.0 * n * (1.0 - delta**T) ** (t // (T + 1))


# ---------------------------------------------------------------------------
# two-cluster merge
# ---------------------------------------------------------------------------


@dataclass
class PhaseRecord:
    """One approach-then-star phase of a merge."""

    toward: str  # "beta" (odd phases) or "alpha" (even phases)
    d_before: float
    d_after: float
    halvings: int
    decrement_floor: float  # the amount d must strictly drop by
    shuttle_start: np.ndarray
    target: np.ndarray
    shuttle_path: list = field(default_factory=list)  # shuttle position after each halving

    @property
    def satisfied(self) -> bool:
        return self.d_after < self.d_before - self.decrement_floor


@dataclass
class MergeTask:
    """Step-by-step controller merging two connected co-located clusters.

    The lead agent ``alpha[0]`` carries the largest bound and acts as a
    shuttle: it halves its way toward the far side, star-merges with it,
    then does the same toward the remaining near side, alternating until the
    two groups are within the smallest bound and one clique step finishes.
    """

    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    r_min: float
    r_alpha_last: float
    r_beta_last: float
    d0: float
    predicted_bound: int
    start_time: int = 0
    steps_used: int = 0
    done: bool = False
    phases: list[PhaseRecord] = field(default_factory=list)
    _plan: deque = field(default_factory=deque, repr=False)
    _last: tuple | None = field(default=None, repr=False)

    @classmethod
    def create(cls, state: SystemState, profile: ConfidenceProfile, alpha, beta) -> "MergeTask":
        alpha, beta = tuple(sorted(alpha)), tuple(sorted(beta))
        if not alpha or not beta or set(alpha) & set(beta):
            raise ValueError("merge needs two nonempty disjoint clusters")
        if alpha[0] > beta[0]:
            raise ValueError("alpha must hold the lowest agent index")
        x, r = state.opinions, profile.bounds
        for group in (alpha, beta):
            if subset_diameter(state, group) != 0.0:
                raise ValueError(f"agents {group} are not co-located")
        if not connected(x[alpha[0]], x[beta[0]], r[alpha[0]], r[beta[0]]):
            raise ValueError(f"clusters {alpha} and {beta} are not connected")
        d0 = float(np.linalg.norm(x[alpha[0]] - x[beta[0]]))
        if d0 == 0.0:
            raise ValueError("clusters coincide")
        r_alpha_last, r_beta_last = float(r[alpha[-1]]), float(r[beta[-1]])
        r_min = min(r_alpha_last, r_beta_last)
        _, _, bound = compute_S_T(len(alpha), len(beta), d0, r_min)
        return cls(alpha, beta, r_min, r_alpha_last, r_beta_last, d0, bound, start_time=state.time)

    @property
    def agents(self) -> tuple[int, ...]:
        return tuple(sorted(self.alpha + self.beta))

    @property
    def shuttle(self) -> int:
        return self.alpha[0]

    def _plan_phase(self, state: SystemState):
        x = state.opinions
        d = subset_diameter(state, self.agents)
        if d <= self.r_min:
            self._plan.append(("clique", self.agents))
            return
        if len(self.phases) % 2 == 0:
            toward, group, radius = "beta", self.beta, self.r_beta_last
            floor = self.r_min / (2 * (len(self.beta) + 1))
        else:
            toward, group, radius = "alpha", self.alpha[1:], self.r_alpha_last
            floor = self.r_min / (2 * len(self.alpha))
        h = halving_count(d, radius)
        self.phases.append(
            PhaseRecord(toward, d, math.nan, h, floor, x[self.shuttle].copy(), x[group[0]].copy())
        )
        self._plan.extend([("halve", group)] * h)
        self._plan.append(("star", (self.shuttle,) + group))

    def next_edges(self, state: SystemState, profile: ConfidenceProfile) -> EdgeSet:
        """Edge set for the next step; checks every intended read is admissible."""
        if self.done:
            raise RuntimeError("merge already finished")
        if not self._plan:
            self._plan_phase(state)
        kind, group = self._plan.popleft()
        n = state.n
        if kind == "halve":
            target = group[-1]
            edges = EdgeSet.from_pairs(n, [(self.shuttle, target), (target, self.shuttle)])
            expected = {self.shuttle: {target}, target: set()}
        else:
            edges = EdgeSet.clique(n, group)
            expected = {i: set(group) - {i} for i in group}
        nbrs = neighbor_matrix(state, profile, edges)
        for i, want in expected.items():
            got = set(int(j) for j in np.flatnonzero(nbrs[i]))
            if got != want:
                raise ScheduleError(
                    f"{kind} step at t={state.time}: agent {i} reads {sorted(got)}, expected {sorted(want)}"
                )
        self._last = (kind, group)
        return edges

    def observe(self, state: SystemState):
        """Record the effect of the step just applied."""
        kind, group = self._last
        self.steps_used += 1
        if kind == "halve":
            self.phases[-1].shuttle_path.append(state.opinions[self.shuttle].copy())
            return
        if kind == "clique" or subset_diameter(state, self.agents) == 0.0:
            if kind == "star":
                self.phases[-1].d_after = 0.0
            if subset_diameter(state, self.agents) != 0.0:
                raise ScheduleError(f"clique step left agents {self.agents} apart")
            self.done = True
            return
        self.phases[-1].d_after = subset_diameter(state, self.agents)

    def halving_errors(self) -> list[float]:
        """Relative deviation of each recorded halving position from the closed form."""
        errs = []
        for ph in self.phases:
            scale = max(np.linalg.norm(ph.target - ph.shuttle_start), 1e-300)
            for s, pos in enumerate(ph.shuttle_path, start=1):
                w = 2.0**-s
                exact = (1 - w) * ph.target + w * ph.shuttle_start
                errs.append(float(np.linalg.norm(pos - exact) / scale))
        return errs


@dataclass
class MergeResult:
    schedule: list[EdgeSet]
    state: SystemState
    steps_used: int
    task: MergeTask


def merge_schedule(state: SystemState, profile: ConfidenceProfile, task: MergeTask) -> MergeResult:
    """Run one merge task to completion on its own."""
    schedule = []
    while not task.done:
        edges = task.next_edges(state, profile)
        schedule.append(edges)
        state = step(state, profile, edges)
        task.observe(state)
    return MergeResult(schedule, state, task.steps_used, task)


def merge_clusters(state: SystemState, profile: ConfidenceProfile, alpha, beta) -> MergeResult:
    return merge_schedule(state, profile, MergeTask.create(state, profile, alpha, beta))


# ---------------------------------------------------------------------------
# greedy global scheduler
# ---------------------------------------------------------------------------


@dataclass
class ControlRun:
    """Output of :func:`algorithm1_run`.

    ``partitions[t]`` is the tracked cluster partition at time ``t`` (clusters
    inside an active merge are still listed separately until it finishes);
    ``task_edges[t]`` lists the edge set of each active merge at step ``t``;
    ``generated`` holds ``(cluster, time)`` for every merged cluster.
    """

    schedule: list[EdgeSet]
    terminal_time: int
    final_state: SystemState
    partitions: list[tuple[tuple[int, ...], ...]]
    task_edges: list[list[tuple[tuple[int, ...], EdgeSet]]]
    generated: list[tuple[tuple[int, ...], int]]
    tasks: list[MergeTask]


def _safety_cap(state: SystemState, profile: ConfidenceProfile) -> int:
    n = max(state.n, 3)
    scale = max(float(distances(state.opinions).max()) / 2.0, 1.0)
    r = min(profile.r_min / scale, 1.99)
    return 10 * math.ceil(compute_Tn(n, r))


def _pick_pair(clusters, idle, reps, tops):
    """Lowest-lead idle cluster with an idle partner, and its lowest-lead partner."""
    order = sorted(idle, key=lambda k: clusters[k][0])
    for a in order:
        partners = [
            b for b in order if b != a and connected(reps[a], reps[b], tops[a], tops[b])
        ]
        if partners:
            return a, partners[0]
    return None


def algorithm1_run(state: SystemState, profile: ConfidenceProfile, eps_eq: float = 0.0) -> ControlRun:
    """Drive the system to the absorbing configuration by pairwise cluster merges."""
    if profile.n != state.n:
        raise ValueError(f"profile has {profile.n} bounds for {state.n} agents")
    start = state.time
    cap = _safety_cap(state, profile)
    clusters: list[tuple[int, ...]] = list(detect_clusters(state, profile, eps_eq).clusters)
    idle = set(range(len(clusters)))  # indices into `clusters` of non-activated clusters
    active: list[tuple[MergeTask, int, int]] = []
    r = profile.bounds

    schedule, partitions, task_edges, generated, all_tasks = [], [], [], [], []

    def snapshot():
        live = [clusters[k] for k in sorted(idle)]
        for _, a, b in active:
            live.extend([clusters[a], clusters[b]])
        return tuple(sorted(live))

    while True:
        # activation (repeated until no two idle clusters are connected)
        while True:
            reps = {k: state.opinions[clusters[k][0]] for k in idle}
            tops = {k: float(r[clusters[k][0]]) for k in idle}
            pick = _pick_pair(clusters, idle, reps, tops)
            if pick is None:
                break
            a, b = pick
            idle -= {a, b}
            task = MergeTask.create(state, profile, clusters[a], clusters[b])
            active.append((task, a, b))
            all_tasks.append(task)
        partitions.append(snapshot())

        if is_e1(state, profile, eps_eq):
            if active:
                raise ScheduleError(f"absorbing state reached with {len(active)} merges in flight")
            break
        if not active:
            raise ScheduleError(f"no connected clusters at t={state.time} but the state is not absorbing")
        if state.time - start >= cap:
            raise ScheduleError(f"scheduler exceeded its safety cap of {cap} steps")

        per_task = [(task.agents, task.next_edges(state, profile)) for task, _, _ in active]
        edges = EdgeSet.empty(state.n)
        for _, e in per_task:
            edges = edges | e
        schedule.append(edges)
        task_edges.append(per_task)
        state = step(state, profile, edges)

        still = []
        for task, a, b in active:
            task.observe(state)
            if task.done:
                clusters.append(task.agents)
                idle.add(len(clusters) - 1)
                generated.append((task.agents, state.time - start))
            else:
                still.append((task, a, b))
        active = still

    return ControlRun(
        schedule, state.time - start, state, partitions, task_edges, generated, all_tasks
    )


def subsystem_terminal_time(initial: SystemState, profile: ConfidenceProfile, agents, eps_eq: float = 0.0) -> int:
    """Terminal time of the scheduler run on ``agents`` alone, from their initial opinions."""
    sub = SystemState(initial.subset(agents).opinions, 0)
    return algorithm1_run(sub, profile.subset(agents), eps_eq).terminal_time


def replay(state: SystemState, profile: ConfidenceProfile, schedule: list[EdgeSet]) -> list[SystemState]:
    """States visited when ``schedule`` is applied from ``state`` (inclusive)."""
    states = [state]
    for edges in schedule:
        states.append(step(states[-1], profile, edges))
    return states
