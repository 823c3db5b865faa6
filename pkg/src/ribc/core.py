"""Opinion state, the bounded-confidence neighbor rule and the averaging update.

Agents are indexed from 0.  Opinions live in an ``(n, d)`` float array and
every operation here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import _kernels as _k


class ClusterError(ValueError):
    """Near-equality under ``eps_eq`` is not transitive, so clusters are ill-defined."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConfidenceProfile:
    """Per-agent confidence bounds, sorted nonincreasing and strictly positive."""

    bounds: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.bounds, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ValueError("confidence bounds must be a nonempty vector")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise ValueError("confidence bounds must be positive and finite")
        if np.any(np.diff(r) > 0):
            raise ValueError("confidence bounds must be nonincreasing")
        object.__setattr__(self, "bounds", _frozen(r))

    @property
    def n(self) -> int:
        return self.bounds.size

    @property
    def r_min(self) -> float:
        return float(self.bounds[-1])

    @property
    def r_max(self) -> float:
        return float(self.bounds[0])

    def subset(self, agents) -> "ConfidenceProfile":
        return ConfidenceProfile(self.bounds[np.sort(np.asarray(agents, dtype=int))])


@dataclass(frozen=True)
class SystemState:
    """Opinions of all agents at integer time ``time``."""

    opinions: np.ndarray
    time: int = 0

    def __post_init__(self):
        x = np.asarray(self.opinions, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
            raise ValueError(f"opinions must have shape (n, d), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("opinions must be finite")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        object.__setattr__(self, "opinions", _frozen(x))

    @property
    def n(self) -> int:
        return self.opinions.shape[0]

    @property
    def d(self) -> int:
        return self.opinions.shape[1]

    def with_opinions(self, opinions, time: int | None = None) -> "SystemState":
        return SystemState(opinions, self.time + 1 if time is None else time)

    def subset(self, agents) -> "SystemState":
        return SystemState(self.opinions[np.sort(np.asarray(agents, dtype=int))], self.time)


def canonical_pairs(n: int) -> list[tuple[int, int]]:
    """All ordered pairs ``(i, j)``, ``i != j``, in lexicographic order."""
    return [(i, j) for i in range(n) for j in range(n) if i != j]


@dataclass(frozen=True, eq=False)
class EdgeSet:
    """Directed edge subset of the complete graph without self-loops.

    Stored as an ``(n, n)`` boolean adjacency matrix; ``adj[i, j]`` means agent
    ``i`` may read agent ``j``.
    """

    adj: np.ndarray

    def __post_init__(self):
        a = np.array(self.adj, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if np.any(np.diagonal(a)):
            raise ValueError("edge sets may not contain self-loops")
        a.setflags(write=False)
        object.__setattr__(self, "adj", a)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @classmethod
    def empty(cls, n: int) -> "EdgeSet":
        return cls(np.zeros((n, n), dtype=bool))

    @classmethod
    def full(cls, n: int) -> "EdgeSet":
        return cls(~np.eye(n, dtype=bool))

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "EdgeSet":
        a = np.zeros((n, n), dtype=bool)
        for i, j in pairs:
            if not (0 <= i < n and 0 <= j < n):
                raise IndexError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise ValueError(f"self-loop ({i}, {i})")
            a[i, j] = True
        return cls(a)

    @classmethod
    def clique(cls, n: int, agents) -> "EdgeSet":
        """All ordered pairs inside ``agents``."""
        a = np.zeros((n, n), dtype=bool)
        idx = np.asarray(sorted(agents), dtype=int)
        a[np.ix_(idx, idx)] = True
        np.fill_diagonal(a, False)
        return cls(a)

    @classmethod
    def from_indices(cls, n: int, indices) -> "EdgeSet":
        pairs = canonical_pairs(n)
        return cls.from_pairs(n, (pairs[k] for k in indices))

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adj))]

    def indices(self) -> list[int]:
        """Positions of the present edges in :func:`canonical_pairs` order."""
        mask = ~np.eye(self.n, dtype=bool)
        return [int(k) for k in np.flatnonzero(self.adj[mask])]

    def __or__(self, other: "EdgeSet") -> "EdgeSet":
        return EdgeSet(self.adj | other.adj)

    def __len__(self) -> int:
        return int(self.adj.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeSet) and np.array_equal(self.adj, other.adj)

    def __hash__(self) -> int:
        return hash((self.n, self.adj.tobytes()))


def distances(opinions: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances; exactly symmetric with a zero diagonal."""
    return _k.pair_distances(np.ascontiguousarray(opinions, dtype=float))


def _check_sizes(state: SystemState, profile: ConfidenceProfile, edges: EdgeSet | None = None):
    if profile.n != state.n:
        raise ValueError(f"profile has {profile.n} bounds for {state.n} agents")
    if edges is not None and edges.n != state.n:
        raise ValueError(f"edge set is for {edges.n} agents, state has {state.n}")


def admissible(opinions: np.ndarray, bounds: np.ndarray, adj: np.ndarray) -> np.ndarray:
    """Array kernel behind :func:`neighbor_matrix`."""
    return _k.admissible(opinions, bounds, adj)


def neighbor_matrix(state: SystemState, profile: ConfidenceProfile, edges: EdgeSet) -> np.ndarray:
    """Boolean matrix of admissible reads: ``(i, j)`` present and within ``r_i``."""
    _check_sizes(state, profile, edges)
    return admissible(state.opinions, profile.bounds, edges.adj)


def neighbor_set(state: SystemState, profile: ConfidenceProfile, edges: EdgeSet, i: int) -> set[int]:
    if not 0 <= i < state.n:
        raise IndexError(f"agent {i} out of range for n={state.n}")
    return {int(j) for j in np.flatnonzero(neighbor_matrix(state, profile, edges)[i])}


def average_update(opinions: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Replace each row by the mean over its membership row (self included).

    The mean is taken as ``x_a + sum_j (x_j - x_a) / k`` with ``a`` the
    lowest-index member.  Every row runs the same reduction sequence, so rows
    with the same membership come out bitwise equal, and averaging identical
    opinions returns them unchanged.
    """
    return _k.average_rows(np.ascontiguousarray(opinions, dtype=float), np.asarray(members, dtype=bool))


def update(opinions: np.ndarray, bounds: np.ndarray, adj: np.ndarray) -> np.ndarray:
    """Array kernel behind :func:`step`."""
    return _k.update(opinions, bounds, adj)


def step(state: SystemState, profile: ConfidenceProfile, edges: EdgeSet) -> SystemState:
    """One synchronous bounded-confidence averaging step."""
    _check_sizes(state, profile, edges)
    return state.with_opinions(update(state.opinions, profile.bounds, edges.adj))


@dataclass(frozen=True)
class ClusterPartition:
    """Co-located groups of agents and which groups are connected.

    ``clusters`` are sorted tuples ordered by their lowest agent index;
    ``connections`` holds index pairs ``(a, b)`` into ``clusters`` with ``a < b``.
    """

    clusters: tuple[tuple[int, ...], ...]
    representatives: np.ndarray
    connections: frozenset = field(default_factory=frozenset)

    def cluster_of(self, agent: int) -> int:
        for k, c in enumerate(self.clusters):
            if agent in c:
                return k
        raise IndexError(agent)

    def as_sets(self) -> set[frozenset]:
        return {frozenset(c) for c in self.clusters}

    def __len__(self) -> int:
        return len(self.clusters)


def connected(rep_a, rep_b, bound_a: float, bound_b: float) -> bool:
    """Two co-located groups are connected if their distance is within the larger bound."""
    return float(np.linalg.norm(np.asarray(rep_a) - np.asarray(rep_b))) <= max(bound_a, bound_b)


def detect_clusters(state: SystemState, profile: ConfidenceProfile, eps_eq: float = 0.0) -> ClusterPartition:
    if eps_eq < 0:
        raise ValueError("eps_eq must be nonnegative")
    _check_sizes(state, profile)
    n = state.n
    close = distances(state.opinions) <= eps_eq

    label = -np.ones(n, dtype=int)
    groups: list[tuple[int, ...]] = []
    for i in range(n):
        if label[i] >= 0:
            continue
        stack, members = [i], []
        label[i] = len(groups)
        while stack:
            k = stack.pop()
            members.append(k)
            for j in np.flatnonzero(close[k] & (label < 0)):
                label[j] = len(groups)
                stack.append(int(j))
        members.sort()
        sub = close[np.ix_(members, members)]
        if not sub.all():
            raise ClusterError(
                f"agents {members} are chained by near-equality (eps_eq={eps_eq}) "
                "but not pairwise within it"
            )
        groups.append(tuple(members))

    reps = np.array([state.opinions[g[0]] for g in groups])
    top = [float(profile.bounds[g[0]]) for g in groups]  # bounds are sorted, so the lead has the largest
    links = set()
    for a, b in combinations(range(len(groups)), 2):
        if connected(reps[a], reps[b], top[a], top[b]):
            links.add((a, b))
    reps.setflags(write=False)
    return ClusterPartition(tuple(groups), reps, frozenset(links))


def absorbed(opinions: np.ndarray, bounds: np.ndarray, eps_eq: float = 0.0) -> bool:
    """Array kernel behind :func:`is_e1`."""
    return bool(_k.absorbed(opinions, bounds, float(eps_eq)))


def is_e1(state: SystemState, profile: ConfidenceProfile, eps_eq: float = 0.0) -> bool:
    """True when every pair is either co-located or out of both agents' range."""
    _check_sizes(state, profile)
    return absorbed(state.opinions, profile.bounds, eps_eq)


def subset_diameter(state: SystemState, agents) -> float:
    idx = sorted(set(int(a) for a in agents))
    if not idx:
        raise ValueError("subset_diameter needs a nonempty agent set")
    if len(idx) == 1:
        return 0.0
    return float(distances(state.opinions[idx]).max())
