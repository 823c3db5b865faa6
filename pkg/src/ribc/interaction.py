"""Random edge-set generators and the subset-probability lower bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EdgeSet

ENUMERATION_LIMIT = 20  # max number of ordered pairs for exhaustive checks


@dataclass(frozen=True)
class InteractionModel:
    """Independent per-edge Bernoulli sampler over ordered pairs.

    ``kind`` is ``"er"`` (one probability ``p`` for every pair), ``"pair"``
    (a full matrix of per-pair probabilities) or ``"uniform"`` (every subset
    equally likely, i.e. ``p = 1/2``).
    """

    kind: str
    n: int
    p: float | None = None
    P: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("interaction models need at least two agents")
        if self.kind == "er":
            if self.p is None or not 0.0 < self.p < 1.0:
                raise ValueError(f"edge probability p must lie strictly in (0, 1), got {self.p}")
        elif self.kind == "pair":
            P = np.array(self.P, dtype=float)
            if P.shape != (self.n, self.n):
                raise ValueError(f"pair matrix must be {self.n}x{self.n}")
            off = P[~np.eye(self.n, dtype=bool)]
            if np.any(off <= 0) or np.any(off >= 1):
                raise ValueError("every off-diagonal pair probability must lie strictly in (0, 1)")
            np.fill_diagonal(P, 0.0)
            P.setflags(write=False)
            object.__setattr__(self, "P", P)
        elif self.kind != "uniform":
            raise ValueError(f"unknown interaction model {self.kind!r}")

    @property
    def n_pairs(self) -> int:
        return self.n * (self.n - 1)

    def probabilities(self) -> np.ndarray:
        """Inclusion probability of each ordered pair, zero on the diagonal."""
        if self.kind == "pair":
            return np.array(self.P)
        p = 0.5 if self.kind == "uniform" else self.p
        out = np.full((self.n, self.n), p)
        np.fill_diagonal(out, 0.0)
        return out

    def pair_probabilities(self) -> np.ndarray:
        """Per-pair probabilities flattened in canonical pair order."""
        return self.probabilities()[~np.eye(self.n, dtype=bool)]


def erdos_renyi(n: int, p: float) -> InteractionModel:
    return InteractionModel("er", n, p=p)


def pair_matrix(P) -> InteractionModel:
    P = np.asarray(P, dtype=float)
    return InteractionModel("pair", P.shape[0], P=P)


def uniform_subset(n: int) -> InteractionModel:
    return InteractionModel("uniform", n)


def make_rng(master_seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent reproducible stream for trial ``stream_id``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SeededStream:
    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return make_rng(self.master_seed, self.stream_id)


class EdgeSampler:
    """Draws edge sets for one model; keeps the off-diagonal mask around."""

    def __init__(self, model: InteractionModel):
        self.model = model
        self._mask = ~np.eye(model.n, dtype=bool)
        self._p = model.pair_probabilities()

    def adjacency(self, rng: np.random.Generator) -> np.ndarray:
        adj = np.zeros((self.model.n, self.model.n), dtype=bool)
        adj[self._mask] = rng.random(self._p.size) < self._p
        return adj

    def __call__(self, rng: np.random.Generator) -> EdgeSet:
        return EdgeSet(self.adjacency(rng))


def sample_edge_set(model: InteractionModel, rng: np.random.Generator) -> EdgeSet:
    return EdgeSampler(model)(rng)


def delta_lower_bound(model: InteractionModel) -> float:
    """Smallest probability of any single edge subset."""
    if model.kind == "er":
        return min(model.p, 1.0 - model.p) ** model.n_pairs
    if model.kind == "uniform":
        return 2.0 ** -model.n_pairs
    p = model.pair_probabilities()
    return float(np.prod(np.minimum(p, 1.0 - p)))


@dataclass
class LowBoundReport:
    n_subsets: int
    min_probability: float
    total_probability: float
    delta: float
    argmin: EdgeSet
    ok: bool


def subset_probabilities(model: InteractionModel) -> np.ndarray:
    """Exact probability of every edge subset.

    Entry ``k`` is the subset whose canonical-order membership bits are the
    binary digits of ``k``, most significant bit first.
    """
    m = model.n_pairs
    if m > ENUMERATION_LIMIT:
        raise ValueError(f"{m} ordered pairs is too many to enumerate (limit {ENUMERATION_LIMIT})")
    probs = np.ones(1)
    for p in model.pair_probabilities():
        probs = np.outer(probs, [1.0 - p, p]).ravel()
    return probs


def verify_lowbound_exhaustive(model: InteractionModel, rtol: float = 1e-12) -> LowBoundReport:
    probs = subset_probabilities(model)
    m = model.n_pairs
    k = int(np.argmin(probs))
    bits = [(k >> (m - 1 - b)) & 1 for b in range(m)]
    argmin = EdgeSet.from_indices(model.n, [b for b, on in enumerate(bits) if on])
    delta = delta_lower_bound(model)
    total = math.fsum(probs)
    ok = math.isclose(float(probs[k]), delta, rel_tol=rtol) and abs(total - 1.0) <= rtol
    return LowBoundReport(probs.size, float(probs[k]), total, delta, argmin, ok)
