import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ribc.core import (
    ClusterError,
    ConfidenceProfile,
    EdgeSet,
    SystemState,
    canonical_pairs,
    detect_clusters,
    distances,
    is_e1,
    neighbor_set,
    step,
    subset_diameter,
)

R3 = ConfidenceProfile([0.5, 0.5, 0.5])


def state(*xs):
    return SystemState(np.array(xs, dtype=float))


# --- data types ------------------------------------------------------------


def test_profile_rejects_increasing():
    with pytest.raises(ValueError, match="nonincreasing"):
        ConfidenceProfile([0.5, 0.7, 0.3])


@pytest.mark.parametrize("bad", [[0.5, 0.0], [1.0, -0.1], [np.inf, 1.0], []])
def test_profile_rejects_nonpositive_or_empty(bad):
    with pytest.raises(ValueError):
        ConfidenceProfile(bad)


def test_state_is_read_only():
    s = state(0, 1)
    assert s.opinions.shape == (2, 1)
    with pytest.raises(ValueError):
        s.opinions[0, 0] = 5.0


def test_edge_set_validation():
    with pytest.raises(ValueError):
        EdgeSet.from_pairs(3, [(1, 1)])
    with pytest.raises(IndexError):
        EdgeSet.from_pairs(3, [(0, 3)])
    assert len(EdgeSet.full(3)) == 6
    assert len(EdgeSet.empty(3)) == 0


def test_canonical_index_round_trip():
    n = 4
    pairs = canonical_pairs(n)
    assert len(pairs) == n * (n - 1)
    e = EdgeSet.from_pairs(n, pairs[::3])
    assert EdgeSet.from_indices(n, e.indices()) == e


# --- neighbor sets and steps -----------------------------------------------


def test_neighbor_sets_hand_example():
    # |x2 - x3| = 0.6 exceeds every bound, so only agents 1 and 2 see each other
    s = state(0.0, 0.4, 1.0)
    full = EdgeSet.full(3)
    assert [neighbor_set(s, R3, full, i) for i in range(3)] == [{1}, {0}, set()]


def test_neighbor_sets_empty_edges():
    s = state(0.0, 0.1, 0.2)
    assert all(neighbor_set(s, R3, EdgeSet.empty(3), i) == set() for i in range(3))


def test_neighbor_sets_coincident():
    s = state(0.3, 0.3, 0.3)
    for i in range(3):
        assert neighbor_set(s, R3, EdgeSet.full(3), i) == set(range(3)) - {i}


def test_neighbor_set_uses_observer_bound():
    prof = ConfidenceProfile([1.0, 0.2])
    s = state(0.0, 0.5)
    full = EdgeSet.full(2)
    assert neighbor_set(s, prof, full, 0) == {1}
    assert neighbor_set(s, prof, full, 1) == set()


def test_neighbor_set_boundary_is_inclusive():
    s = state(0.0, 0.5)
    assert neighbor_set(s, ConfidenceProfile([0.5, 0.5]), EdgeSet.full(2), 0) == {1}


def test_neighbor_set_needs_directed_edge():
    s = state(0.0, 0.1)
    e = EdgeSet.from_pairs(2, [(0, 1)])
    prof = ConfidenceProfile([0.5, 0.5])
    assert neighbor_set(s, prof, e, 0) == {1}
    assert neighbor_set(s, prof, e, 1) == set()


def test_neighbor_set_bad_index():
    with pytest.raises(IndexError):
        neighbor_set(state(0, 1, 2), R3, EdgeSet.full(3), 3)


def test_step_hand_example():
    out = step(state(0.0, 0.4, 1.0), R3, EdgeSet.full(3))
    np.testing.assert_allclose(out.opinions[:, 0], [0.2, 0.2, 1.0], rtol=1e-15)
    assert out.time == 1


def test_step_empty_edges_is_identity():
    s = state(0.1, -0.2, 0.9)
    assert np.array_equal(step(s, R3, EdgeSet.empty(3)).opinions, s.opinions)


def test_step_colocated_and_far():
    out = step(state(0, 0, 1), R3, EdgeSet.full(3))
    assert np.array_equal(out.opinions[:, 0], [0, 0, 1])


def test_step_size_mismatch():
    with pytest.raises(ValueError):
        step(state(0, 1), R3, EdgeSet.full(3))


def test_star_update_is_bitwise_shared():
    # all members of a fully connected group land on the identical double
    x = np.array([[0.1], [0.7], [0.3], [0.30000000000000004]])
    out = step(SystemState(x), ConfidenceProfile([1.0] * 4), EdgeSet.full(4)).opinions
    assert len({v.tobytes() for v in out}) == 1


# --- clusters and E1 --------------------------------------------------------


def test_clusters_far():
    p = detect_clusters(state(0, 0, 1), R3)
    assert p.as_sets() == {frozenset({0, 1}), frozenset({2})}
    assert p.connections == frozenset()


def test_clusters_connected():
    p = detect_clusters(state(0, 0, 0.4), R3)
    assert p.as_sets() == {frozenset({0, 1}), frozenset({2})}
    assert p.connections == frozenset({(0, 1)})


def test_clusters_single():
    p = detect_clusters(state(0.2, 0.2, 0.2), R3)
    assert len(p) == 1 and p.connections == frozenset()


def test_clusters_reject_chained_tolerance():
    # 0 ~ 1e-9 ~ 2e-9 under eps=1e-9 but the ends are 2e-9 apart
    with pytest.raises(ClusterError):
        detect_clusters(state(0.0, 1e-9, 2e-9), R3, eps_eq=1.5e-9)


@pytest.mark.parametrize(
    "xs, expected",
    [((0, 0, 1), True), ((0, 0, 0.4), False), ((0.3, 0.3, 0.3), True)],
)
def test_is_e1(xs, expected):
    assert is_e1(state(*xs), R3) is expected


def test_subset_diameter():
    assert subset_diameter(state(0.3, 0.9), {1}) == 0
    assert subset_diameter(state(0, 1), {0, 1}) == 1
    s = SystemState(np.array([[0.0, 0.0], [0.3, 0.4]]))
    assert subset_diameter(s, {0, 1}) == pytest.approx(0.5, rel=1e-15)
    with pytest.raises(ValueError):
        subset_diameter(s, set())


# --- invariants ---------------------------------------------------------------

N_MAX = 6


@st.composite
def systems(draw, d=None):
    n = draw(st.integers(2, N_MAX))
    d = d or draw(st.integers(1, 3))
    x = draw(arrays(np.float64, (n, d), elements=st.floats(-1, 1, allow_nan=False, width=64)))
    r = sorted(draw(st.lists(st.floats(0.01, 2.5), min_size=n, max_size=n)), reverse=True)
    mask = draw(arrays(np.bool_, (n, n)))
    np.fill_diagonal(mask, False)
    return SystemState(x), ConfidenceProfile(r), EdgeSet(mask)


def _rel_close(a, b, rel=1e-12):
    scale = max(1.0, float(np.abs(b).max()))
    return float(np.abs(a - b).max()) <= rel * scale


@settings(max_examples=200, deadline=None)
@given(systems())
def test_convex_hull_containment(sys_):
    s, prof, e = sys_
    x, y = s.opinions, step(s, prof, e).opinions
    # each new opinion is a mean of old ones, so it respects coordinate-wise bounds
    assert np.all(y >= x.min(axis=0) - 1e-15) and np.all(y <= x.max(axis=0) + 1e-15)
    assert np.linalg.norm(y, axis=1).max() <= np.linalg.norm(x, axis=1).max() * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, N_MAX), st.integers(0, 2**32 - 1))
def test_permutation_equivariance(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.6, 0.6, size=(n, 2))
    prof = ConfidenceProfile([0.5] * n)
    e = EdgeSet((rng.random((n, n)) < 0.6) & ~np.eye(n, dtype=bool))
    perm = rng.permutation(n)
    lhs = step(SystemState(x[perm]), prof, EdgeSet(e.adj[np.ix_(perm, perm)])).opinions
    rhs = step(SystemState(x), prof, e).opinions[perm]
    assert _rel_close(lhs, rhs)


@settings(max_examples=200, deadline=None)
@given(systems(d=3), st.integers(0, 2**32 - 1))
def test_rotation_translation_equivariance(sys_, seed):
    s, prof, e = sys_
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    shift = rng.uniform(-0.1, 0.1, size=3)
    x = s.opinions
    # skip inputs where a distance sits within rounding of a bound
    dist = distances(x)
    if np.any(np.abs(dist[:, :, None] - prof.bounds[None, None, :]) < 1e-9):
        return
    lhs = step(SystemState(x @ q.T + shift), prof, e).opinions
    rhs = step(s, prof, e).opinions @ q.T + shift
    assert _rel_close(lhs, rhs)


@settings(max_examples=100, deadline=None)
@given(systems())
def test_step_is_deterministic(sys_):
    s, prof, e = sys_
    assert step(s, prof, e).opinions.tobytes() == step(s, prof, e).opinions.tobytes()


@settings(max_examples=100, deadline=None)
@given(systems())
def test_e1_state_is_fixed_by_every_edge_set(sys_):
    s, prof, _ = sys_
    if not is_e1(s, prof):
        return
    for mask in (np.zeros((s.n, s.n), bool), ~np.eye(s.n, dtype=bool)):
        assert np.array_equal(step(s, prof, EdgeSet(mask)).opinions, s.opinions)


@settings(max_examples=100, deadline=None)
@given(systems())
def test_partition_covers_agents(sys_):
    s, prof, _ = sys_
    try:
        p = detect_clusters(s, prof)
    except ClusterError:
        return
    members = sorted(a for c in p.clusters for a in c)
    assert members == list(range(s.n))
    assert all(list(c) == sorted(c) for c in p.clusters)
    assert [c[0] for c in p.clusters] == sorted(c[0] for c in p.clusters)
