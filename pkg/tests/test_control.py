import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ribc import control
from ribc.control import (
    MergeTask,
    ScheduleError,
    algorithm1_run,
    compute_S_T,
    compute_Tn,
    compute_Tn_star,
    floor_Tn,
    halving_count,
    merge_clusters,
    mse_envelope,
    replay,
    subsystem_terminal_time,
    tau_tail_bound,
)
from ribc.core import ConfidenceProfile, EdgeSet, SystemState, is_e1, subset_diameter
from ribc.interaction import make_rng
from ribc.verify import random_cibc_instance, random_merge_instance


def tn_oracle(n, r):
    """Re-derivation of the closed form straight from its definition."""
    bracket = 3 * n - 2 + 8 * (2 / r - 1) * (n + 5 / 3 - 2 * np.log(n + 2))
    return bracket * (math.ceil(math.log2(2 / r)) + 1) + n - 2


# --- formulas ---------------------------------------------------------------


@pytest.mark.parametrize("dist, radius, expected", [(1, 0.3, 2), (1, 0.5, 1), (1, 1, 0), (0.2, 1, 0), (2, 0.25, 3)])
def test_halving_count(dist, radius, expected):
    assert halving_count(dist, radius) == expected


@pytest.mark.parametrize(
    "J, K, d0, r_min, expected",
    [(1, 1, 1.0, 0.5, (5, 1, 11)), (2, 1, 1.0, 0.3, (12, 2, 37))],
)
def test_compute_S_T(J, K, d0, r_min, expected):
    assert compute_S_T(J, K, d0, r_min) == expected


def test_compute_S_T_close_clusters():
    S, T, bound = compute_S_T(3, 2, 0.2, 0.5)
    assert T == 0 and S <= 2 and bound == S + 1


def test_Tn_star_values():
    assert compute_Tn_star(3, 1.0) == 15
    assert compute_Tn_star(4, 1.0) == 30


@pytest.mark.parametrize("n", [3, 5, 10, 40])
def test_Tn_star_limit_near_two(n):
    # just below 2 every ceiling term is 3 and one halving pass remains
    assert compute_Tn_star(n, 2 - 1e-12) == (1 + 3 * (n - 2)) * 2 + n - 2


def test_Tn_value():
    assert compute_Tn(3, 1.0) == pytest.approx(2 * (7 + 8 * (3 + 5 / 3 - 2 * math.log(5))) + 1, rel=1e-12)
    assert compute_Tn(3, 1.0) == pytest.approx(38.165, abs=5e-4)
    assert floor_Tn(3, 1.0) == 38


def test_Tn_continuity_near_two():
    # bracket tends to 3n - 2, still with one halving pass
    assert compute_Tn(3, 2 - 1e-12) == pytest.approx((3 * 3 - 2) * 2 + 1, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 200), st.floats(0.01, 1.99))
def test_Tn_matches_oracle_and_dominates(n, r):
    assert compute_Tn(n, r) == pytest.approx(tn_oracle(n, r), rel=1e-12)
    assert compute_Tn_star(n, r) < compute_Tn(n, r)


@pytest.mark.parametrize("n, r", [(2, 1.0), (3, 0.0), (3, 2.0), (3, -1.0)])
def test_bound_domain(n, r):
    with pytest.raises(ValueError):
        compute_Tn_star(n, r)
    with pytest.raises(ValueError):
        compute_Tn(n, r)


def test_tail_bound_examples():
    assert tau_tail_bound(1, 1, 0.5) == 1.0
    assert tau_tail_bound(2, 1, 0.5) == 0.5
    assert tau_tail_bound(10, 4, 0.3) == (1 - 0.3**4) ** 2
    assert tau_tail_bound(5, 2, 1.0) == 0.0


def test_mse_envelope_examples():
    assert mse_envelope(0, 3, 1.0, 1 / 64) == 12.0
    assert mse_envelope(39, 3, 1.0, 1 / 64) == pytest.approx(12 * (1 - (1 / 64) ** 38), rel=1e-15)
    assert mse_envelope(38, 3, 1.0, 1 / 64) == 12.0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 500), st.integers(1, 60), st.floats(1e-6, 1.0))
def test_tail_bound_is_monotone_probability(t, tstar, delta):
    b = tau_tail_bound(t, tstar, delta)
    assert 0.0 <= b <= 1.0
    assert tau_tail_bound(t + 1, tstar, delta) <= b


# --- two-cluster merge --------------------------------------------------------


def test_merge_single_pair():
    s = SystemState(np.array([0.0, 1.0]))
    prof = ConfidenceProfile([1.0, 0.3])
    res = merge_clusters(s, prof, (0,), (1,))
    assert res.steps_used == 3
    assert np.array_equal(res.state.opinions[:, 0], [0.875, 0.875])
    assert res.task.phases[0].shuttle_path[-1][0] == 0.75
    assert res.steps_used <= res.task.predicted_bound


def test_merge_two_on_one_phase():
    s = SystemState(np.array([0.0, 0.0, 1.0]))
    prof = ConfidenceProfile([1.0, 1.0, 0.3])
    res = merge_clusters(s, prof, (0, 1), (2,))
    first = res.task.phases[0]
    assert first.d_after == 0.875
    assert first.d_after < 1 - 0.3 / 4
    assert all(ph.satisfied for ph in res.task.phases)
    assert subset_diameter(res.state, (0, 1, 2)) == 0.0
    assert res.steps_used <= res.task.predicted_bound


@pytest.mark.parametrize("J, K", [(1, 1), (2, 3), (4, 2)])
def test_merge_close_clusters_is_one_clique(J, K):
    n = J + K
    x = np.r_[np.zeros(J), np.full(K, 0.2)]
    s = SystemState(x)
    res = merge_clusters(s, ConfidenceProfile([0.5] * n), tuple(range(J)), tuple(range(J, n)))
    assert res.steps_used == 1
    assert res.schedule[0] == EdgeSet.full(n)
    np.testing.assert_allclose(res.state.opinions[:, 0], x.mean(), rtol=1e-15)


def test_merge_rejects_unconnected():
    s = SystemState(np.array([0.0, 1.0]))
    with pytest.raises(ValueError, match="not connected"):
        MergeTask.create(s, ConfidenceProfile([0.5, 0.5]), (0,), (1,))


def test_merge_rejects_spread_cluster():
    s = SystemState(np.array([0.0, 0.1, 0.5]))
    with pytest.raises(ValueError, match="co-located"):
        MergeTask.create(s, ConfidenceProfile([1.0, 1.0, 1.0]), (0, 1), (2,))


def test_merge_detects_broken_neighbor_sets():
    s = SystemState(np.array([0.0, 1.0]))
    prof = ConfidenceProfile([1.0, 0.3])
    task = MergeTask.create(s, prof, (0,), (1,))
    task.next_edges(s, prof)
    # the next step is checked against a state the plan did not produce
    with pytest.raises(ScheduleError):
        task.next_edges(SystemState(np.array([0.0, 1.0 + 1e-3])), ConfidenceProfile([0.9, 0.3]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_merge_properties(seed):
    state, profile, alpha, beta = random_merge_instance(np.random.default_rng(seed))
    res = merge_clusters(state, profile, alpha, beta)
    task = res.task
    assert res.steps_used <= task.predicted_bound
    assert subset_diameter(res.state, task.agents) == 0.0
    assert all(ph.satisfied for ph in task.phases)
    assert max(task.halving_errors(), default=0.0) <= 1e-12
    # edges never leave the two clusters
    assert all(set(i for p in e.pairs() for i in p) <= set(task.agents) for e in res.schedule)
    # the reported schedule reproduces the merged state
    assert np.array_equal(replay(state, profile, res.schedule)[-1].opinions, res.state.opinions)


# --- greedy scheduler -----------------------------------------------------------


def test_algorithm1_absorbed_start():
    s = SystemState(np.array([0.0, 0.0, 1.0]))
    run = algorithm1_run(s, ConfidenceProfile([0.5, 0.5, 0.5]))
    assert run.terminal_time == 0 and run.schedule == []


def test_algorithm1_hand_trace():
    s = SystemState(np.array([0.0, 0.4, 1.0]))
    prof = ConfidenceProfile([1.5, 0.5, 0.5])
    run = algorithm1_run(s, prof)
    assert run.tasks[0].alpha == (0,) and run.tasks[0].beta == (1,)
    assert run.generated == [((0, 1), 1), ((0, 1, 2), 6)]
    assert run.terminal_time == 6 <= compute_Tn_star(3, 0.5)
    assert np.array_equal(run.final_state.opinions[:, 0], [0.5, 0.5, 0.5])


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 8), st.integers(0, 2**32 - 1))
def test_algorithm1_all_close_gives_consensus(n, seed):
    rng = np.random.default_rng(seed)
    r = np.sort(rng.uniform(0.3, 1.5, n))[::-1]
    x = rng.uniform(0, r[-1], n)
    prof = ConfidenceProfile(r)
    run = algorithm1_run(SystemState(x), prof)
    assert is_e1(run.final_state, prof)
    assert subset_diameter(run.final_state, range(n)) == 0.0


def _coarsens(before, after):
    return all(any(set(c) <= set(c2) for c2 in after) for c in before)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_algorithm1_properties(seed):
    state, profile = random_cibc_instance(np.random.default_rng(seed))
    run = algorithm1_run(state, profile)
    assert run.terminal_time <= compute_Tn_star(state.n, profile.r_min)
    assert is_e1(run.final_state, profile)
    assert all(_coarsens(a, b) for a, b in zip(run.partitions, run.partitions[1:]))
    for per_task in run.task_edges:
        for (_, e1), (_, e2) in itertools.combinations(per_task, 2):
            assert not np.any(e1.adj & e2.adj)
    assert np.array_equal(replay(state, profile, run.schedule)[-1].opinions, run.final_state.opinions)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_subsystem_consistency(seed):
    state, profile = random_cibc_instance(np.random.default_rng(seed))
    run = algorithm1_run(state, profile)
    for agents, t in run.generated:
        assert subsystem_terminal_time(state, profile, agents) == t


def test_algorithm1_deterministic():
    rng = make_rng(5, 0)
    state, profile = random_cibc_instance(rng)
    a, b = algorithm1_run(state, profile), algorithm1_run(state, profile)
    assert [e.indices() for e in a.schedule] == [e.indices() for e in b.schedule]
    assert a.final_state.opinions.tobytes() == b.final_state.opinions.tobytes()


def test_safety_cap_is_ten_Tn():
    s = SystemState(np.array([0.0, 0.4, 1.0]))
    prof = ConfidenceProfile([1.5, 0.5, 0.5])
    assert control._safety_cap(s, prof) == 10 * math.ceil(compute_Tn(3, 0.5))
