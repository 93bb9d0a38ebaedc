from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from lazydash.harness import generate_scenario
from lazydash.planner import register_staging
from lazydash.task_query import (FRONTIER, HISTORY, ConstraintSet, TaskConstraint, TaskExtendedNode, apply_arc,
                                 constraint_blocks, expandable_arcs, frontier_partition_ok, heuristic_cost,
                                 query_task_plan, schedule_is_sound)
from lazydash.task_space import HANDOVER, PICK, SINK_ARC, TaskArc, build_task_hypergraph
from conftest import make_world, one_robot_world, two_robot_world


def sigs(ts, arcs):
    return [ts.arc(a).signature for a in arcs]


def bfs_plans(ts, constraints=None, max_len=6):
    """All shortest arc sequences from source to sink, by exhaustive search."""
    constraints = constraints or ConstraintSet()
    start = (frozenset([ts.source]), frozenset(), ())
    q = deque([start])
    found = []
    while q:
        F, seen, hist = q.popleft()
        if found and len(hist) >= len(found[0]):
            continue
        if len(hist) >= max_len:
            continue
        node = TaskExtendedNode(F, hist, seen)
        for a in expandable_arcs(node, ts, constraints):
            F2 = apply_arc(ts, F, a)
            seen2 = seen | ts.graph.head(a)
            if ts.sink in F2:
                found.append(hist + (a,))
            else:
                q.append((F2, seen2, hist + (a,)))
    return found


def test_one_robot_plan_is_unique_shortest():
    ts = build_task_hypergraph(one_robot_world())
    res = query_task_plan(ts)
    assert res.ok
    assert sigs(ts, res.schedule.arcs) == ["SourceArc", "Pick(R0,O0@p0,s0)", "Place(R0,O0->p1,s0)", "SinkArc"]
    oracle = bfs_plans(ts)
    assert len(oracle) == 1 and list(oracle[0]) == res.schedule.arcs


def test_history_constraint_makes_query_exhausted():
    ts = build_task_hypergraph(one_robot_world())
    c = TaskConstraint(HISTORY, ts.vid(ts.object_at(0, 0)), ts.vid(ts.holding(0, 0)))
    C = ConstraintSet([c])
    assert query_task_plan(ts, C).status == "exhausted"
    assert bfs_plans(ts, C) == []


def test_identity_task():
    ts = build_task_hypergraph(one_robot_world(goal=(0.5, 0.0)))
    res = query_task_plan(ts)
    assert sigs(ts, res.schedule.arcs) == ["SourceArc", "SinkArc"]


def test_expandable_in_initial_frontier():
    ts = build_task_hypergraph(one_robot_world())
    F = apply_arc(ts, frozenset([ts.source]), ts.source_arc)
    got = expandable_arcs(TaskExtendedNode(F), ts, ConstraintSet())
    assert sigs(ts, got) == ["Pick(R0,O0@p0,s0)"]


def test_partial_handover_not_expandable():
    w = make_world([((-0.6, 0.0), 0.8, 0.04, 1.0), ((0.6, 0.0), 0.8, 0.04, 1.0)],
                   [(0.05, (-1.1, 0.1), (1.1, 0.1)), (0.05, (1.1, -0.1), (-1.1, -0.1))],
                   [(-1.2, -0.2, -1.0, 0.2), (1.0, -0.2, 1.2, 0.2)], bounds=(-1.5, -1.5, 1.5, 1.5))
    ts = build_task_hypergraph(w)
    F = frozenset({ts.vid(ts.holding(0, 0)), ts.vid(ts.holding(1, 1))})
    got = [ts.arc(a) for a in expandable_arcs(TaskExtendedNode(F), ts, ConstraintSet())]
    assert all(a.action != HANDOVER for a in got)


def test_frontier_constraint_excludes_arc():
    ts = build_task_hypergraph(one_robot_world())
    F = apply_arc(ts, frozenset([ts.source]), ts.source_arc)
    c = TaskConstraint(FRONTIER, ts.vid(ts.robot_free(0)), ts.vid(ts.holding(0, 0)))
    assert expandable_arcs(TaskExtendedNode(F), ts, ConstraintSet([c])) == []


def test_constraint_blocks_definitions():
    assert not constraint_blocks({1, 2}, {1, 2}, {3}, ConstraintSet())
    C = ConstraintSet([TaskConstraint(FRONTIER, 1, 3)])
    assert constraint_blocks({1, 2}, set(), {3}, C)
    assert not constraint_blocks({2}, {1}, {3}, C)
    H = ConstraintSet([TaskConstraint(HISTORY, 1, 3)])
    assert constraint_blocks({2}, {1}, {3}, H)


def test_heuristic_examples():
    w = make_world([((0, 0), 6.0, 0.04, 1.0), ((6, 0), 6.0, 0.04, 1.0)], [(0.05, (3, 4), (3, 4))],
                   [(2.5, 3.5, 3.5, 4.5)], bounds=(-1, -1, 7, 7))
    ts = build_task_hypergraph(w)
    assert heuristic_cost(TaskArc(PICK, (0,), 0, (0,)), ts) == pytest.approx(5.0)
    assert heuristic_cost(TaskArc(HANDOVER, (0, 1), 0), ts) == pytest.approx(6.0)
    assert heuristic_cost(TaskArc(SINK_ARC), ts) == 0.0


@pytest.mark.parametrize("family,params,seed", [("sorting", {"robots": 2, "objects": 2}, 0),
                                                ("sorting", {"robots": 4, "objects": 6}, 1),
                                                ("wall", {}, 2), ("shelfwall", {}, 0), ("lab", {}, 0)])
def test_unconstrained_query_succeeds_and_replays(family, params, seed):
    sc = generate_scenario(family, params, seed)
    ts = build_task_hypergraph(sc.world)
    register_staging(ts, sc.staging)
    res = query_task_plan(ts)
    assert res.ok
    assert schedule_is_sound(ts, res.schedule)
    for f in res.schedule.frontiers[1:]:
        assert frontier_partition_ok(ts, f)


def test_sorting_plans_hand_over_each_object():
    ts = build_task_hypergraph(generate_scenario("sorting", {"robots": 2, "objects": 2}, 0).world)
    arcs = [ts.arc(a) for a in query_task_plan(ts).schedule.arcs]
    for o in ts.world.objects:
        assert any(a.action == HANDOVER and a.obj == o.id for a in arcs)


def test_query_is_deterministic():
    ts1 = build_task_hypergraph(generate_scenario("sorting", {"robots": 3, "objects": 4}, 2).world)
    ts2 = build_task_hypergraph(generate_scenario("sorting", {"robots": 3, "objects": 4}, 2).world)
    a, b = query_task_plan(ts1), query_task_plan(ts2)
    assert a.schedule.to_dict(ts1) == b.schedule.to_dict(ts2)


def test_budget_is_distinguished_from_exhaustion():
    ts = build_task_hypergraph(generate_scenario("sorting", {"robots": 3, "objects": 3}, 0).world)
    assert query_task_plan(ts, budget=2).status == "budget"


def test_unbounded_search_also_finds_plans():
    ts = build_task_hypergraph(generate_scenario("sorting", {"robots": 3, "objects": 3}, 0).world)
    res = query_task_plan(ts, bound=float("inf"))
    assert res.ok and schedule_is_sound(ts, res.schedule)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(1, 4), st.integers(0, 1000), st.data())
def test_constraints_never_enlarge_reachable_plans(robots, objects, seed, data):
    """Adding constraints only removes options: a plan found under C is admissible with no constraints."""
    ts = build_task_hypergraph(generate_scenario("sorting", {"robots": robots, "objects": objects}, seed).world)
    verts = list(ts.graph.vertices())
    pre = data.draw(st.sampled_from(verts))
    post = data.draw(st.sampled_from([v for v in verts if v != pre]))
    kind = data.draw(st.sampled_from([FRONTIER, HISTORY]))
    C = ConstraintSet([TaskConstraint(kind, pre, post)])
    res = query_task_plan(ts, C, budget=20_000)
    if res.ok:
        assert schedule_is_sound(ts, res.schedule)
        F, seen = frozenset([ts.source]), frozenset()
        for a in res.schedule.arcs:
            assert not constraint_blocks(F, seen, ts.graph.head(a), C)
            seen = seen | (ts.graph.head(a) & C.history_pres())
            F = apply_arc(ts, F, a)
    free = query_task_plan(ts)
    assert free.ok


def test_frontier_partition_property_replay_random_scenarios():
    total = ok = 0
    for seed in range(20):
        for fam, params in (("sorting", {"robots": 3, "objects": 3}), ("wall", {}), ("stocking", {}),
                            ("shelfwall", {}), ("swap", {})):
            ts = build_task_hypergraph(generate_scenario(fam, params, seed).world)
            res = query_task_plan(ts, budget=20_000)
            if not res.ok:
                continue
            total += 1
            ok += schedule_is_sound(ts, res.schedule) and all(
                frontier_partition_ok(ts, f) for f in res.schedule.frontiers[1:])
    assert total > 0 and ok == total
