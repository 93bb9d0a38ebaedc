import numpy as np
import pytest

from lazydash.geometry import collides, disc
from lazydash.harness import generate_scenario
from lazydash.task_conflict import (OBJECT_OBJECT, ROBOT_OBJECT, ExpandTaskSpace, NewConstraint, ResampledPose,
                                    assign_transition_configs, creates_cycle, detect_task_conflicts,
                                    replay_geometry, resolve_task_conflict, sample_handover_point)
from lazydash.task_query import (FRONTIER, ConstraintSet, TaskConstraint, UnvalidatedSchedule, apply_arc,
                                 query_task_plan)
from lazydash.task_space import HANDOVER, PICK, PLACE, build_task_hypergraph
from conftest import make_world, one_robot_world


def arc_by_sig(ts, sig):
    for a in ts.graph.arcs():
        if ts.arc(a).signature == sig:
            return a
    raise KeyError(sig)


def schedule_of(ts, sigs):
    arcs = [ts.source_arc] + [arc_by_sig(ts, s) for s in sigs]
    fronts, f = [], frozenset([ts.source])
    for a in arcs:
        fronts.append(f)
        f = apply_arc(ts, f, a)
    return UnvalidatedSchedule(arcs, fronts)


def anchored_plan(world, seed=0):
    ts = build_task_hypergraph(world)
    res = query_task_plan(ts)
    return ts, assign_transition_configs(ts, res.schedule, np.random.default_rng(seed))


def test_pick_anchor_is_object_center():
    ts, an = anchored_plan(one_robot_world())
    picks = [a for a in an.anchors.values() if a.action == PICK]
    assert picks[0].point == ts.world.objects[0].start


def test_handover_point_in_both_reach_discs():
    w = make_world([((0, 0), 4.0, 0.1, 1.0), ((6, 0), 4.0, 0.1, 1.0)], [(0.1, (-1, 0), (7, 0))],
                   [(-1.5, -0.5, -0.5, 0.5), (6.5, -0.5, 7.5, 0.5)], bounds=(-3, -5, 9, 5))
    rng = np.random.default_rng(0)
    for _ in range(200):
        h, ok = sample_handover_point(w, 0, 1, 0, rng)
        assert ok
        assert np.hypot(*h) <= 4.0 + 1e-9 and np.hypot(h[0] - 6, h[1]) <= 4.0 + 1e-9


def test_anchors_are_deterministic():
    w = generate_scenario("sorting", {"robots": 3, "objects": 3}, 4).world
    _, a = anchored_plan(w, 11)
    _, b = anchored_plan(w, 11)
    assert a.to_dict() == b.to_dict()


def test_conflict_free_single_robot():
    ts, an = anchored_plan(one_robot_world())
    assert detect_task_conflicts(ts, an) == []


def test_overlapping_goals_give_object_object_conflict():
    w = make_world([((0, 0), 0.85, 0.04, 1.0)],
                   [(0.05, (0.5, 0.2), (-0.5, 0.0)), (0.05, (0.5, -0.2), (-0.5, 0.08))],
                   [(0.4, -0.45, 0.6, 0.45), (-0.6, -0.45, -0.4, 0.45)], bounds=(-1, -1, 1, 1))
    ts = build_task_hypergraph(w)
    sched = schedule_of(ts, ["Pick(R0,O0@p0,s0)", "Place(R0,O0->p1,s0)", "Pick(R0,O1@p0,s0)",
                             "Place(R0,O1->p1,s0)"])
    an = assign_transition_configs(ts, sched, np.random.default_rng(0))
    found = detect_task_conflicts(ts, an)
    oo = [c for c in found if c.kind == OBJECT_OBJECT]
    assert oo and oo[0].index == 4
    assert oo[0].moving == ("object", 1) and oo[0].blocker == ("object", 0)
    assert np.hypot(0.0, 0.08) < 0.1   # the hand oracle: centre distance below twice the radius
    for c in found:
        assert collides(c.moving_shape, c.blocker_shape)


def _shelf_world():
    # base, front slot and rear slot on one ray; the front object already sits at its goal
    return make_world([((0, 0), 0.85, 0.04, 1.0)],
                      [(0.05, (0.3, 0.0), (0.3, 0.0)), (0.05, (-0.5, 0.0), (0.6, 0.0))],
                      [(0.2, -0.1, 0.7, 0.1), (-0.6, -0.2, -0.4, 0.2)], bounds=(-1, -1, 1, 1))


def test_rear_grasp_through_front_object_is_robot_object_conflict():
    ts = build_task_hypergraph(_shelf_world())
    sched = schedule_of(ts, ["Pick(R0,O1@p0,s0)", "Place(R0,O1->p1,s0)"])
    an = assign_transition_configs(ts, sched, np.random.default_rng(0))
    found = detect_task_conflicts(ts, an)
    ro = [c for c in found if c.kind == ROBOT_OBJECT]
    assert ro and ro[0].index == 2 and ro[0].blocker == ("object", 0)
    assert collides(ro[0].moving_shape, disc((0.3, 0.0), 0.05))


def test_arm_blocked_resolves_to_frontier_constraint():
    ts = build_task_hypergraph(_shelf_world())
    sched = schedule_of(ts, ["Pick(R0,O1@p0,s0)", "Place(R0,O1->p1,s0)"])
    an = assign_transition_configs(ts, sched, np.random.default_rng(0))
    c = [c for c in detect_task_conflicts(ts, an) if c.kind == ROBOT_OBJECT][0]
    res = resolve_task_conflict(ts, c, an, ConstraintSet(), np.random.default_rng(0))
    assert isinstance(res, NewConstraint)
    k = res.constraint
    assert k.kind == FRONTIER
    assert k.v_pre == ts.vid(ts.object_at(0, 0))
    assert k.v_post == ts.vid(ts.object_at(1, 1))


def test_colliding_moveouts_resampled_apart():
    w = make_world([((0, 0), 0.85, 0.04, 1.0)],
                   [(0.05, (0.5, 0.2), (-0.5, 0.2)), (0.05, (0.5, -0.2), (-0.5, -0.2))],
                   [(0.4, -0.45, 0.6, 0.45), (-0.6, -0.45, -0.4, 0.45), (-0.2, 0.5, 0.2, 0.7)],
                   bounds=(-1, -1, 1, 1))
    ts = build_task_hypergraph(w)
    p0 = ts.poses.register(0, (0.0, 0.6))
    p1 = ts.poses.register(1, (0.06, 0.6))
    ts.sync()
    sched = schedule_of(ts, [f"Pick(R0,O0@p0,s0)", f"Place(R0,O0->p{p0},s0)", "Pick(R0,O1@p0,s0)",
                             f"Place(R0,O1->p{p1},s0)"])
    an = assign_transition_configs(ts, sched, np.random.default_rng(0))
    c = [c for c in detect_task_conflicts(ts, an) if c.kind == OBJECT_OBJECT][0]
    res = resolve_task_conflict(ts, c, an, ConstraintSet(), np.random.default_rng(3))
    assert isinstance(res, ResampledPose)
    assert res.obj == 1 and res.pose == p1   # the later placement moves first
    assert not collides(disc(res.point, 0.05), disc((0.0, 0.6), 0.05))


def test_swap_mutual_blocking_triggers_expansion():
    sc = generate_scenario("swap", {}, 0)
    ts = build_task_hypergraph(sc.world)
    res = query_task_plan(ts)
    an = assign_transition_configs(ts, res.schedule, np.random.default_rng(0))
    C = ConstraintSet()
    kinds = []
    for _ in range(6):
        found = detect_task_conflicts(ts, an)
        if not found:
            break
        r = resolve_task_conflict(ts, found[0], an, C, np.random.default_rng(0))
        kinds.append(type(r).__name__)
        if isinstance(r, ExpandTaskSpace):
            assert creates_cycle(ts, C, r.constraint)
            break
        C.add(r.constraint)
        q = query_task_plan(ts, C)
        if not q.ok:
            break
        an = assign_transition_configs(ts, q.schedule, np.random.default_rng(0))
    assert kinds == ["NewConstraint", "ExpandTaskSpace"]


def test_cycle_detector_on_reversed_pair():
    ts = build_task_hypergraph(_shelf_world())
    a = TaskConstraint(FRONTIER, ts.vid(ts.object_at(0, 0)), ts.vid(ts.object_at(1, 1)))
    b = TaskConstraint(FRONTIER, ts.vid(ts.object_at(1, 0)), ts.vid(ts.holding(0, 0)))
    assert not creates_cycle(ts, ConstraintSet(), a)
    assert creates_cycle(ts, ConstraintSet([b]), a)


def test_replay_geometry_matches_frontier_snapshots():
    w = generate_scenario("sorting", {"robots": 3, "objects": 3}, 1).world
    ts, an = anchored_plan(w)
    geos = replay_geometry(ts, an)
    for idx in range(1, len(an.schedule.arcs)):
        snap = an.schedule.frontiers[idx]
        assert set(geos[idx].vertex_of.values()) == set(snap)


@pytest.mark.parametrize("seed", range(5))
def test_reported_conflicts_are_reverifiable(seed):
    w = generate_scenario("shelfwall", {}, seed).world
    ts, an = anchored_plan(w, seed)
    for c in detect_task_conflicts(ts, an):
        assert collides(c.moving_shape, c.blocker_shape)
