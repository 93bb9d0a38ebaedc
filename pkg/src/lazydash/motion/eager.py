"""Eager baseline: precompute the whole motion hypergraph, then search it directly.

Every element roadmap is built and fully validated upfront, and every task
hyperarc gets its transition configurations sampled and connected before
any query runs. The combined query is a greedy depth-first hyperpath search
whose nodes carry configurations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..geometry import collides, sample_in_lens
from ..task_conflict import (Anchor, AnchoredSchedule, FrontierGeometry, transition_shapes)
from ..task_query import (ConstraintSet, UnvalidatedSchedule, apply_arc, expandable_arcs, heuristic_cost,
                          vertex_cost_to_go, TaskExtendedNode)
from ..task_space import HANDOVER, HOLDING, OBJECT_AT, PICK, PLACE, ROBOT_FREE, TaskSpace
from .query import (APPROACH, CARRY, RETREAT, MotionStore, MoveArc, OptimisticSchedule, TransitionArc,
                    anchor_clear, element_key, handover_cut, plan_move, region_shapes, timed, truncated_arm)


@dataclass
class EagerModel:
    transitions: dict[int, list[tuple]]  # task arc -> collision-valid transition points

    def n_transitions(self) -> int:
        return sum(len(v) for v in self.transitions.values())


def build_eager_motion_hypergraph(ts: TaskSpace, store: MotionStore, rng: np.random.Generator) -> EagerModel:
    if not store.eager:
        raise ValueError("eager construction needs a store created with eager=True")
    world = ts.world
    for r in world.robots:
        store.roadmap(element_key(r.id))
    for j, hs in ts.holders().items():
        for i in hs:
            store.roadmap(element_key(i, j))
    out: dict[int, list[tuple]] = {}
    for aid in ts.graph.arcs():
        arc = ts.arc(aid)
        if arc.action not in (PICK, PLACE, HANDOVER):
            continue
        j = arc.obj
        r_obj = world.objects[j].radius
        kept = []
        if arc.action in (PICK, PLACE):
            i = arc.robots[0]
            p = ts.poses.point(j, arc.poses[0])
            if anchor_clear(world, world.robots[i], p, r_obj if arc.action == PLACE else 0.0):
                kept.append(p)
            keys = [element_key(i), element_key(i, j)]
        else:
            g, rcv = arc.robots
            for _ in range(store.params.n_t):
                h = sample_in_lens(world.robots[g], world.robots[rcv], rng)
                if h is None:
                    continue
                if anchor_clear(world, world.robots[g], h, r_obj) and anchor_clear(world, world.robots[rcv], h, 0.0):
                    kept.append(h)
            keys = [element_key(g, j), element_key(g), element_key(rcv), element_key(rcv, j)]
        for p in kept:
            for key in keys:
                store.roadmap(key).insert(p)
            store.add_transition(aid, p)
        out[aid] = kept
    return EagerModel(out)


@dataclass
class _Node:
    frontier: frozenset
    hold: tuple                   # sorted ((robot, (x, y)), ...) holding configurations
    history: tuple = ()
    ctg: float = 0.0
    records: tuple = ()           # per arc: (aid, point, moves)


@dataclass
class BaselineResult:
    schedule: Optional[OptimisticSchedule]
    status: str                   # ok | exhausted | budget
    expansions: int = 0
    path_queries: int = 0


def _geometry(ts: TaskSpace, node: _Node) -> FrontierGeometry:
    objects, holding, vertex_of = {}, {}, {}
    hold = dict(node.hold)
    for vid in node.frontier:
        v = ts.vertex(vid)
        for ent in v.covers():
            vertex_of[ent] = vid
        if v.kind == OBJECT_AT:
            objects[v.obj] = ts.poses.point(v.obj, v.pose)
        elif v.kind == HOLDING:
            holding[v.robot] = (v.obj, hold[v.robot])
    return FrontierGeometry(objects, holding, vertex_of)


def combined_query_baseline(ts: TaskSpace, store: MotionStore, model: EagerModel,
                            constraints: Optional[ConstraintSet] = None, cm: list = (),
                            rng: Optional[np.random.Generator] = None, budget: int = 20_000) -> BaselineResult:
    """Greedy DFS over (task arc, transition config) pairs with motion checks at every expansion."""
    constraints = constraints if constraints is not None else ConstraintSet()
    world = ts.world
    g = ts.graph
    ctg = vertex_cost_to_go(ts)
    hist_pres = constraints.history_pres()
    rng = rng if rng is not None else np.random.default_rng(0)
    counters = {"expansions": 0, "paths": 0}

    def moves_for(node: _Node, aid: int, p, geo: FrontierGeometry, after: FrontierGeometry):
        arc = ts.arc(aid)
        j = arc.obj
        hold = dict(node.hold)
        sig = arc.signature
        out = []

        def go(key, a, b, statics, role, robot, carry):
            counters["paths"] += 1
            res = plan_move(store, key, a, b, statics + region_shapes(cm, sig, a, b), rng, repair=False)
            if not res.ok:
                return False
            out.append((role, robot, carry, key, res.path, statics))
            return True

        if arc.action in (PICK, PLACE):
            i = arc.robots[0]
            base = world.robots[i].base
            st = [s for _, s, _ in geo.statics(world, {i}, {j})]
            if arc.action == PICK:
                return out if go(element_key(i), base, p, st, APPROACH, i, -1) else None
            if not go(element_key(i, j), hold[i], p, st, CARRY, i, j):
                return None
            st2 = [s for _, s, _ in after.statics(world, {i}, {j})]
            return out if go(element_key(i), p, base, st2, RETREAT, i, -1) else None
        gv, rcv = arc.robots
        st = [s for _, s, _ in geo.statics(world, {gv, rcv}, {j})]
        if not go(element_key(gv, j), hold[gv], p, st, CARRY, gv, j):
            return None
        if not go(element_key(rcv), world.robots[rcv].base, p, st, APPROACH, rcv, -1):
            return None
        st2 = [s for _, s, _ in after.statics(world, {gv, rcv}, {j})]
        arm = truncated_arm(world.robots[rcv].base, p, world.robots[rcv].r_arm, handover_cut(world, j))
        if arm is not None:
            st2 = st2 + [arm]
        return out if go(element_key(gv), p, world.robots[gv].base, st2, RETREAT, gv, -1) else None

    def after_geo(geo: FrontierGeometry, arc, p) -> FrontierGeometry:
        objects = dict(geo.objects)
        holding = dict(geo.holding)
        if arc.action == PICK:
            objects.pop(arc.obj, None)
            holding[arc.robots[0]] = (arc.obj, p)
        elif arc.action == PLACE:
            holding.pop(arc.robots[0], None)
            objects[arc.obj] = p
        else:
            holding.pop(arc.robots[0], None)
            holding[arc.robots[1]] = (arc.obj, p)
        return FrontierGeometry(objects, holding, geo.vertex_of)

    def candidates(node: _Node):
        tnode = TaskExtendedNode(node.frontier, node.history, frozenset(), 0.0, node.ctg)
        if hist_pres:
            seen = set()
            for a in node.history:
                seen |= g.head(a) & hist_pres
            tnode.seen = frozenset(seen)
        cands = []
        for a in expandable_arcs(tnode, ts, constraints):
            after = node.ctg - sum(ctg[v] for v in g.tail(a)) + sum(ctg[v] for v in g.head(a))
            cands.append((heuristic_cost(ts.arc(a), ts) + after, ts.arc(a).sort_key(), a, after))
        cands.sort(key=lambda c: (round(c[0], 12), c[1]))
        hold = dict(node.hold)
        for _, _, a, after in cands:
            arc = ts.arc(a)
            if arc.action not in (PICK, PLACE, HANDOVER):
                yield a, None, after
                continue
            pts = list(model.transitions.get(a, ()))
            if arc.action == HANDOVER:
                cur = np.asarray(hold[arc.robots[0]])
                rb = np.asarray(world.robots[arc.robots[1]].base)
                pts.sort(key=lambda q: (round(float(np.linalg.norm(cur - q) + np.linalg.norm(rb - q)), 12), q))
            for p in pts:
                yield a, p, after

    def child_of(node: _Node, a: int, p, after_ctg: float) -> Optional[_Node]:
        arc = ts.arc(a)
        F = apply_arc(ts, node.frontier, a)
        hold = dict(node.hold)
        if p is not None:
            if arc.action == PICK:
                hold[arc.robots[0]] = p
            elif arc.action == PLACE:
                hold.pop(arc.robots[0], None)
            else:
                hold.pop(arc.robots[0], None)
                hold[arc.robots[1]] = p
        hold_key = tuple(sorted(hold.items()))
        if (F, hold_key) in visited:
            return None
        moves = ()
        if p is not None:
            geo = _geometry(ts, node)
            anchor = Anchor(-1, a, arc.action, arc.robots, arc.obj, p)
            for ent_b, sh_b, _ in geo.statics(world, set(arc.robots), {arc.obj}):
                for _, sh_m in transition_shapes(ts, anchor):
                    if collides(sh_m, sh_b):
                        return None
            ms = moves_for(node, a, p, geo, after_geo(geo, arc, p))
            if ms is None:
                return None
            moves = tuple(ms)
        return _Node(F, hold_key, node.history + (a,), after_ctg, node.records + ((a, p, moves),))

    root = _Node(frozenset([ts.source]), ())
    visited = {(root.frontier, root.hold)}
    stack = [(root, candidates(root))]
    while stack:
        node, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            continue
        a, p, after_ctg = nxt
        counters["expansions"] += 1
        if counters["expansions"] > budget:
            return BaselineResult(None, "budget", counters["expansions"], counters["paths"])
        child = child_of(node, a, p, after_ctg)
        if child is None:
            continue
        visited.add((child.frontier, child.hold))
        if ts.sink in child.frontier:
            return BaselineResult(_assemble(ts, child), "ok", counters["expansions"], counters["paths"])
        stack.append((child, candidates(child)))
    return BaselineResult(None, "exhausted", counters["expansions"], counters["paths"])


def _assemble(ts: TaskSpace, node: _Node) -> OptimisticSchedule:
    world = ts.world
    arcs = [rec[0] for rec in node.records]
    frontiers = []
    f = frozenset([ts.source])
    for a in arcs:
        frontiers.append(f)
        f = apply_arc(ts, f, a)
    anchors = {}
    moves: list[MoveArc] = []
    transitions = {}
    pre, post = {}, {}
    for idx, (a, p, ms) in enumerate(node.records):
        if p is None:
            continue
        arc = ts.arc(a)
        anchors[idx] = Anchor(idx, a, arc.action, arc.robots, arc.obj, tuple(p),
                              arc.poses[0] if arc.poses else -1)
        pre[idx], post[idx] = [], []
        for role, robot, carry, key, path, statics in ms:
            m = MoveArc(len(moves), idx, role, robot, carry, key, path, timed(path, world.robots[robot].v),
                        statics, arc.signature, a)
            moves.append(m)
            (post if role == RETREAT else pre)[idx].append(m.id)
        transitions[idx] = TransitionArc(idx, a, arc.action, arc.robots, arc.obj, tuple(p), arc.signature)
    anchored = AnchoredSchedule(UnvalidatedSchedule(arcs, frontiers), anchors)
    return OptimisticSchedule(anchored, moves, transitions, pre, post)
