"""Greedy depth-first query over the task space hypergraph.

A search node holds a frontier (one task vertex per movable entity) and the
transition history that produced it. Hyperarcs whose tail is only partially
present in the frontier stay partial and are not expanded.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .task_space import (HANDOVER, HOLDING, OBJECT_AT, PICK, PLACE, SINK_ARC, SOURCE_ARC,
                         TaskArc, TaskSpace)

FRONTIER = "Frontier"
HISTORY = "History"


@dataclass(frozen=True)
class TaskConstraint:
    kind: str   # Frontier | History
    v_pre: int
    v_post: int
    origin: str = ""

    def __post_init__(self):
        if self.v_pre == self.v_post:
            raise ValueError("constraint endpoints must differ")

    def key(self) -> tuple:
        return (self.kind, self.v_pre, self.v_post)

    def to_dict(self, ts: Optional[TaskSpace] = None) -> dict:
        d = {"kind": self.kind, "v_pre": self.v_pre, "v_post": self.v_post, "origin": self.origin}
        if ts is not None:
            d["pre"] = ts.vertex(self.v_pre).label()
            d["post"] = ts.vertex(self.v_post).label()
        return d


class ConstraintSet:
    """Task constraints C_T = C_h ∪ C_f indexed by their post vertex."""

    def __init__(self, items: Iterable[TaskConstraint] = ()):
        self.items: list[TaskConstraint] = []
        self._keys: set = set()
        self.by_post: dict[int, list[TaskConstraint]] = {}
        for c in items:
            self.add(c)

    def add(self, c: TaskConstraint) -> bool:
        if c.key() in self._keys:
            return False
        self._keys.add(c.key())
        self.items.append(c)
        self.by_post.setdefault(c.v_post, []).append(c)
        return True

    def __contains__(self, c: TaskConstraint) -> bool:
        return c.key() in self._keys

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def history_pres(self) -> frozenset[int]:
        return frozenset(c.v_pre for c in self.items if c.kind == HISTORY)

    def copy(self) -> "ConstraintSet":
        return ConstraintSet(self.items)


def constraint_blocks(frontier, history_seen, head, constraints: ConstraintSet) -> bool:
    """True iff some constraint forbids producing a vertex of ``head``.

    ``history_seen`` is the set of vertices that appeared in any head along
    the history (the source head included).
    """
    for v in head:
        for c in constraints.by_post.get(v, ()):
            if c.kind == FRONTIER and c.v_pre in frontier:
                return True
            if c.kind == HISTORY and c.v_pre in history_seen:
                return True
    return False


def heuristic_cost(arc: TaskArc, ts: TaskSpace) -> float:
    w = ts.world
    if arc.action in (PICK, PLACE):
        b = w.robots[arc.robots[0]].base
        p = ts.poses.point(arc.obj, arc.poses[0])
        return float(np.hypot(p[0] - b[0], p[1] - b[1]))
    if arc.action == HANDOVER:
        a = w.robots[arc.robots[0]].base
        b = w.robots[arc.robots[1]].base
        return float(np.hypot(a[0] - b[0], a[1] - b[1]))
    return 0.0


def _object_targets(ts: TaskSpace) -> dict[int, tuple]:
    out = {}
    for o in ts.world.objects:
        via = None
        if o.via is not None:
            s = ts.world.surface(o.via)
            via = ((s.xmin + s.xmax) / 2, (s.ymin + s.ymax) / 2)
        out[o.id] = (o.goal, via)
    return out


def vertex_cost_to_go(ts: TaskSpace) -> dict[int, float]:
    """Per-vertex straight-line distance of its object to the goal (0 for non-object vertices)."""
    targets = _object_targets(ts)
    out = {}
    for vid in ts.graph.vertices():
        v = ts.vertex(vid)
        if v.kind not in (OBJECT_AT, HOLDING):
            out[vid] = 0.0
            continue
        goal, via = targets[v.obj]
        if v.kind == OBJECT_AT and v.pose == ts.poses.canonical(v.obj, 1) and v.stage == ts.final_stage(v.obj):
            out[vid] = 0.0
            continue
        loc = ts.location(vid)
        if via is not None and v.stage == 0:
            d = np.hypot(loc[0] - via[0], loc[1] - via[1]) + np.hypot(via[0] - goal[0], via[1] - goal[1])
        else:
            d = np.hypot(loc[0] - goal[0], loc[1] - goal[1])
        out[vid] = float(d)
    return out


@dataclass
class TaskExtendedNode:
    frontier: frozenset
    history: tuple = ()
    seen: frozenset = frozenset()
    cost_so_far: float = 0.0
    ctg: float = 0.0


@dataclass
class UnvalidatedSchedule:
    arcs: list[int]
    frontiers: list[frozenset]  # frontier snapshot before each arc

    def __len__(self):
        return len(self.arcs)

    def to_dict(self, ts: TaskSpace) -> dict:
        return {"arcs": [ts.arc(a).to_dict() | {"id": a} for a in self.arcs],
                "frontiers": [sorted(f) for f in self.frontiers]}


@dataclass
class TaskQueryResult:
    schedule: Optional[UnvalidatedSchedule]
    status: str  # ok | exhausted | budget
    expansions: int = 0
    backtracks: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def apply_arc(ts: TaskSpace, frontier: frozenset, aid: int) -> frozenset:
    g = ts.graph
    return (frontier - g.tail(aid)) | g.head(aid)


def expandable_arcs(node: TaskExtendedNode, ts: TaskSpace, constraints: ConstraintSet) -> list[int]:
    """Arcs with the full tail in the frontier that no constraint blocks."""
    g = ts.graph
    F = node.frontier
    out = []
    checked = set()
    for v in sorted(F):
        for a in g.forward_list(v):
            if a in checked:
                continue
            checked.add(a)
            if g.tail(a) <= F and not constraint_blocks(F, node.seen, g.head(a), constraints):
                out.append(a)
    return out


def partial_arcs(node: TaskExtendedNode, ts: TaskSpace) -> list[int]:
    g = ts.graph
    F = node.frontier
    out = set()
    for v in F:
        for a in g.forward_list(v):
            if not g.tail(a) <= F:
                out.add(a)
    return sorted(out)


def frontier_partition_ok(ts: TaskSpace, frontier: Iterable[int]) -> bool:
    """Every robot and object is covered by exactly one frontier vertex."""
    cover: dict = {}
    for vid in frontier:
        for ent in ts.vertex(vid).covers():
            if ent in cover:
                return False
            cover[ent] = vid
    want = {("r", r.id) for r in ts.world.robots} | {("o", o.id) for o in ts.world.objects}
    return set(cover) == want


def query_task_plan(ts: TaskSpace, constraints: Optional[ConstraintSet] = None,
                    budget: int = 100_000, bound: Optional[float] = None, growth: float = 1.5) -> TaskQueryResult:
    """Depth-first greedy search from the source to the sink with backtracking.

    Children are tried in ascending (arc cost + cost-to-go) order. A branch is
    pruned once its cost so far plus cost-to-go exceeds ``bound``; when the
    bounded search runs dry after pruning something, the bound grows by
    ``growth`` and the search restarts. ``bound=inf`` gives the plain search.
    """
    constraints = constraints if constraints is not None else ConstraintSet()
    g = ts.graph
    ctg = vertex_cost_to_go(ts)
    hcost = {}
    hist_pres = constraints.history_pres()

    def arc_h(a):
        h = hcost.get(a)
        if h is None:
            h = hcost[a] = heuristic_cost(ts.arc(a), ts)
        return h

    def children(node):
        cands = []
        for a in expandable_arcs(node, ts, constraints):
            after = node.ctg - sum(ctg[v] for v in g.tail(a)) + sum(ctg[v] for v in g.head(a))
            cands.append((arc_h(a) + after, ts.arc(a).sort_key(), a, after))
        cands.sort(key=lambda c: (round(c[0], 12), c[1]))
        return iter(cands)

    if bound is None:
        h0 = sum(ctg[v] for v in g.head(ts.source_arc)) if ts.source_arc >= 0 else 0.0
        # every object off its goal needs at least one pick and one place
        moves = sum(1 for v in g.head(ts.source_arc) if ctg[v] > 0) if ts.source_arc >= 0 else 0
        bound = 2.0 * h0 + 1.0 * moves + 1.0
    expansions = 0
    backtracks = 0
    while True:
        root = TaskExtendedNode(frozenset([ts.source]))
        visited = {(root.frontier, frozenset())}
        stack = [(root, children(root))]
        pruned = False
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                backtracks += 1
                continue
            _, _, a, after = nxt
            cost = node.cost_so_far + arc_h(a)
            if cost + after > bound + 1e-12:
                pruned = True
                continue
            F = apply_arc(ts, node.frontier, a)
            head = g.head(a)
            seen = node.seen | (head & hist_pres) if hist_pres else node.seen
            key = (F, seen)
            if key in visited:
                continue
            visited.add(key)
            expansions += 1
            child = TaskExtendedNode(F, node.history + (a,), seen, cost, after)
            if ts.sink in F:
                arcs = list(child.history)
                frontiers = []
                f = frozenset([ts.source])
                for x in arcs:
                    frontiers.append(f)
                    f = apply_arc(ts, f, x)
                return TaskQueryResult(UnvalidatedSchedule(arcs, frontiers), "ok", expansions, backtracks)
            if expansions >= budget:
                return TaskQueryResult(None, "budget", expansions, backtracks)
            stack.append((child, children(child)))
        if not pruned:
            return TaskQueryResult(None, "exhausted", expansions, backtracks)
        bound *= growth


def schedule_is_sound(ts: TaskSpace, sched: UnvalidatedSchedule) -> bool:
    """Replay check: tails present in each snapshot and snapshots chain exactly."""
    f = frozenset([ts.source])
    for a, snap in zip(sched.arcs, sched.frontiers):
        if snap != f or not ts.graph.tail(a) <= f:
            return False
        f = apply_arc(ts, f, a)
    return ts.sink in f and ts.arc(sched.arcs[0]).action == SOURCE_ARC and ts.arc(sched.arcs[-1]).action == SINK_ARC
