"""Timed coordination of an optimistic schedule.

Motion arcs are ordered by a dependency graph derived from the task history
(latest producer of every consumed entity state), timed by longest path, and
checked for collisions at a fixed time step. Conflicts between different task
arcs are first fixed by adding a precedence edge in history order; conflicts
inside one task arc, or against a static the task order requires, are
replanned in a joint or augmented space. Failures become motion constraints
or task constraints.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (Obstacles, Shape, World, body_clear, capsule, collides, disc, point_segment_distance,
                       segment_segment_closest, segment_segment_distance, wall_obstacles, TANGENCY_TOL)
from .motion.query import (APPROACH, CARRY, RETREAT, MotionConstraint, MotionStore, MoveArc, OptimisticSchedule,
                           TaskConstraintFeedback, handover_cut, plan_move, sample_disc, truncated_arm)
from .motion.roadmap import Counters, Roadmap, lazy_path
from .task_conflict import blocked_head_vertex, replay_geometry
from .task_query import FRONTIER, TaskConstraint
from .task_space import HANDOVER, PICK, PLACE, TaskSpace

ARC_ARC = "ArcArc"
ARC_VERTEX = "ArcVertex"
REGION_CLEARANCE = 0.05


class CycleError(RuntimeError):
    pass


class IterationLimitError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# dependency graph
# --------------------------------------------------------------------------

@dataclass
class DNode:
    id: int
    kind: str            # source | move | transition | sink
    group: int           # schedule index; -1 for source, len(schedule) for sink
    move: int = -1       # move id for move nodes
    robot: int = -1


class DependencyGraph:
    """DAG over motion arcs. Node ids are a topological order; edges only go forward."""

    def __init__(self):
        self.nodes: list[DNode] = []
        self.preds: list[set[int]] = []
        self.succs: list[set[int]] = []
        self.sync: dict[int, int] = {}
        self.node_of_move: dict[int, int] = {}
        self.node_of_transition: dict[int, int] = {}
        self.source = -1
        self.sink = -1

    def add_node(self, kind: str, group: int, move: int = -1, robot: int = -1) -> int:
        n = DNode(len(self.nodes), kind, group, move, robot)
        self.nodes.append(n)
        self.preds.append(set())
        self.succs.append(set())
        if move >= 0:
            self.node_of_move[move] = n.id
        return n.id

    def add_edge(self, u: int, v: int) -> bool:
        if u >= v:
            raise CycleError(f"edge {u}->{v} violates the topological order")
        if v in self.succs[u]:
            return False
        self.succs[u].add(v)
        self.preds[v].add(u)
        return True

    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u in range(len(self.nodes)) for v in self.succs[u])

    def is_acyclic(self) -> bool:
        indeg = [len(p) for p in self.preds]
        todo = [i for i, d in enumerate(indeg) if d == 0]
        seen = 0
        while todo:
            u = todo.pop()
            seen += 1
            for v in self.succs[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    todo.append(v)
        return seen == len(self.nodes)

    def descendants(self, u: int) -> set[int]:
        out, todo = set(), [u]
        while todo:
            for v in self.succs[todo.pop()]:
                if v not in out:
                    out.add(v)
                    todo.append(v)
        return out


def task_dependency_edges(ts: TaskSpace, arcs: list[int]) -> set[tuple[int, int]]:
    """Latest-producer edges between schedule indices at the task level."""
    producer: dict[int, int] = {}
    out = set()
    for k, aid in enumerate(arcs):
        for v in ts.graph.tail(aid):
            if v in producer:
                out.add((producer[v], k))
        for v in ts.graph.head(aid):
            producer[v] = k
    return out


def dependency_graph(opt: OptimisticSchedule) -> DependencyGraph:
    dep = DependencyGraph()
    moves = opt.moves
    dep.source = dep.add_node("source", -1)
    last_robot: dict[int, int] = {}
    last_obj: dict[int, int] = {}
    for idx in sorted(opt.transitions):
        T = opt.transitions[idx]
        first: dict[int, int] = {}
        pre_nodes = []
        for mid in opt.pre.get(idx, []):
            n = dep.add_node("move", idx, mid, moves[mid].robot)
            first.setdefault(moves[mid].robot, n)
            pre_nodes.append(n)
        t = dep.add_node("transition", idx, -1)
        dep.node_of_transition[idx] = t
        for n in pre_nodes:
            dep.add_edge(n, t)
        last_in_group: dict[int, int] = {}
        for mid in opt.post.get(idx, []):
            n = dep.add_node("move", idx, mid, moves[mid].robot)
            dep.add_edge(t, n)
            last_in_group[moves[mid].robot] = n
        for r in T.robots:
            dep.add_edge(last_robot.get(r, dep.source), first.get(r, t))
        if T.action == PICK:
            dep.add_edge(last_obj.get(T.obj, dep.source), first.get(T.robots[0], t))
        for r in T.robots:
            last_robot[r] = last_in_group.get(r, t)
        last_obj[T.obj] = t
    dep.sink = dep.add_node("sink", len(opt.anchored.schedule.arcs))
    for n in sorted(set(last_robot.values()) | set(last_obj.values())):
        dep.add_edge(n, dep.sink)
    if not dep.preds[dep.sink]:
        dep.add_edge(dep.source, dep.sink)
    if not dep.is_acyclic():
        raise CycleError("dependency graph has a cycle")
    return dep


# --------------------------------------------------------------------------
# timing
# --------------------------------------------------------------------------

@dataclass
class TimedSchedule:
    dep: DependencyGraph
    opt: OptimisticSchedule
    world: World
    start: np.ndarray
    end: np.ndarray

    @property
    def makespan(self) -> float:
        return float(self.end[self.dep.sink])

    def node_duration(self, n: int) -> float:
        node = self.dep.nodes[n]
        return self.opt.moves[node.move].duration if node.kind == "move" else 0.0

    def moves_of(self, r: int) -> list[MoveArc]:
        ms = [m for m in self.opt.moves if m.robot == r]
        return sorted(ms, key=lambda m: (self.start[self.dep.node_of_move[m.id]], m.id))

    def move_start(self, m: MoveArc) -> float:
        return float(self.start[self.dep.node_of_move[m.id]])

    def robot_waypoints(self) -> dict[int, np.ndarray]:
        """Per robot (m, 3) array of (t, x, y), piecewise linear in time."""
        out = {}
        span = self.makespan
        for r in self.world.robots:
            rows = [(0.0, r.base[0], r.base[1])]
            for m in self.moves_of(r.id):
                s = self.move_start(m)
                for t, q in zip(s + m.times, m.path):
                    last = rows[-1]
                    if abs(t - last[0]) <= 1e-12 and abs(q[0] - last[1]) <= 1e-12 and abs(q[1] - last[2]) <= 1e-12:
                        continue
                    if t < last[0]:
                        t = last[0]
                    if t > last[0] and (q[0] != last[1] or q[1] != last[2]) and t - last[0] > 0 and \
                            rows[-1][0] < s:
                        rows.append((s, last[1], last[2]))
                    rows.append((float(t), float(q[0]), float(q[1])))
            if span > rows[-1][0]:
                rows.append((span, rows[-1][1], rows[-1][2]))
            out[r.id] = np.asarray(rows, dtype=float)
        return out

    def events(self) -> list[tuple[float, int, object]]:
        out = []
        for idx, T in self.opt.transitions.items():
            out.append((float(self.start[self.dep.node_of_transition[idx]]), idx, T))
        return sorted(out, key=lambda e: (e[0], e[1]))


def schedule_times(dep: DependencyGraph, opt: OptimisticSchedule, world: World) -> TimedSchedule:
    n = len(dep.nodes)
    start = np.zeros(n)
    end = np.zeros(n)
    dur = np.zeros(n)
    for node in dep.nodes:
        if node.kind == "move":
            dur[node.id] = opt.moves[node.move].duration
    done = set()
    for node in dep.nodes:
        u = node.id
        if u in done:
            continue
        group = [u]
        if u in dep.sync:
            group.append(dep.sync[u])
        s = 0.0
        for x in group:
            for p in dep.preds[x]:
                s = max(s, end[p])
        for x in group:
            start[x] = s
            end[x] = s + dur[x]
            done.add(x)
    return TimedSchedule(dep, opt, world, start, end)


# --------------------------------------------------------------------------
# timed conflict detection
# --------------------------------------------------------------------------

@dataclass
class MotionConflict:
    kind: str                 # ArcArc | ArcVertex
    t: float
    entities: tuple           # (("robot", i) | ("object", j), ...)
    shapes: tuple             # colliding shapes at t
    mover: int                # dependency node of the moving participant
    other: Optional[int]      # moving node of the other participant (ArcArc)
    static: Optional[tuple] = None  # (entity, a1 node or -1, a2 node or -1) for ArcVertex
    point: tuple = (0.0, 0.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t": self.t, "entities": [list(e) for e in self.entities],
                "shapes": [s.to_dict() for s in self.shapes], "mover": self.mover, "other": self.other,
                "static": [list(self.static[0]), self.static[1], self.static[2]] if self.static else None,
                "point": list(self.point)}


@dataclass
class _Timeline:
    R: int
    O: int
    wp: dict
    ev_t: list        # per object: event times
    ev_h: list        # per object: holder after each event (-1 resting)
    ev_p: list        # per object: resting point after each event
    start_pts: np.ndarray
    pick_windows: list   # (robot, obj, t0, t1)
    handovers: list      # (g, r, obj, h, t0, t1, zone)
    radii_r: np.ndarray
    radii_o: np.ndarray
    bases: np.ndarray


def _robot_event_times(events, R) -> dict[int, list[float]]:
    out = {r: [] for r in range(R)}
    for t, _, T in events:
        for r in T.robots:
            out[r].append(t)
    return out


def _prev_next(times: list[float], k: int, span: float) -> tuple[float, float]:
    prev = times[k - 1] if k > 0 else 0.0
    nxt = times[k + 1] if k + 1 < len(times) else span
    return prev, nxt


def _timeline(timed: TimedSchedule) -> _Timeline:
    world = timed.world
    R, O = len(world.robots), len(world.objects)
    events = timed.events()
    span = timed.makespan
    ev_t = [[] for _ in range(O)]
    ev_h = [[] for _ in range(O)]
    ev_p = [[] for _ in range(O)]
    rtimes = _robot_event_times(events, R)
    rcount = {r: 0 for r in range(R)}
    picks, hands = [], []
    cut_of = {}
    for t, idx, T in events:
        j = T.obj
        ks = {}
        for r in T.robots:
            ks[r] = rcount[r]
            rcount[r] += 1
        if T.action == PICK:
            holder, pt = T.robots[0], T.point
            prev, _ = _prev_next(rtimes[T.robots[0]], ks[T.robots[0]], span)
            picks.append((T.robots[0], j, prev, t))
        elif T.action == PLACE:
            holder, pt = -1, T.point
            _, nxt = _prev_next(rtimes[T.robots[0]], ks[T.robots[0]], span)
            picks.append((T.robots[0], j, t, nxt))
        else:
            holder, pt = T.robots[1], T.point
            g, rc = T.robots
            pg, ng = _prev_next(rtimes[g], ks[g], span)
            pr, nr = _prev_next(rtimes[rc], ks[rc], span)
            if j not in cut_of:
                cut_of[j] = handover_cut(world, j)
            hands.append((g, rc, j, tuple(T.point), min(pg, pr), max(ng, nr), cut_of[j]))
        ev_t[j].append(t)
        ev_h[j].append(holder)
        ev_p[j].append(pt)
    return _Timeline(R, O, timed.robot_waypoints(), ev_t, ev_h, ev_p,
                     np.array([o.start for o in world.objects], dtype=float).reshape(-1, 2),
                     picks, hands,
                     np.array([r.r_arm for r in world.robots]), np.array([o.radius for o in world.objects]),
                     np.array([r.base for r in world.robots], dtype=float).reshape(-1, 2))


def _sample(tl: _Timeline, times: np.ndarray):
    C = len(times)
    E = np.zeros((tl.R, C, 2))
    for r in range(tl.R):
        w = tl.wp[r]
        E[r, :, 0] = np.interp(times, w[:, 0], w[:, 1])
        E[r, :, 1] = np.interp(times, w[:, 0], w[:, 2])
    P = np.zeros((tl.O, C, 2))
    H = np.full((tl.O, C), -1, dtype=int)
    for j in range(tl.O):
        P[j] = tl.start_pts[j]
        if not tl.ev_t[j]:
            continue
        k = np.searchsorted(np.asarray(tl.ev_t[j]), times, side="right") - 1
        hold = np.where(k >= 0, np.asarray(tl.ev_h[j])[np.maximum(k, 0)], -1)
        rest = np.asarray(tl.ev_p[j], dtype=float)[np.maximum(k, 0)]
        rest = np.where((k >= 0)[:, None], rest, tl.start_pts[j])
        H[j] = hold
        for r in range(tl.R):
            m = hold == r
            rest[m] = E[r, m]
        P[j] = rest
    return E, P, H


def _zone_ok(a: Shape, b: Shape, h, zone: float) -> bool:
    c1, c2 = segment_segment_closest(a.a, a.b, b.a, b.b)
    lim = zone + a.radius + b.radius
    return bool(np.linalg.norm(c1 - h) <= lim and np.linalg.norm(c2 - h) <= lim)


def _entity_shape(tl, ent, E, P, c) -> Shape:
    if ent[0] == "robot":
        return capsule(tl.bases[ent[1]], E[ent[1], c], float(tl.radii_r[ent[1]]), f"robot{ent[1]}")
    return disc(P[ent[1], c], float(tl.radii_o[ent[1]]), f"obj{ent[1]}")


def sample_times(makespan: float, dt: float) -> np.ndarray:
    n = int(np.floor(makespan / dt + 1e-9))
    t = np.arange(n + 1) * dt
    if makespan - t[-1] > 1e-12:
        t = np.append(t, makespan)
    return t


def _collisions_at(tl: _Timeline, E, P, H, times, tol=TANGENCY_TOL):
    """Yield (column, pair) candidates in time order, unwaived for held/pick windows."""
    C = len(times)
    R, O = tl.R, tl.O
    hits = []  # (col, order, ent_a, ent_b)
    bases = tl.bases
    order = 0
    for i in range(R):
        for k in range(i + 1, R):
            d = segment_segment_distance(np.broadcast_to(bases[i], (C, 2)), E[i], np.broadcast_to(bases[k], (C, 2)), E[k])
            m = d < tl.radii_r[i] + tl.radii_r[k] - tol
            if m.any():
                hits.append((m, order, ("robot", i), ("robot", k)))
            order += 1
    for i in range(R):
        for j in range(O):
            d = point_segment_distance(P[j], np.broadcast_to(bases[i], (C, 2)), E[i])
            m = (d < tl.radii_r[i] + tl.radii_o[j] - tol) & (H[j] != i)
            if m.any():
                for (r, o, t0, t1) in tl.pick_windows:
                    if r == i and o == j:
                        m &= ~((times >= t0 - 1e-12) & (times <= t1 + 1e-12))
                if m.any():
                    hits.append((m, order, ("robot", i), ("object", j)))
            order += 1
    for j in range(O):
        for l in range(j + 1, O):
            d = np.linalg.norm(P[j] - P[l], axis=1)
            m = d < tl.radii_o[j] + tl.radii_o[l] - tol
            if m.any():
                hits.append((m, order, ("object", j), ("object", l)))
            order += 1
    return hits


def _handover_waived(tl: _Timeline, ea, eb, sa: Shape, sb: Shape, t: float) -> bool:
    for g, rc, j, h, t0, t1, cut in tl.handovers:
        if not (t0 - 1e-12 <= t <= t1 + 1e-12):
            continue
        members = {("robot", g), ("robot", rc), ("object", j)}
        if ea in members and eb in members and _zone_ok(sa, sb, np.asarray(h), cut):
            return True
    return False


def find_conflicts_window(timed: TimedSchedule, dt: float, t_from: float = 0.0, chunk: int = 400,
                          tl: Optional[_Timeline] = None):
    """Earliest unwaived collision at or after ``t_from``: (t, ent_a, ent_b, shape_a, shape_b) or None."""
    tl = tl or _timeline(timed)
    times_all = sample_times(timed.makespan, dt)
    i0 = int(np.searchsorted(times_all, t_from - 1e-12))
    for s in range(i0, len(times_all), chunk):
        times = times_all[s:s + chunk]
        E, P, H = _sample(tl, times)
        hits = _collisions_at(tl, E, P, H, times)
        if not hits:
            continue
        cands = []
        for m, order, ea, eb in hits:
            for c in np.flatnonzero(m):
                cands.append((int(c), order, ea, eb))
        cands.sort(key=lambda x: (x[0], x[1]))
        for c, order, ea, eb in cands:
            sa = _entity_shape(tl, ea, E, P, c)
            sb = _entity_shape(tl, eb, E, P, c)
            if _handover_waived(tl, ea, eb, sa, sb, float(times[c])):
                continue
            return float(times[c]), ea, eb, sa, sb
    return None


def _robot_state(timed: TimedSchedule, r: int, t: float):
    """("moving", node) or ("static", a1, a2) for robot r at time t."""
    dep = timed.dep
    a1, a2 = -1, -1
    for m in timed.moves_of(r):
        n = dep.node_of_move[m.id]
        s, e = timed.start[n], timed.end[n]
        if s - 1e-12 <= t < e - 1e-12 and e - s > 1e-12:
            return ("moving", n)
        if e <= t + 1e-12:
            a1 = n
        elif a2 < 0:
            a2 = n
    return ("static", a1, a2)


def _object_state(timed: TimedSchedule, tl: _Timeline, j: int, t: float):
    k = int(np.searchsorted(np.asarray(tl.ev_t[j]), t, side="right")) - 1 if tl.ev_t[j] else -1
    holder = tl.ev_h[j][k] if k >= 0 else -1
    if holder >= 0:
        return _robot_state(timed, holder, t)
    dep = timed.dep
    a1, a2 = -1, -1
    carries = sorted((m for m in timed.opt.moves if m.carry == j),
                     key=lambda m: timed.start[dep.node_of_move[m.id]])
    for m in carries:
        n = dep.node_of_move[m.id]
        if timed.end[n] <= t + 1e-12:
            a1 = n
        elif a2 < 0 and timed.start[n] >= t - 1e-12:
            a2 = n
    return ("static", a1, a2)


def find_motion_conflict(timed: TimedSchedule, dt: float, t_from: float = 0.0,
                         tl: Optional[_Timeline] = None) -> Optional[MotionConflict]:
    tl = tl or _timeline(timed)
    hit = find_conflicts_window(timed, dt, t_from, tl=tl)
    if hit is None:
        return None
    t, ea, eb, sa, sb = hit
    st = []
    for e in (ea, eb):
        st.append(_robot_state(timed, e[1], t) if e[0] == "robot" else _object_state(timed, tl, e[1], t))
    c1, c2 = segment_segment_closest(sa.a, sa.b, sb.a, sb.b)
    point = tuple(((c1 + c2) / 2).tolist())
    (xa, xb) = st
    if xa[0] == "moving" and xb[0] == "moving":
        a, b = sorted((xa[1], xb[1]))
        if a == b:
            # both bodies belong to one moving robot (robot and its own object): treat as static blocker
            return MotionConflict(ARC_VERTEX, t, (ea, eb), (sa, sb), a, None, (eb, -1, -1), point)
        return MotionConflict(ARC_ARC, t, (ea, eb), (sa, sb), b, a, None, point)
    if xa[0] == "moving":
        return MotionConflict(ARC_VERTEX, t, (ea, eb), (sa, sb), xa[1], None, (eb, xb[1], xb[2]), point)
    if xb[0] == "moving":
        return MotionConflict(ARC_VERTEX, t, (eb, ea), (sb, sa), xb[1], None, (ea, xa[1], xa[2]), point)
    # both static: the one that arrived last is treated as the mover
    if xa[1] >= xb[1]:
        return MotionConflict(ARC_VERTEX, t, (ea, eb), (sa, sb), xa[1], None, (eb, xb[1], xb[2]), point)
    return MotionConflict(ARC_VERTEX, t, (eb, ea), (sb, sa), xb[1], None, (ea, xa[1], xa[2]), point)


# --------------------------------------------------------------------------
# subproblems
# --------------------------------------------------------------------------

@dataclass
class SubproblemSpec:
    kind: str                      # composite | single
    moves: tuple                   # move ids
    robots: tuple
    carry: tuple                   # carried object radius per robot (0 when empty)
    starts: tuple
    goals: tuple
    statics: list                  # shapes frozen during the window
    regions: list = field(default_factory=list)
    waiver: Optional[tuple] = None  # (h, cut) handover contact zone
    element: Optional[tuple] = None

    @property
    def dim(self) -> int:
        return 2 * len(self.robots)


def _others_at(timed: TimedSchedule, tl: _Timeline, t: float, robots: set, objects: set) -> list[Shape]:
    E, P, H = _sample(tl, np.asarray([t]))
    out = []
    for r in range(tl.R):
        if r not in robots:
            out.append(capsule(tl.bases[r], E[r, 0], float(tl.radii_r[r]), f"robot{r}"))
    for j in range(tl.O):
        if j not in objects and H[j, 0] not in robots:
            out.append(disc(P[j, 0], float(tl.radii_o[j]), f"obj{j}"))
    return out


def create_subproblem(conflict: MotionConflict, timed: TimedSchedule, opt: OptimisticSchedule,
                      tl: Optional[_Timeline] = None) -> SubproblemSpec:
    tl = tl or _timeline(timed)
    world = timed.world
    dep = timed.dep
    if conflict.kind == ARC_ARC:
        ma = opt.moves[dep.nodes[conflict.other].move]
        mb = opt.moves[dep.nodes[conflict.mover].move]
        robots = (ma.robot, mb.robot)
        carried = {m.carry for m in (ma, mb) if m.carry >= 0}
        statics = _others_at(timed, tl, conflict.t, set(robots), carried)
        waiver = None
        T = opt.transitions.get(ma.index)
        if ma.index == mb.index and T is not None and T.action == HANDOVER:
            waiver = (tuple(T.point), handover_cut(world, T.obj))
        carry = tuple(world.objects[m.carry].radius if m.carry >= 0 else 0.0 for m in (ma, mb))
        return SubproblemSpec("composite", (ma.id, mb.id), robots, carry, (ma.start, mb.start),
                              (ma.end, mb.end), statics, [], waiver)
    mb = opt.moves[dep.nodes[conflict.mover].move]
    blocker = conflict.shapes[1]
    r_arm = world.robots[mb.robot].r_arm
    region = disc(conflict.point, blocker.radius + r_arm + REGION_CLEARANCE, "region")
    extra = [blocker]
    ent = conflict.static[0] if conflict.static else None
    T = opt.transitions.get(mb.index)
    if ent is not None and ent[0] == "robot" and T is not None and T.action == HANDOVER and ent[1] in T.robots:
        arm = truncated_arm(blocker.a, blocker.b, blocker.radius, handover_cut(world, T.obj), blocker.label)
        extra = [arm] if arm is not None else []
    carry = (world.objects[mb.carry].radius if mb.carry >= 0 else 0.0,)
    return SubproblemSpec("single", (mb.id,), (mb.robot,), carry, (mb.start,), (mb.end,),
                          list(mb.statics) + extra, [region], None, mb.element)


def joint_checker(world: World, spec: SubproblemSpec, ds: float, margin: float, counters: Optional[Counters] = None):
    walls = wall_obstacles(world)
    obs = walls + Obstacles(spec.statics) if spec.statics else walls
    obs = Obstacles.from_arrays(obs.a, obs.b, obs.r + margin, obs.labels)
    (r1, r2) = (world.robots[i] for i in spec.robots)
    (c1, c2) = spec.carry
    b1 = np.asarray(r1.base, dtype=float)
    b2 = np.asarray(r2.base, dtype=float)
    mm = 2 * margin

    def pair_shapes(q):
        s1 = [capsule(b1, q[:2], r1.r_arm)] + ([disc(q[:2], c1)] if c1 > 0 else [])
        s2 = [capsule(b2, q[2:], r2.r_arm)] + ([disc(q[2:], c2)] if c2 > 0 else [])
        return s1, s2

    def check(qa, qb):
        qa = np.asarray(qa, dtype=float)
        qb = np.asarray(qb, dtype=float)
        step = max(np.linalg.norm(qb[:2] - qa[:2]), np.linalg.norm(qb[2:] - qa[2:]))
        n = max(1, int(np.ceil(step / ds)))
        Q = qa + np.linspace(0.0, 1.0, n + 1)[:, None] * (qb - qa)
        if counters is not None:
            counters.collision_checks += 2 * len(Q)
        if len(obs):
            if not body_clear(b1, Q[:, :2], r1.r_arm, c1, obs).all():
                return False
            if not body_clear(b2, Q[:, 2:], r2.r_arm, c2, obs).all():
                return False
        B1 = np.broadcast_to(b1, (len(Q), 2))
        B2 = np.broadcast_to(b2, (len(Q), 2))
        bad = segment_segment_distance(B1, Q[:, :2], B2, Q[:, 2:]) < r1.r_arm + r2.r_arm + mm
        if c1 > 0:
            bad |= point_segment_distance(Q[:, :2], B2, Q[:, 2:]) < c1 + r2.r_arm + mm
        if c2 > 0:
            bad |= point_segment_distance(Q[:, 2:], B1, Q[:, :2]) < c2 + r1.r_arm + mm
        if c1 > 0 and c2 > 0:
            bad |= np.linalg.norm(Q[:, :2] - Q[:, 2:], axis=1) < c1 + c2 + mm
        if not bad.any():
            return True
        if spec.waiver is None:
            return False
        h, cut = np.asarray(spec.waiver[0]), spec.waiver[1]
        for q in Q[bad]:
            s1, s2 = pair_shapes(q)
            for a in s1:
                for b in s2:
                    if collides(a, b, tol=-mm) and not _zone_ok(a, b, h, cut):
                        return False
        return True
    return check


def solve_subproblem(spec: SubproblemSpec, world: World, store: MotionStore, rng: np.random.Generator,
                     n_samples: int = 300, k: int = 10, max_iters: int = 200, repair_rounds: int = 3):
    """Replacement paths for the moves in ``spec`` or None. Anchors are never changed."""
    if spec.kind == "single":
        res = plan_move(store, spec.element, spec.starts[0], spec.goals[0], spec.statics + spec.regions, rng)
        if not res.ok:
            return None
        return [res.path]
    (r1, r2) = (world.robots[i] for i in spec.robots)

    def sampler(g, n):
        return np.hstack([sample_disc(r1.base, r1.reach, g, n), sample_disc(r2.base, r2.reach, g, n)])

    def domain(q):
        return r1.reaches(q[:2]) and r2.reaches(q[2:])

    check = joint_checker(world, spec, store.ds, store.margin, store.counters)
    rm = Roadmap(("joint",) + tuple(spec.robots), 4, sampler, domain, check, k, False, Counters())
    rm.build(rng, n_samples)
    start = np.concatenate([spec.starts[0], spec.starts[1]])
    goal = np.concatenate([spec.goals[0], spec.goals[1]])
    res = lazy_path(rm, start, goal, None, rng, max_iters, repair_rounds, 20, 50)
    store.counters.collision_checks += rm.counters.collision_checks
    if not res.ok:
        return None
    P = res.path
    return [P[:, :2].copy(), P[:, 2:].copy()]


def joint_times(p1: np.ndarray, p2: np.ndarray, v1: float, v2: float) -> np.ndarray:
    if len(p1) < 2:
        return np.zeros(len(p1))
    d = np.maximum(np.linalg.norm(np.diff(p1, axis=0), axis=1) / v1, np.linalg.norm(np.diff(p2, axis=0), axis=1) / v2)
    return np.concatenate([[0.0], np.cumsum(d)])


# --------------------------------------------------------------------------
# outer loop
# --------------------------------------------------------------------------

@dataclass
class ResolveResult:
    status: str                          # valid | motion_constraint | task_constraint | limit
    timed: Optional[TimedSchedule]
    motion_constraints: list = field(default_factory=list)
    task_feedback: list = field(default_factory=list)
    events: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)


def _static_vertex(ts: TaskSpace, opt: OptimisticSchedule, geos, index: int, ent: tuple) -> Optional[int]:
    geo = geos[index]
    if geo is None:
        return None
    key = ("r", ent[1]) if ent[0] == "robot" else ("o", ent[1])
    return geo.vertex_of.get(key)


def resolve_all(opt: OptimisticSchedule, ts: TaskSpace, store: MotionStore, rng: np.random.Generator,
                dt: Optional[float] = None, max_iters: int = 500, n_mc: int = 3) -> ResolveResult:
    """Find, create and solve timed conflicts until none remain."""
    world = ts.world
    vmax = max(r.v for r in world.robots)
    dt = dt if dt is not None else store.ds / vmax
    dep = dependency_graph(opt)
    timed = schedule_times(dep, opt, world)
    geos = replay_geometry(ts, opt.anchored)
    stats = {"conflicts": 0, "arc_arc": 0, "arc_vertex": 0, "precedence": 0, "composite": 0,
             "composite_solved": 0, "replans": 0, "replans_solved": 0}
    events = []
    failures: dict[tuple, int] = {}
    t_from = 0.0
    for it in range(max_iters):
        tl = _timeline(timed)
        c = find_motion_conflict(timed, dt, t_from, tl)
        if c is None:
            stats["iterations"] = it
            return ResolveResult("valid", timed, [], [], events, stats)
        stats["conflicts"] += 1
        stats["arc_arc" if c.kind == ARC_ARC else "arc_vertex"] += 1
        ev = {"event": "MotionConflict", "conflict": c.to_dict()}
        old_start = timed.start.copy()
        fixed = False
        if c.kind == ARC_ARC:
            a, b = c.other, c.mover
            if dep.nodes[a].group != dep.nodes[b].group:
                if dep.add_edge(min(a, b), max(a, b)):
                    stats["precedence"] += 1
                    ev["resolution"] = {"precedence": [min(a, b), max(a, b)]}
                    fixed = True
            if not fixed:
                stats["composite"] += 1
                spec = create_subproblem(c, timed, opt, tl)
                sol = solve_subproblem(spec, world, store, rng)
                if sol is not None:
                    stats["composite_solved"] += 1
                    ma, mb = (opt.moves[i] for i in spec.moves)
                    times = joint_times(sol[0], sol[1], world.robots[ma.robot].v, world.robots[mb.robot].v)
                    ma.path, mb.path = sol
                    ma.times, mb.times = times, times.copy()
                    na, nb = dep.node_of_move[ma.id], dep.node_of_move[mb.id]
                    dep.sync[na], dep.sync[nb] = nb, na
                    ev["resolution"] = {"composite": list(spec.moves)}
                    fixed = True
                else:
                    lo, hi = min(a, b), max(a, b)
                    if dep.add_edge(lo, hi):
                        stats["precedence"] += 1
                        ev["resolution"] = {"precedence": [lo, hi], "after": "composite-failed"}
                        fixed = True
                    else:
                        ma = opt.moves[dep.nodes[a].move]
                        mb = opt.moves[dep.nodes[b].move]
                        r = max(s.radius for s in c.shapes) + max(world.robots[ma.robot].r_arm,
                                                                 world.robots[mb.robot].r_arm) + REGION_CLEARANCE
                        mc = MotionConstraint(tuple(sorted((ma.signature, mb.signature))), c.point, r)
                        ev["resolution"] = {"motion_constraint": mc.to_dict()}
                        events.append(ev)
                        stats["iterations"] = it + 1
                        return ResolveResult("motion_constraint", timed, [mc], [], events, stats)
        else:
            b = c.mover
            ent, a1, a2 = c.static
            if 0 <= a2 < b and dep.add_edge(a2, b):
                stats["precedence"] += 1
                ev["resolution"] = {"precedence": [a2, b]}
                fixed = True
            elif a1 > b and dep.add_edge(b, a1):
                stats["precedence"] += 1
                ev["resolution"] = {"precedence": [b, a1]}
                fixed = True
            else:
                mv = opt.moves[dep.nodes[b].move]
                key = (mv.id, ent)
                stats["replans"] += 1
                spec = create_subproblem(c, timed, opt, tl)
                sol = solve_subproblem(spec, world, store, rng) if failures.get(key, 0) < n_mc else None
                if sol is not None:
                    stats["replans_solved"] += 1
                    mv.path = sol[0]
                    seg = np.linalg.norm(np.diff(mv.path, axis=0), axis=1) if len(mv.path) > 1 else np.zeros(0)
                    mv.times = np.concatenate([[0.0], np.cumsum(seg) / world.robots[mv.robot].v])
                    mv.statics = spec.statics
                    ev["resolution"] = {"replanned": mv.id}
                    failures[key] = failures.get(key, 0) + 1
                    fixed = True
                else:
                    failures[key] = n_mc
                if not fixed or failures[key] > n_mc:
                    vid = _static_vertex(ts, opt, geos, mv.index, ent)
                    head = blocked_head_vertex(ts, mv.task_arc)
                    if vid is None or vid == head:
                        from .motion.query import _arc_feedback
                        fb = _arc_feedback(ts, mv.task_arc, mv.index, "arc-vertex")
                    else:
                        fb = TaskConstraintFeedback(TaskConstraint(FRONTIER, vid, head, "resolve:arc-vertex"),
                                                    mv.index, f"{mv.role} blocked by {ent[0]} {ent[1]}", ent)
                    ev["resolution"] = {"task_constraint": fb.to_dict(ts)}
                    events.append(ev)
                    stats["iterations"] = it + 1
                    return ResolveResult("task_constraint", timed, [], [fb], events, stats)
        events.append(ev)
        timed = schedule_times(dep, opt, world)
        changed = np.flatnonzero(np.abs(timed.start - old_start) > 1e-12)
        lo = c.t
        if len(changed):
            lo = min(lo, float(old_start[changed].min()), float(timed.start[changed].min()))
        if c.kind == ARC_VERTEX and "replanned" in ev.get("resolution", {}):
            lo = min(lo, float(timed.start[c.mover]))
        if "composite" in ev.get("resolution", {}):
            lo = min(lo, float(timed.start[c.mover]), float(timed.start[c.other]))
        t_from = max(0.0, lo - dt)
    stats["iterations"] = max_iters
    return ResolveResult("limit", timed, [], [], events, stats)


def serialize_schedule(timed: TimedSchedule, dt: float) -> dict:
    """Plain timed trajectories and transition events; what the validator replays."""
    wps = timed.robot_waypoints()
    return {
        "makespan": timed.makespan,
        "dt": dt,
        "robots": [wps[r.id].tolist() for r in timed.world.robots],
        "events": [{"t": t, "index": idx, "action": T.action, "robots": list(T.robots), "obj": T.obj,
                    "point": list(T.point)} for t, idx, T in timed.events()],
    }
