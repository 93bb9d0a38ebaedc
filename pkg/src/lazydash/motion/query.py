"""Motion layer: element roadmaps, the motion hypergraph store and the lazy motion query.

Robot configurations are effector points in the plane. A robot element's
roadmap covers its reach disc; a holding element's roadmap covers the same
disc with the object attached at the effector. Robots rest with the effector
at the base between actions, so each robot's activity is a chain of
approach, carry and retreat moves between transition anchors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..geometry import (Obstacles, RobotModel, Shape, World, body_clear, capsule, collides, densify, disc,
                        wall_obstacles)
from ..task_conflict import (AnchoredSchedule, FrontierGeometry, blocked_head_vertex, replay_geometry,
                             sample_handover_point, NoIntersectionError)
from ..task_query import FRONTIER, TaskConstraint
from ..task_space import HANDOVER, HOLDING, OBJECT_AT, PICK, PLACE, TaskSpace
from .roadmap import Counters, EdgeContext, PathResult, Roadmap, lazy_path

APPROACH, CARRY, RETREAT = "approach", "carry", "retreat"


@dataclass
class MotionParams:
    n_samples: int = 200
    k: int = 8
    max_iters: int = 200
    repair_rounds: int = 3
    n_local: int = 20
    n_global: int = 50
    n_t: int = 30
    n_h: int = 50
    handover_retries: int = 2
    smooth: bool = True
    margin: Optional[float] = None  # defaults to ds/2

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def sample_disc(center, radius: float, rng: np.random.Generator, n: int) -> np.ndarray:
    ang = rng.uniform(0.0, 2 * np.pi, n)
    rad = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    return np.column_stack([center[0] + rad * np.cos(ang), center[1] + rad * np.sin(ang)])


def body_checker(robot: RobotModel, carry_r: float, obstacles: Obstacles, ds: float, margin: float,
                 counters: Optional[Counters] = None):
    """Edge check: arm (and carried disc) clear of ``obstacles`` at every ds step.

    Obstacles are inflated by ``margin``; with margin >= ds/2 the continuous
    motion between checked points is clear too.
    """
    if len(obstacles) == 0:
        def free(qa, qb):
            return True
        return free
    inflated = Obstacles.from_arrays(obstacles.a, obstacles.b, obstacles.r + margin, obstacles.labels)

    def check(qa, qb):
        pts = densify(qa, qb, ds)
        if counters is not None:
            counters.collision_checks += len(pts)
        return bool(body_clear(robot.base, pts, robot.r_arm, carry_r, inflated).all())
    return check


def element_key(robot: int, obj: int = -1) -> tuple:
    return ("free", robot) if obj < 0 else ("hold", robot, obj)


def _seed_words(key: tuple) -> list[int]:
    return [0, key[1]] if key[0] == "free" else [1, key[1], key[2]]


class MotionStore:
    """Motion hypergraph H_M: per-element roadmaps plus transition motion arcs."""

    def __init__(self, world: World, seed: int, params: Optional[MotionParams] = None, eager: bool = False):
        self.world = world
        self.seed = int(seed)
        self.params = params or MotionParams()
        self.eager = eager
        self.counters = Counters()
        self.roadmaps: dict[tuple, Roadmap] = {}
        self.transitions: dict[tuple, tuple] = {}  # (task arc, x, y) -> point
        self.ds = world.resolution
        self.margin = self.params.margin if self.params.margin is not None else self.ds / 2
        self.walls = wall_obstacles(world)

    def carry_radius(self, key: tuple) -> float:
        return self.world.objects[key[2]].radius if key[0] == "hold" else 0.0

    def roadmap(self, key: tuple) -> Roadmap:
        rm = self.roadmaps.get(key)
        if rm is None:
            robot = self.world.robots[key[1]]
            check = body_checker(robot, self.carry_radius(key), self.walls, self.ds, self.margin, self.counters)
            rm = Roadmap(key, 2, lambda rng, n, r=robot: sample_disc(r.base, r.reach, rng, n),
                         robot.reaches, check, self.params.k, self.eager, self.counters)
            rng = np.random.default_rng([self.seed, 7] + _seed_words(key))
            rm.build(rng, self.params.n_samples)
            rm.insert(robot.base)
            self.roadmaps[key] = rm
        return rm

    def add_transition(self, aid: int, point) -> None:
        self.transitions[(aid, round(point[0], 12), round(point[1], 12))] = tuple(point)

    def counts(self) -> tuple[int, int]:
        v = sum(rm.n for rm in self.roadmaps.values())
        e = sum(rm.n_edges for rm in self.roadmaps.values()) + len(self.transitions)
        return v, e

    def context(self, key: tuple, shapes: list[Shape]) -> Optional[EdgeContext]:
        if not shapes:
            return None
        robot = self.world.robots[key[1]]
        check = body_checker(robot, self.carry_radius(key), Obstacles(shapes), self.ds, self.margin, self.counters)
        return EdgeContext(check, self.counters)


# --------------------------------------------------------------------------
# schedule records
# --------------------------------------------------------------------------

@dataclass
class MoveArc:
    id: int
    index: int            # schedule index of the owning task arc
    role: str             # approach | carry | retreat
    robot: int
    carry: int            # carried object id or -1
    element: tuple
    path: np.ndarray      # (m, 2) effector waypoints
    times: np.ndarray     # (m,) relative time stamps, times[0] == 0
    statics: list = field(default_factory=list, repr=False)
    signature: str = ""
    task_arc: int = -1

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def start(self) -> tuple:
        return (float(self.path[0][0]), float(self.path[0][1]))

    @property
    def end(self) -> tuple:
        return (float(self.path[-1][0]), float(self.path[-1][1]))

    def to_dict(self) -> dict:
        return {"id": self.id, "index": self.index, "role": self.role, "robot": self.robot,
                "carry": self.carry, "element": list(self.element), "signature": self.signature,
                "path": self.path.tolist(), "times": self.times.tolist()}


@dataclass
class TransitionArc:
    index: int
    task_arc: int
    action: str
    robots: tuple
    obj: int
    point: tuple
    signature: str = ""

    def to_dict(self) -> dict:
        return {"index": self.index, "task_arc": self.task_arc, "action": self.action,
                "robots": list(self.robots), "obj": self.obj, "point": list(self.point),
                "signature": self.signature}


@dataclass
class OptimisticSchedule:
    anchored: AnchoredSchedule
    moves: list[MoveArc]
    transitions: dict[int, TransitionArc]
    pre: dict[int, list[int]]     # schedule index -> move ids before the transition
    post: dict[int, list[int]]    # schedule index -> move ids after it

    def to_dict(self) -> dict:
        return {"moves": [m.to_dict() for m in self.moves],
                "transitions": [self.transitions[k].to_dict() for k in sorted(self.transitions)]}


@dataclass
class TaskConstraintFeedback:
    constraint: TaskConstraint
    index: int
    reason: str
    blocker: Optional[tuple] = None

    def to_dict(self, ts: Optional[TaskSpace] = None) -> dict:
        return {"constraint": self.constraint.to_dict(ts), "index": self.index, "reason": self.reason,
                "blocker": list(self.blocker) if self.blocker else None}


@dataclass(frozen=True)
class MotionConstraint:
    """Collision region scoped to a pair of task-arc signatures."""
    pair: tuple
    center: tuple
    radius: float

    def applies(self, signature: str) -> bool:
        return signature in self.pair

    def shape(self) -> Shape:
        return disc(self.center, self.radius, "region")

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "center": list(self.center), "radius": self.radius}


# --------------------------------------------------------------------------
# single move planning
# --------------------------------------------------------------------------

def truncated_arm(base, tip, r: float, cut: float, label: str = "") -> Optional[Shape]:
    """Arm capsule with the last ``cut`` of its length removed (handover contact zone)."""
    b = np.asarray(base, dtype=float)
    t = np.asarray(tip, dtype=float)
    L = float(np.linalg.norm(t - b))
    if L <= cut:
        return None
    end = b + (t - b) * (L - cut) / L
    return capsule(b, end, r, label)


def handover_cut(world: World, obj: int) -> float:
    r_arm = max(r.r_arm for r in world.robots)
    return 2.0 * (r_arm + world.objects[obj].radius)


def region_shapes(cm, signature: str, a, b) -> list[Shape]:
    out = []
    for c in cm or ():
        if not c.applies(signature):
            continue
        ctr = np.asarray(c.center)
        if np.linalg.norm(np.asarray(a) - ctr) < c.radius or np.linalg.norm(np.asarray(b) - ctr) < c.radius:
            continue  # an anchor inside the region cannot be avoided
        out.append(c.shape())
    return out


def smooth_path(pts: np.ndarray, ok) -> np.ndarray:
    """Greedy shortcutting: jump to the farthest waypoint reachable in a straight line."""
    if len(pts) <= 2:
        return pts
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not ok(pts[i], pts[j]):
            j -= 1
        out.append(pts[j])
        i = j
    return np.asarray(out)


def plan_move(store: MotionStore, key: tuple, a, b, statics: list[Shape], rng: np.random.Generator,
              repair: bool = True) -> PathResult:
    rm = store.roadmap(key)
    ctx = store.context(key, statics)
    p = store.params
    res = lazy_path(rm, a, b, ctx, rng, p.max_iters, p.repair_rounds if repair else 0, p.n_local, p.n_global)
    if res.ok and p.smooth and len(res.path) > 2:
        def ok(qa, qb):
            return rm.base_check(qa, qb) and (ctx is None or ctx.check(qa, qb))
        res.path = smooth_path(res.path, ok)
    return res


def timed(path: np.ndarray, v: float) -> np.ndarray:
    if len(path) < 2:
        return np.zeros(len(path))
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg) / v])


def anchor_clear(world: World, robot: RobotModel, point, carry_r: float, statics: list[Shape] = ()) -> bool:
    body = [capsule(robot.base, point, robot.r_arm)]
    if carry_r > 0:
        body.append(disc(point, carry_r))
    for w in world.wall_shapes():
        if any(collides(s, w) for s in body):
            return False
    return not any(collides(s, o) for s in body for o in statics)


def _tail_object_vertex(ts: TaskSpace, aid: int) -> int:
    arc = ts.arc(aid)
    for vid in sorted(ts.graph.tail(aid)):
        v = ts.vertex(vid)
        if v.kind in (OBJECT_AT, HOLDING) and v.obj == arc.obj:
            return vid
    return min(ts.graph.tail(aid))


def _arc_feedback(ts: TaskSpace, aid: int, idx: int, reason: str) -> TaskConstraintFeedback:
    c = TaskConstraint(FRONTIER, _tail_object_vertex(ts, aid), blocked_head_vertex(ts, aid), f"motion:{reason}")
    return TaskConstraintFeedback(c, idx, reason)


def _blame(store, key, a, b, statics_tagged, rng) -> Optional[tuple]:
    """First tagged static hit by a walls-only path, or None when walls alone block."""
    res = plan_move(store, key, a, b, [], rng)
    if not res.ok:
        return None
    robot = store.world.robots[key[1]]
    carry_r = store.carry_radius(key)
    pts = np.vstack([densify(p, q, store.ds) for p, q in zip(res.path[:-1], res.path[1:])]) \
        if len(res.path) > 1 else res.path
    for q in pts:
        body = [capsule(robot.base, q, robot.r_arm)] + ([disc(q, carry_r)] if carry_r > 0 else [])
        for ent, shape, vid in statics_tagged:
            if any(collides(s, shape, tol=-store.margin) for s in body):
                return ent, shape, vid
    return None


def _feedback_for_failure(ts, store, aid, idx, key, a, b, tagged, rng, what) -> TaskConstraintFeedback:
    hit = _blame(store, key, a, b, tagged, rng)
    if hit is None:
        return _arc_feedback(ts, aid, idx, f"{what}-walls")
    ent, shape, vid = hit
    c = TaskConstraint(FRONTIER, vid, blocked_head_vertex(ts, aid), f"motion:{what}-static")
    return TaskConstraintFeedback(c, idx, f"{what} blocked by {ent[0]} {ent[1]}", ent)


def query_motion_plan(ts: TaskSpace, anchored: AnchoredSchedule, store: MotionStore, cm: list,
                      rng: np.random.Generator) -> Union[OptimisticSchedule, TaskConstraintFeedback]:
    """Trace the anchored schedule through the element roadmaps (lazy validation)."""
    world = ts.world
    geos = replay_geometry(ts, anchored)
    cur = {r.id: r.base for r in world.robots}
    moves: list[MoveArc] = []
    transitions: dict[int, TransitionArc] = {}
    pre: dict[int, list[int]] = {}
    post: dict[int, list[int]] = {}

    def tagged(geo: FrontierGeometry, ex_r, ex_o):
        return geo.statics(world, ex_r, ex_o)

    def make(idx, aid, role, robot, carry, res, statics):
        arc = ts.arc(aid)
        m = MoveArc(len(moves), idx, role, robot, carry, element_key(robot, carry), res.path,
                    timed(res.path, world.robots[robot].v), statics, arc.signature, aid)
        moves.append(m)
        return m.id

    for idx, aid in enumerate(anchored.schedule.arcs):
        anchor = anchored.anchors.get(idx)
        if anchor is None:
            continue
        arc = ts.arc(aid)
        geo, after = geos[idx], geos[idx + 1]
        j = arc.obj
        r_obj = world.objects[j].radius
        sig = arc.signature

        if arc.action in (PICK, PLACE):
            i = arc.robots[0]
            robot = world.robots[i]
            p = anchor.point
            carry_r = r_obj if arc.action == PLACE else 0.0
            if not anchor_clear(world, robot, p, carry_r):
                return _arc_feedback(ts, aid, idx, f"{arc.action.lower()}-anchor-wall")
            t_in = tagged(geo, {i}, {j})
            key_in = element_key(i, j if arc.action == PLACE else -1)
            st_in = [s for _, s, _ in t_in]
            res = plan_move(store, key_in, cur[i], p, st_in + region_shapes(cm, sig, cur[i], p), rng)
            if not res.ok:
                return _feedback_for_failure(ts, store, aid, idx, key_in, cur[i], p, t_in, rng,
                                             APPROACH if arc.action == PICK else CARRY)
            ids = [make(idx, aid, APPROACH if arc.action == PICK else CARRY, i,
                        j if arc.action == PLACE else -1, res, st_in)]
            pre[idx] = ids
            post[idx] = []
            if arc.action == PLACE:
                t_out = tagged(after, {i}, {j})
                st_out = [s for _, s, _ in t_out]
                res = plan_move(store, element_key(i), p, robot.base,
                                st_out + region_shapes(cm, sig, p, robot.base), rng)
                if not res.ok:
                    return _feedback_for_failure(ts, store, aid, idx, element_key(i), p, robot.base, t_out,
                                                 rng, RETREAT)
                post[idx] = [make(idx, aid, RETREAT, i, -1, res, st_out)]
                cur[i] = robot.base
            else:
                cur[i] = p
            store.add_transition(aid, p)
            transitions[idx] = TransitionArc(idx, aid, arc.action, arc.robots, j, tuple(p), sig)
            continue

        # handover
        g, rcv = arc.robots
        rg, rr = world.robots[g], world.robots[rcv]
        t_in = tagged(geo, {g, rcv}, {j})
        st_in = [s for _, s, _ in t_in]
        cut = handover_cut(world, j)
        h = anchor.point
        ok = False
        fail = None
        for attempt in range(store.params.handover_retries + 1):
            if attempt > 0 or not (anchor_clear(world, rg, h, r_obj, st_in) and anchor_clear(world, rr, h, 0.0, st_in)):
                found = False
                for _ in range(store.params.n_t):
                    try:
                        cand, clear = sample_handover_point(world, g, rcv, j, rng, 1, extra=tuple(st_in))
                    except NoIntersectionError:
                        break
                    if clear and anchor_clear(world, rg, cand, r_obj, st_in) and anchor_clear(world, rr, cand, 0.0, st_in):
                        h, found = cand, True
                        break
                if not found:
                    fail = _arc_feedback(ts, aid, idx, "handover-resampling-exhausted")
                    break
            anchor.point = h
            res_g = plan_move(store, element_key(g, j), cur[g], h, st_in + region_shapes(cm, sig, cur[g], h), rng)
            res_r = plan_move(store, element_key(rcv), rr.base, h, st_in + region_shapes(cm, sig, rr.base, h), rng) \
                if res_g.ok else None
            t_out = tagged(after, {g, rcv}, {j})
            st_out = [s for _, s, _ in t_out]
            arm = truncated_arm(rr.base, h, rr.r_arm, cut, f"robot{rcv}")
            if arm is not None:
                st_out = st_out + [arm]
            res_back = plan_move(store, element_key(g), h, rg.base, st_out + region_shapes(cm, sig, h, rg.base), rng) \
                if (res_r is not None and res_r.ok) else None
            if res_back is not None and res_back.ok:
                ok = True
                break
            if not res_g.ok:
                fail = _feedback_for_failure(ts, store, aid, idx, element_key(g, j), cur[g], h, t_in, rng, CARRY)
            elif not res_r.ok:
                fail = _feedback_for_failure(ts, store, aid, idx, element_key(rcv), rr.base, h, t_in, rng, APPROACH)
            else:
                fail = _feedback_for_failure(ts, store, aid, idx, element_key(g), h, rg.base, t_out, rng, RETREAT)
        if not ok:
            return fail
        pre[idx] = [make(idx, aid, CARRY, g, j, res_g, st_in), make(idx, aid, APPROACH, rcv, -1, res_r, st_in)]
        post[idx] = [make(idx, aid, RETREAT, g, -1, res_back, st_out)]
        cur[g] = rg.base
        cur[rcv] = h
        store.add_transition(aid, h)
        transitions[idx] = TransitionArc(idx, aid, HANDOVER, arc.robots, j, tuple(h), sig)

    return OptimisticSchedule(anchored, moves, transitions, pre, post)

