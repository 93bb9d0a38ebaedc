"""Vertex-level feasibility check of an unvalidated schedule.

Transition configurations (grasp, release, handover) are assigned to every
arc, then traced through the schedule against the static frontier geometry.
Each conflict is routed to pose resampling, a task constraint, or a request
to expand the task space with a move-out pose.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .geometry import (Shape, World, capsule, collides, disc, reach_intersection_nonempty,
                       sample_in_lens, sample_stable_pose, stable_pose_valid, wall_obstacles,
                       body_clear)
from .task_query import FRONTIER, ConstraintSet, TaskConstraint, UnvalidatedSchedule
from .task_space import (HANDOVER, HOLDING, OBJECT_AT, PICK, PLACE, ROBOT_FREE, TaskSpace,
                         TaskVertex)

OBJECT_OBJECT = "ObjectObject"
ROBOT_OBJECT = "RobotObject"
ROBOT_ROBOT = "RobotRobot"


class NoIntersectionError(RuntimeError):
    pass


class UnresolvableTaskConflict(RuntimeError):
    pass


@dataclass
class Anchor:
    index: int           # position in the schedule
    arc: int             # task arc id
    action: str
    robots: tuple
    obj: int
    point: tuple         # object center at the transition; every effector sits here
    pose: int = -1       # pose id for pick/place

    def to_dict(self) -> dict:
        return {"index": self.index, "arc": self.arc, "action": self.action,
                "robots": list(self.robots), "obj": self.obj, "point": list(self.point),
                "pose": self.pose}


@dataclass
class AnchoredSchedule:
    schedule: UnvalidatedSchedule
    anchors: dict[int, Anchor]  # schedule index -> anchor (transition arcs only)

    def to_dict(self) -> dict:
        return {"anchors": [self.anchors[i].to_dict() for i in sorted(self.anchors)]}


def handover_wall_clear(world: World, giver: int, receiver: int, obj: int, h) -> bool:
    walls = wall_obstacles(world)
    if len(walls) == 0:
        return True
    r_obj = world.objects[obj].radius
    gi, rk = world.robots[giver], world.robots[receiver]
    return bool(body_clear(gi.base, [h], gi.r_arm, r_obj, walls)[0]
                and body_clear(rk.base, [h], rk.r_arm, 0.0, walls)[0])


def sample_handover_point(world: World, giver: int, receiver: int, obj: int, rng: np.random.Generator,
                          attempts: int = 50, extra: tuple = ()) -> tuple[tuple, bool]:
    """Uniform point in the reach intersection; prefers wall-free (and ``extra``-free) points.

    Returns (point, clear). When no clear point is found within ``attempts``
    the last sample is returned with ``clear=False``.
    """
    ri, rk = world.robots[giver], world.robots[receiver]
    if not reach_intersection_nonempty(ri, rk):
        raise NoIntersectionError(f"robots {giver} and {receiver} have no reach intersection")
    last = None
    for _ in range(attempts):
        h = sample_in_lens(ri, rk, rng)
        if h is None:
            continue
        last = h
        if handover_wall_clear(world, giver, receiver, obj, h) and not _hits(world, giver, receiver, obj, h, extra):
            return h, True
    if last is None:
        raise NoIntersectionError(f"could not sample the reach intersection of {giver} and {receiver}")
    return last, False


def _hits(world, giver, receiver, obj, h, shapes) -> bool:
    if not shapes:
        return False
    r_obj = world.objects[obj].radius
    mine = [capsule(world.robots[giver].base, h, world.robots[giver].r_arm),
            capsule(world.robots[receiver].base, h, world.robots[receiver].r_arm),
            disc(h, r_obj)]
    return any(collides(a, b) for a in mine for b in shapes)


def assign_transition_configs(ts: TaskSpace, schedule: UnvalidatedSchedule, rng: np.random.Generator,
                              n_h: int = 50, previous: Optional[AnchoredSchedule] = None) -> AnchoredSchedule:
    """Explicit transition configs for every pick, place and handover arc.

    Handover points are reused from ``previous`` when the same arc sits at the
    same schedule index, so resampled points survive re-detection.
    """
    anchors = {}
    for idx, aid in enumerate(schedule.arcs):
        arc = ts.arc(aid)
        if arc.action in (PICK, PLACE):
            p = ts.poses.point(arc.obj, arc.poses[0])
            anchors[idx] = Anchor(idx, aid, arc.action, arc.robots, arc.obj, p, arc.poses[0])
        elif arc.action == HANDOVER:
            old = previous.anchors.get(idx) if previous is not None else None
            if old is not None and old.arc == aid:
                h = old.point
            else:
                h, _ = sample_handover_point(ts.world, arc.robots[0], arc.robots[1], arc.obj, rng, n_h)
            anchors[idx] = Anchor(idx, aid, arc.action, arc.robots, arc.obj, h)
    return AnchoredSchedule(schedule, anchors)


@dataclass
class TaskConflict:
    index: int
    kind: str
    moving: tuple        # ("robot", id) or ("object", id) engaged in the transition
    blocker: tuple       # entity at rest in the frontier
    moving_shape: Shape
    blocker_shape: Shape
    blocker_vertex: int  # frontier vertex covering the blocker
    blocked_vertex: int  # head vertex of the blocked arc

    def to_dict(self, ts: Optional[TaskSpace] = None) -> dict:
        d = {"index": self.index, "kind": self.kind, "moving": list(self.moving),
             "blocker": list(self.blocker), "moving_shape": self.moving_shape.to_dict(),
             "blocker_shape": self.blocker_shape.to_dict(),
             "blocker_vertex": self.blocker_vertex, "blocked_vertex": self.blocked_vertex}
        if ts is not None:
            d["blocker_label"] = ts.vertex(self.blocker_vertex).label()
            d["blocked_label"] = ts.vertex(self.blocked_vertex).label()
        return d


@dataclass
class FrontierGeometry:
    """Static geometry of a frontier: objects at rest, robots idle or holding."""
    objects: dict    # obj -> point (at rest)
    holding: dict    # robot -> (obj, point)
    vertex_of: dict  # entity -> frontier vertex id

    def statics(self, world: World, exclude_robots=(), exclude_objects=()) -> list[tuple[tuple, Shape, int]]:
        out = []
        for j, p in sorted(self.objects.items()):
            if j in exclude_objects:
                continue
            out.append((("object", j), disc(p, world.objects[j].radius, f"obj{j}"), self.vertex_of[("o", j)]))
        for r in world.robots:
            if r.id in exclude_robots:
                continue
            if r.id in self.holding:
                j, p = self.holding[r.id]
                vid = self.vertex_of[("r", r.id)]
                out.append((("robot", r.id), capsule(r.base, p, r.r_arm, f"robot{r.id}"), vid))
                if j not in exclude_objects:
                    out.append((("object", j), disc(p, world.objects[j].radius, f"obj{j}"), vid))
            else:
                out.append((("robot", r.id), disc(r.base, r.r_arm, f"robot{r.id}"), self.vertex_of[("r", r.id)]))
        return out


def initial_geometry(ts: TaskSpace) -> FrontierGeometry:
    objects = {o.id: ts.poses.point(o.id, 0) for o in ts.world.objects}
    vertex_of = {}
    for r in ts.world.robots:
        vertex_of[("r", r.id)] = ts.vid(ts.robot_free(r.id))
    for o in ts.world.objects:
        vertex_of[("o", o.id)] = ts.vid(ts.object_at(o.id, 0, 0))
    return FrontierGeometry(objects, {}, vertex_of)


def advance_geometry(ts: TaskSpace, geo: FrontierGeometry, aid: int, anchor: Optional[Anchor]) -> FrontierGeometry:
    arc = ts.arc(aid)
    objects = dict(geo.objects)
    holding = dict(geo.holding)
    vertex_of = dict(geo.vertex_of)
    for vid in ts.graph.head(aid):
        for ent in ts.vertex(vid).covers():
            vertex_of[ent] = vid
    if arc.action == PICK:
        objects.pop(arc.obj, None)
        holding[arc.robots[0]] = (arc.obj, anchor.point)
    elif arc.action == PLACE:
        holding.pop(arc.robots[0], None)
        objects[arc.obj] = anchor.point
    elif arc.action == HANDOVER:
        holding.pop(arc.robots[0], None)
        holding[arc.robots[1]] = (arc.obj, anchor.point)
    return FrontierGeometry(objects, holding, vertex_of)


def transition_shapes(ts: TaskSpace, anchor: Anchor) -> list[tuple[tuple, Shape]]:
    w = ts.world
    p = anchor.point
    r_obj = w.objects[anchor.obj].radius
    if anchor.action == PICK:
        r = w.robots[anchor.robots[0]]
        return [(("robot", r.id), capsule(r.base, p, r.r_arm, f"robot{r.id}"))]
    if anchor.action == PLACE:
        r = w.robots[anchor.robots[0]]
        return [(("robot", r.id), capsule(r.base, p, r.r_arm, f"robot{r.id}")),
                (("object", anchor.obj), disc(p, r_obj, f"obj{anchor.obj}"))]
    gi, rk = (w.robots[i] for i in anchor.robots)
    return [(("robot", gi.id), capsule(gi.base, p, gi.r_arm, f"robot{gi.id}")),
            (("robot", rk.id), capsule(rk.base, p, rk.r_arm, f"robot{rk.id}")),
            (("object", anchor.obj), disc(p, r_obj, f"obj{anchor.obj}"))]


def blocked_head_vertex(ts: TaskSpace, aid: int) -> int:
    """The head vertex a constraint should gate: the object-bearing one."""
    arc = ts.arc(aid)
    for vid in sorted(ts.graph.head(aid)):
        v = ts.vertex(vid)
        if v.kind in (HOLDING, OBJECT_AT) and v.obj == arc.obj:
            return vid
    return min(ts.graph.head(aid))


def _classify(moving: tuple, blocker: tuple) -> str:
    kinds = {moving[0], blocker[0]}
    if kinds == {"object"}:
        return OBJECT_OBJECT
    if kinds == {"robot"}:
        return ROBOT_ROBOT
    return ROBOT_OBJECT


def detect_task_conflicts(ts: TaskSpace, anchored: AnchoredSchedule) -> list[TaskConflict]:
    """Walk the schedule from the source and collect every vertex-vertex conflict."""
    sched = anchored.schedule
    conflicts = []
    geo = None
    for idx, aid in enumerate(sched.arcs):
        anchor = anchored.anchors.get(idx)
        if geo is None:
            geo = initial_geometry(ts)
            continue  # source arc: geometry initialized at its head
        if anchor is not None:
            ex_r = set(anchor.robots)
            ex_o = {anchor.obj}
            blocked = blocked_head_vertex(ts, aid)
            for (ent_b, sh_b, vid_b) in geo.statics(ts.world, ex_r, ex_o):
                for ent_m, sh_m in transition_shapes(ts, anchor):
                    if collides(sh_m, sh_b):
                        conflicts.append(TaskConflict(idx, _classify(ent_m, ent_b), ent_m, ent_b,
                                                      sh_m, sh_b, vid_b, blocked))
        geo = advance_geometry(ts, geo, aid, anchor)
    return conflicts


def replay_geometry(ts: TaskSpace, anchored: AnchoredSchedule) -> list[FrontierGeometry]:
    """Frontier geometry before every schedule index (index 0 has none)."""
    out = [None]
    geo = initial_geometry(ts)
    for idx, aid in enumerate(anchored.schedule.arcs):
        if idx == 0:
            continue
        out.append(geo)
        geo = advance_geometry(ts, geo, aid, anchored.anchors.get(idx))
    out.append(geo)
    return out


# --------------------------------------------------------------------------
# resolution
# --------------------------------------------------------------------------

@dataclass
class ResampledPose:
    obj: int
    pose: int
    point: tuple


@dataclass
class ResampledHandover:
    index: int
    point: tuple


@dataclass
class NewConstraint:
    constraint: TaskConstraint


@dataclass
class ExpandTaskSpace:
    obj: int
    constraint: Optional[TaskConstraint] = None


Resolution = Union[ResampledPose, ResampledHandover, NewConstraint, ExpandTaskSpace]


def _vertex_entity(v: TaskVertex) -> Optional[tuple]:
    if v.kind in (OBJECT_AT, HOLDING):
        return ("object", v.obj)
    if v.kind == ROBOT_FREE:
        return ("robot", v.robot)
    return None


def creates_cycle(ts: TaskSpace, constraints: ConstraintSet, c: TaskConstraint) -> bool:
    """Mutual blocking between the two entities of ``c`` among frontier constraints."""
    a = _vertex_entity(ts.vertex(c.v_pre))
    b = _vertex_entity(ts.vertex(c.v_post))
    if a is None or b is None or a == b:
        return False
    for other in constraints:
        if other.kind != FRONTIER:
            continue
        if _vertex_entity(ts.vertex(other.v_pre)) == b and _vertex_entity(ts.vertex(other.v_post)) == a:
            return True
    return False


def _moveout_avoiding(ts: TaskSpace, obj: int, avoid: list[Shape], rng, attempts=100, prefer=None):
    world = ts.world
    clear = world.resolution  # keep move-outs off the inflated edge-check margin of their neighbours
    blocked = [disc(d.a, d.radius + clear) for d in ts.poses.anchor_discs(exclude=obj)] + list(avoid)
    # nor in the way of any arm reaching another object's start or goal
    for o in world.objects:
        if o.id == obj:
            continue
        for p in (o.start, o.goal):
            for r in world.robots:
                if r.reaches(p):
                    blocked.append(capsule(r.base, p, r.r_arm + clear))
    staging = {o.via for o in world.objects if o.via is not None}
    pref = world.surface_of(prefer) if prefer is not None else None
    if pref is not None and pref.name in staging:
        # staging poses only ever move within their staging surface
        options = [[pref]]
    else:
        general = [s for s in world.surfaces if s.name not in staging]
        options = ([[pref]] if pref is not None else []) + [general]
    for surf in options:
        for _ in range(4):
            p = sample_stable_pose(world, obj, blocked, rng, attempts, surf)
            if p is not None and any(r.reaches(p) for r in world.robots):
                return p
    return None


def constraint_for(ts: TaskSpace, conflict: TaskConflict, origin: str) -> TaskConstraint:
    return TaskConstraint(FRONTIER, conflict.blocker_vertex, conflict.blocked_vertex, origin)


def resolve_task_conflict(ts: TaskSpace, conflict: TaskConflict, anchored: AnchoredSchedule,
                          constraints: ConstraintSet, rng: np.random.Generator, n_h: int = 50) -> Resolution:
    world = ts.world
    aid = anchored.schedule.arcs[conflict.index]
    arc = ts.arc(aid)
    anchor = anchored.anchors[conflict.index]

    if arc.action == HANDOVER:
        h, ok = sample_handover_point(world, arc.robots[0], arc.robots[1], arc.obj, rng, n_h,
                                      extra=(conflict.blocker_shape,))
        if ok:
            return ResampledHandover(conflict.index, h)

    if conflict.kind == OBJECT_OBJECT and conflict.blocker[0] == "object":
        bv = ts.vertex(conflict.blocker_vertex)
        if bv.kind == OBJECT_AT:
            mine = ts.poses.get(arc.obj, anchor.pose) if arc.action == PLACE else None
            theirs = ts.poses.get(bv.obj, bv.pose)
            # the later placement is the more flexible one
            for obj, pose, other in ((arc.obj, mine, conflict.blocker_shape),
                                     (bv.obj, theirs, conflict.moving_shape)):
                if pose is not None and pose.provenance == "moveout":
                    p = _moveout_avoiding(ts, obj, [other], rng, prefer=pose.point)
                    if p is not None:
                        return ResampledPose(obj, pose.id, p)
            if (mine is not None and ts.poses.canonical(arc.obj, mine.id) == ts.poses.canonical(arc.obj, 1)
                    and ts.poses.canonical(bv.obj, theirs.id) == ts.poses.canonical(bv.obj, 1)):
                raise UnresolvableTaskConflict(
                    f"goal poses of objects {arc.obj} and {bv.obj} overlap")

    c = constraint_for(ts, conflict, f"task-conflict:{conflict.kind}")
    if creates_cycle(ts, constraints, c):
        blocker_obj = ts.vertex(c.v_pre).obj
        if blocker_obj < 0:
            blocker_obj = arc.obj
        return ExpandTaskSpace(blocker_obj, c)
    return NewConstraint(c)


def sample_moveout(ts: TaskSpace, obj: int, rng: np.random.Generator, attempts: int = 100):
    """Move-out pose in the surface of the object's start first, any surface second."""
    start = ts.poses.point(obj, 0)
    return _moveout_avoiding(ts, obj, [], rng, attempts, prefer=start)
