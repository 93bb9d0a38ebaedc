"""Task space hypergraph: robot, object-at-pose and robot-holding-object elements.

Transitions are pick, place and handover hyperarcs plus one source and one
sink hyperarc. The representation starts with start/goal poses only and is
expanded with move-out poses on request.

Objects with a ``via`` surface carry a stage bit (0 before visiting the via
surface, 1 after); objects without one always have stage 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (Point, World, disc, grasp_config, reach_intersection_nonempty,
                       stable_pose_valid)
from .hypergraph import Hypergraph

ROBOT_FREE = "RobotFree"
OBJECT_AT = "ObjectAt"
HOLDING = "Holding"
SOURCE = "Source"
SINK = "Sink"

PICK = "Pick"
PLACE = "Place"
HANDOVER = "Handover"
SOURCE_ARC = "SourceArc"
SINK_ARC = "SinkArc"

ACTION_RANK = {PICK: 0, PLACE: 1, HANDOVER: 2, SOURCE_ARC: 3, SINK_ARC: 4}


class UnsolvableInputError(ValueError):
    pass


class InvalidPoseError(ValueError):
    pass


@dataclass(frozen=True)
class TaskVertex:
    kind: str
    robot: int = -1
    obj: int = -1
    pose: int = -1
    stage: int = 0

    @property
    def constraint_tag(self) -> str:
        return {ROBOT_FREE: "h_c", OBJECT_AT: "s_c", HOLDING: "f_c"}.get(self.kind, "")

    def covers(self) -> tuple[tuple[str, int], ...]:
        if self.kind == ROBOT_FREE:
            return (("r", self.robot),)
        if self.kind == OBJECT_AT:
            return (("o", self.obj),)
        if self.kind == HOLDING:
            return (("r", self.robot), ("o", self.obj))
        return ()

    def label(self) -> str:
        st = f"/s{self.stage}" if self.stage else ""
        if self.kind == ROBOT_FREE:
            return f"R{self.robot}"
        if self.kind == OBJECT_AT:
            return f"O{self.obj}@p{self.pose}{st}"
        if self.kind == HOLDING:
            return f"R{self.robot}+O{self.obj}{st}"
        return self.kind

    def to_dict(self) -> dict:
        return {"kind": self.kind, "robot": self.robot, "obj": self.obj, "pose": self.pose,
                "stage": self.stage, "label": self.label()}


@dataclass(frozen=True)
class TaskArc:
    action: str
    robots: tuple[int, ...] = ()
    obj: int = -1
    poses: tuple[int, ...] = ()
    stage: int = 0

    @property
    def signature(self) -> str:
        if self.action == PICK:
            return f"Pick(R{self.robots[0]},O{self.obj}@p{self.poses[0]},s{self.stage})"
        if self.action == PLACE:
            return f"Place(R{self.robots[0]},O{self.obj}->p{self.poses[0]},s{self.stage})"
        if self.action == HANDOVER:
            return f"Handover(R{self.robots[0]}->R{self.robots[1]},O{self.obj},s{self.stage})"
        return self.action

    def sort_key(self) -> tuple:
        return (ACTION_RANK[self.action], self.robots, self.obj, self.poses, self.stage)

    def to_dict(self) -> dict:
        return {"action": self.action, "robots": list(self.robots), "obj": self.obj,
                "poses": list(self.poses), "stage": self.stage, "signature": self.signature}


@dataclass
class Pose:
    id: int
    point: Point
    provenance: str  # start | goal | moveout
    alias: Optional[int] = None  # goal coincident with start shares its vertex
    via: bool = False            # lies on the object's via surface

    def to_dict(self) -> dict:
        return {"id": self.id, "point": list(self.point), "provenance": self.provenance,
                "alias": self.alias, "via": self.via}


class PoseTable:
    """Registered stable poses per object; start is id 0 and goal id 1."""

    def __init__(self, world: World):
        self.world = world
        self.poses: dict[int, list[Pose]] = {}
        for o in world.objects:
            start = Pose(0, tuple(map(float, o.start)), "start")
            goal = Pose(1, tuple(map(float, o.goal)), "goal")
            if o.via is None and np.allclose(o.start, o.goal, atol=1e-9):
                goal.alias = 0
            self.poses[o.id] = [start, goal]

    def get(self, obj: int, pose: int) -> Pose:
        return self.poses[obj][pose]

    def point(self, obj: int, pose: int) -> Point:
        return self.poses[obj][pose].point

    def canonical(self, obj: int, pose: int) -> int:
        a = self.poses[obj][pose].alias
        return pose if a is None else a

    def register(self, obj: int, point, provenance: str = "moveout") -> int:
        pid = len(self.poses[obj])
        o = self.world.objects[obj]
        via = False
        if o.via is not None:
            via = self.world.surface(o.via).contains(point, o.radius)
        self.poses[obj].append(Pose(pid, (float(point[0]), float(point[1])), provenance, None, via))
        return pid

    def move(self, obj: int, pose: int, point) -> None:
        p = self.poses[obj][pose]
        if p.provenance != "moveout":
            raise InvalidPoseError("only move-out poses may be resampled")
        p.point = (float(point[0]), float(point[1]))

    def moveouts(self, obj: int) -> list[Pose]:
        return [p for p in self.poses[obj] if p.provenance == "moveout"]

    def anchor_discs(self, exclude: int) -> list:
        """Start/goal discs of all objects except ``exclude``."""
        out = []
        for o in self.world.objects:
            if o.id == exclude:
                continue
            for p in self.poses[o.id][:2]:
                out.append(disc(p.point, o.radius, f"obj{o.id}"))
        return out

    def to_dict(self) -> dict:
        return {str(k): [p.to_dict() for p in v] for k, v in self.poses.items()}


def reachable_robots(world: World, p) -> set[int]:
    return {r.id for r in world.robots if r.reaches(p)}


class TaskSpace:
    """The task space hypergraph H_T together with its vertex/arc indices."""

    def __init__(self, world: World, pose_table: PoseTable):
        self.world = world
        self.poses = pose_table
        self.graph = Hypergraph()
        self._vid: dict[TaskVertex, int] = {}
        self._arc_ids: dict[TaskArc, int] = {}
        self.source = self._vertex(TaskVertex(SOURCE))
        self.sink = self._vertex(TaskVertex(SINK))
        self.source_arc = -1
        self.sink_arc = -1

    # -- vertices -----------------------------------------------------------
    def _vertex(self, v: TaskVertex) -> int:
        vid = self._vid.get(v)
        if vid is None:
            vid = self.graph.add_vertex(v)
            self._vid[v] = vid
        return vid

    def vid(self, v: TaskVertex) -> int:
        return self._vid[v]

    def has(self, v: TaskVertex) -> bool:
        return v in self._vid

    def vertex(self, vid: int) -> TaskVertex:
        return self.graph.vertex(vid)

    def arc(self, aid: int) -> TaskArc:
        return self.graph.arc(aid)

    def robot_free(self, i: int) -> TaskVertex:
        return TaskVertex(ROBOT_FREE, robot=i)

    def object_at(self, j: int, pose: int, stage: int = 0) -> TaskVertex:
        return TaskVertex(OBJECT_AT, obj=j, pose=self.poses.canonical(j, pose), stage=stage)

    def holding(self, i: int, j: int, stage: int = 0) -> TaskVertex:
        return TaskVertex(HOLDING, robot=i, obj=j, stage=stage)

    # -- stage rules --------------------------------------------------------
    def stages(self, j: int) -> tuple[int, ...]:
        return (0, 1) if self.world.objects[j].via is not None else (0,)

    def final_stage(self, j: int) -> int:
        return self.stages(j)[-1]

    def pose_stages(self, j: int, pose: Pose) -> tuple[int, ...]:
        """Stages an object may have while resting at ``pose``."""
        if self.world.objects[j].via is None:
            return (0,)
        if pose.provenance == "start":
            return (0,)
        if pose.provenance == "goal":
            return (1,)
        return (1,) if pose.via else (0, 1)

    def place_stage(self, j: int, pose: Pose, stage: int) -> Optional[int]:
        """Stage after placing (holding at ``stage``) onto ``pose``; None if illegal."""
        if self.world.objects[j].via is None:
            return 0
        new = 1 if pose.via else stage
        return new if new in self.pose_stages(j, pose) else None

    # -- construction -------------------------------------------------------
    def holders(self) -> dict[int, list[int]]:
        """Robots that can hold each object: reach a registered pose, closed under handover."""
        out = {}
        robots = self.world.robots
        for o in self.world.objects:
            hold = {r.id for r in robots for p in self.poses.poses[o.id] if r.reaches(p.point)}
            frontier = list(sorted(hold))
            while frontier:
                i = frontier.pop()
                for r in robots:
                    if r.id not in hold and reach_intersection_nonempty(robots[i], r):
                        hold.add(r.id)
                        frontier.append(r.id)
            out[o.id] = sorted(hold)
        return out

    def check_solvable(self) -> None:
        robots = self.world.robots
        for o in self.world.objects:
            reach = {r.id for r in robots if r.reaches(o.start)}
            frontier = list(sorted(reach))
            while frontier:
                i = frontier.pop()
                for r in robots:
                    if r.id not in reach and reach_intersection_nonempty(robots[i], r):
                        reach.add(r.id)
                        frontier.append(r.id)
            if not any(robots[i].reaches(o.goal) for i in reach):
                raise UnsolvableInputError(
                    f"object {o.id}: goal not reachable by any robot connected to its start")

    def _add_arc(self, arc: TaskArc, tail, head) -> int:
        aid = self._arc_ids.get(arc)
        if aid is None:
            aid = self.graph.add_hyperarc([self._vertex(v) for v in tail],
                                          [self._vertex(v) for v in head], arc)
            self._arc_ids[arc] = aid
        return aid

    def sync(self) -> None:
        """Add every vertex/arc implied by the closure rules that is not present yet."""
        w = self.world
        robots = w.robots
        for r in robots:
            self._vertex(self.robot_free(r.id))
        for o in w.objects:
            for p in self.poses.poses[o.id]:
                if p.alias is not None:
                    continue
                for s in self.pose_stages(o.id, p):
                    self._vertex(TaskVertex(OBJECT_AT, obj=o.id, pose=p.id, stage=s))
        holders = self.holders()
        for o in w.objects:
            for i in holders[o.id]:
                for s in self.stages(o.id):
                    self._vertex(self.holding(i, o.id, s))
        if self.source_arc < 0:
            head = [self.robot_free(r.id) for r in robots] + [self.object_at(o.id, 0, 0) for o in w.objects]
            self.source_arc = self._add_arc(TaskArc(SOURCE_ARC), [TaskVertex(SOURCE)], head)
            tail = [self.robot_free(r.id) for r in robots] + \
                   [self.object_at(o.id, 1, self.final_stage(o.id)) for o in w.objects]
            self.sink_arc = self._add_arc(TaskArc(SINK_ARC), tail, [TaskVertex(SINK)])
        for r in robots:
            for o in w.objects:
                if r.id not in holders[o.id]:
                    continue
                for p in self.poses.poses[o.id]:
                    if p.alias is not None or grasp_config(r, p.point) is None:
                        continue
                    for s in self.pose_stages(o.id, p):
                        self._add_arc(TaskArc(PICK, (r.id,), o.id, (p.id,), s),
                                      [self.robot_free(r.id), self.object_at(o.id, p.id, s)],
                                      [self.holding(r.id, o.id, s)])
                    for s in self.stages(o.id):
                        s2 = self.place_stage(o.id, p, s)
                        if s2 is None:
                            continue
                        self._add_arc(TaskArc(PLACE, (r.id,), o.id, (p.id,), s),
                                      [self.holding(r.id, o.id, s)],
                                      [self.robot_free(r.id), self.object_at(o.id, p.id, s2)])
        for o in w.objects:
            hs = holders[o.id]
            for i in hs:
                for k in hs:
                    if i == k or not reach_intersection_nonempty(robots[i], robots[k]):
                        continue
                    for s in self.stages(o.id):
                        self._add_arc(TaskArc(HANDOVER, (i, k), o.id, (), s),
                                      [self.holding(i, o.id, s), self.robot_free(k)],
                                      [self.robot_free(i), self.holding(k, o.id, s)])

    def expand_with_pose(self, obj: int, point, provenance: str = "moveout") -> int:
        """Register a new stable pose for ``obj`` and add the arcs it enables."""
        if not stable_pose_valid(self.world, obj, point, self.poses.anchor_discs(exclude=obj)):
            raise InvalidPoseError(f"pose {point} for object {obj} fails the stability predicate")
        pid = self.poses.register(obj, point, provenance)
        self.sync()
        return pid

    def counts(self) -> tuple[int, int]:
        return self.graph.counts()

    # -- geometry helpers used by the query heuristic ------------------------
    def location(self, vid: int) -> Optional[Point]:
        v = self.vertex(vid)
        if v.kind == OBJECT_AT:
            return self.poses.point(v.obj, v.pose)
        if v.kind in (HOLDING, ROBOT_FREE):
            return self.world.robots[v.robot].base
        return None

    def to_dict(self) -> dict:
        d = self.graph.to_dict()
        d["poses"] = self.poses.to_dict()
        return d


def build_task_hypergraph(world: World, pose_table: Optional[PoseTable] = None,
                          check: bool = True) -> TaskSpace:
    ts = TaskSpace(world, pose_table or PoseTable(world))
    if check:
        ts.check_solvable()
    ts.sync()
    return ts
