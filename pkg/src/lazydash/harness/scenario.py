"""Scenario files: JSON documents describing a planar workcell."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any

from ..geometry import ObjectModel, RobotModel, Surface, Wall, World, disc, stable_pose_valid

FORMAT = "lazydash-scenario/1"


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario input."""


@dataclass
class Scenario:
    name: str
    world: World
    meta: dict = field(default_factory=dict)
    staging: dict = field(default_factory=dict)  # object id -> pre-registered via pose

    def to_dict(self) -> dict:
        w = self.world
        return {
            "format": FORMAT,
            "name": self.name,
            "bounds": list(w.bounds),
            "wall_halfwidth": w.wall_halfwidth,
            "walls": [[list(x.a), list(x.b)] for x in w.walls],
            "surfaces": [{"name": s.name, "xmin": s.xmin, "ymin": s.ymin, "xmax": s.xmax, "ymax": s.ymax}
                         for s in w.surfaces],
            "robots": [{"base": list(r.base), "reach": r.reach, "r_arm": r.r_arm, "v": r.v} for r in w.robots],
            "objects": [dict({"radius": o.radius, "start": list(o.start), "goal": list(o.goal)},
                             **({"via": o.via} if o.via is not None else {})) for o in w.objects],
            "staging": {str(k): list(v) for k, v in sorted(self.staging.items())},
            "meta": self.meta,
        }


def _num(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioError(f"{what} must be a number")
    return float(x)


def _pt(x, what: str) -> tuple[float, float]:
    if not isinstance(x, (list, tuple)) or len(x) != 2:
        raise ScenarioError(f"{what} must be a 2-element list")
    return (_num(x[0], what), _num(x[1], what))


def _need(d: dict, key: str, where: str) -> Any:
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(f"{where}: missing '{key}'")
    return d[key]


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object")
    fmt = d.get("format", FORMAT)
    if fmt != FORMAT:
        raise ScenarioError(f"unsupported format {fmt!r}")
    b = _need(d, "bounds", "scenario")
    if not isinstance(b, list) or len(b) != 4:
        raise ScenarioError("bounds must be [xmin, ymin, xmax, ymax]")
    bounds = tuple(_num(x, "bounds") for x in b)
    if not (bounds[0] < bounds[2] and bounds[1] < bounds[3]):
        raise ScenarioError("bounds are empty")
    walls = [Wall(_pt(w[0], "wall"), _pt(w[1], "wall")) for w in d.get("walls", [])]
    surfaces = []
    for s in _need(d, "surfaces", "scenario"):
        vals = [_num(_need(s, k, "surface"), f"surface.{k}") for k in ("xmin", "ymin", "xmax", "ymax")]
        if not (vals[0] < vals[2] and vals[1] < vals[3]):
            raise ScenarioError(f"surface {s.get('name')} is empty")
        surfaces.append(Surface(str(_need(s, "name", "surface")), *vals))
    names = [s.name for s in surfaces]
    if len(set(names)) != len(names):
        raise ScenarioError("surface names must be unique")
    robots = []
    for i, r in enumerate(_need(d, "robots", "scenario")):
        robots.append(RobotModel(i, _pt(_need(r, "base", "robot"), "robot.base"),
                                 _num(_need(r, "reach", "robot"), "robot.reach"),
                                 _num(_need(r, "r_arm", "robot"), "robot.r_arm"),
                                 _num(r.get("v", 1.0), "robot.v")))
    if not robots:
        raise ScenarioError("scenario needs at least one robot")
    if any(r.v <= 0 for r in robots):
        raise ScenarioError("robot speed must be positive")
    objects = []
    for j, o in enumerate(_need(d, "objects", "scenario")):
        via = o.get("via")
        if via is not None and via not in names:
            raise ScenarioError(f"object {j}: unknown via surface {via!r}")
        objects.append(ObjectModel(j, _num(_need(o, "radius", "object"), "object.radius"),
                                   _pt(_need(o, "start", "object"), "object.start"),
                                   _pt(_need(o, "goal", "object"), "object.goal"), via))
    try:
        world = World(bounds, walls, _num(d.get("wall_halfwidth", 0.02), "wall_halfwidth"), surfaces, robots, objects)
    except ValueError as e:
        raise ScenarioError(str(e)) from e
    for o in objects:
        others_start = [x for x in objects if x.id != o.id]
        starts = [disc(x.start, x.radius) for x in others_start]
        goals = [disc(x.goal, x.radius) for x in others_start]
        if not stable_pose_valid(world, o.id, o.start, starts):
            raise ScenarioError(f"object {o.id}: start pose is not stable")
        if not stable_pose_valid(world, o.id, o.goal, goals):
            raise ScenarioError(f"object {o.id}: goal pose is not stable")
    staging = {}
    for k, v in d.get("staging", {}).items():
        j = int(k)
        if not 0 <= j < len(objects) or objects[j].via is None:
            raise ScenarioError(f"staging pose for object {k} without a via surface")
        p = _pt(v, "staging")
        if not world.surface(objects[j].via).contains(p, objects[j].radius):
            raise ScenarioError(f"staging pose for object {k} is off its via surface")
        staging[j] = p
    return Scenario(str(d.get("name", "scenario")), world, dict(d.get("meta", {})), staging)


def load_scenario(path) -> Scenario:
    try:
        text = FsPath(path).read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e}") from e
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON ({e})") from e
    return scenario_from_dict(d)


def save_scenario(sc: Scenario, path) -> None:
    FsPath(path).write_text(json.dumps(sc.to_dict(), indent=2, sort_keys=True) + "\n")
