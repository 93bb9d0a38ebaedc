"""Planar scenario families.

All families share one body scale: arms of radius 0.04, objects of radius
0.05, unit speed. Generators are deterministic in (family, params, seed);
the seed only perturbs free choices such as which slot an object uses.
"""
from __future__ import annotations

import math

import numpy as np

from ..geometry import ObjectModel, RobotModel, Surface, Wall, World, capsule, collides, disc
from .scenario import Scenario, ScenarioError

R_ARM = 0.04
R_OBJ = 0.05
WALL_HW = 0.02
FAMILIES = ("sorting", "wall", "shelfwall", "stocking", "lab", "swap", "open")


def _r(x: float) -> float:
    return round(float(x), 6)


def _pt(x, y) -> tuple[float, float]:
    return (_r(x), _r(y))


def _slot_surface(name: str, p, half: float = 0.07) -> Surface:
    return Surface(name, _r(p[0] - half), _r(p[1] - half), _r(p[0] + half), _r(p[1] + half))


def _bounds(points, pad: float = 0.6):
    a = np.asarray(points, dtype=float)
    return (_r(a[:, 0].min() - pad), _r(a[:, 1].min() - pad), _r(a[:, 0].max() + pad), _r(a[:, 1].max() + pad))


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ScenarioError(msg)


def sorting(robots: int = 2, objects: int = 2, seed: int = 0) -> Scenario:
    """Robots on a ring; every object goes to the station across the ring."""
    k, n = robots, objects
    _check(k >= 2, "sorting needs at least 2 robots")
    _check(1 <= n <= 2 * k, "sorting supports 1..2*robots objects")
    rng = np.random.default_rng([seed, 101])
    ring = 0.635 / math.sin(math.pi / k) if k > 2 else 0.635
    reach = 0.85
    bases, stations = [], []
    for i in range(k):
        th = 2 * math.pi * i / k
        u = np.array([math.cos(th), math.sin(th)])
        t = np.array([-u[1], u[0]])
        bases.append(_pt(*(ring * u)))
        c = (ring + 0.5) * u
        stations.append([_pt(*(c + off * t)) for off in (-0.3, -0.1, 0.1, 0.3)])
    surfaces = [_slot_surface(f"st{i}s{s}", p) for i, st in enumerate(stations) for s, p in enumerate(st)]
    used = {i: [] for i in range(k)}
    objs = []
    order = rng.permutation(2)
    for j in range(n):
        s = j % k
        g = (s + k // 2) % k
        rnd = j // k
        start = stations[s][(0, 3)[order[rnd]]]
        goal = stations[g][(1, 2)[order[rnd]]]
        used[s].append(start)
        objs.append(ObjectModel(j, R_OBJ, start, goal))
    world = World(_bounds(bases + [p for st in stations for p in st]), [], WALL_HW, surfaces,
                  [RobotModel(i, b, reach, R_ARM, 1.0) for i, b in enumerate(bases)], objs)
    return Scenario(f"sorting-r{k}-o{n}-s{seed}", world,
                    {"family": "sorting", "params": {"robots": k, "objects": n}, "seed": seed,
                     "ring_distance": k // 2})


def wall(robots: int = 2, objects: int = 2, seed: int = 0, planted: bool = True) -> Scenario:
    """Robots in a row separated by walls; every object crosses one wall."""
    k, n = robots, objects
    _check(k >= 2, "wall needs at least 2 robots")
    _check(1 <= n <= 2 * k, "wall supports 1..2*robots objects")
    rng = np.random.default_rng([seed, 102])
    reach = 0.85
    bases = [_pt(1.2 * i, 0.0) for i in range(k)]
    walls = [Wall(_pt(0.6 + 1.2 * i, -0.9), _pt(0.6 + 1.2 * i, -0.05)) for i in range(k - 1)]
    slots = {i: [_pt(1.2 * i + dx, -0.5) for dx in (-0.3, -0.1, 0.1, 0.3)] for i in range(k)}
    surfaces = [Surface(f"bench{i}", _r(1.2 * i - 0.4), -0.6, _r(1.2 * i + 0.4), -0.4) for i in range(k)]
    free = {i: list(rng.permutation(4)) for i in range(k)}
    objs = []
    meta_planted = []
    route = [(j % k, j % k + 1 if j % k < k - 1 else j % k - 1) for j in range(n)]
    demand = np.bincount([b for sg in route for b in sg], minlength=k)
    _check(demand.max() <= 4, f"wall bench {int(demand.argmax())} would need {int(demand.max())} slots (4 available)")
    for j, (s, g) in enumerate(route):
        objs.append(ObjectModel(j, R_OBJ, slots[s][free[s].pop()], slots[g][free[g].pop()]))
    if planted and len(free[1]) >= 2 and free[0]:
        # an object parked for good on a ledge between robot 1 and one of its
        # free bench slots; delivering into that slot means clearing it first,
        # so one more slot stays free as room for the move-out
        target = slots[1][free[1].pop()]
        b1 = np.asarray(bases[1])
        p = _pt(*(b1 + 0.55 * (np.asarray(target) - b1)))
        surfaces.append(_slot_surface("ledge", p))
        objs.append(ObjectModel(len(objs), R_OBJ, p, p))
        objs.append(ObjectModel(len(objs), R_OBJ, slots[0][free[0].pop()], target))
        meta_planted = [len(objs) - 2, len(objs) - 1]
    pts = bases + [p for v in slots.values() for p in v]
    world = World(_bounds(pts), walls, WALL_HW, surfaces,
                  [RobotModel(i, b, reach, R_ARM, 1.0) for i, b in enumerate(bases)], objs)
    return Scenario(f"wall-r{k}-o{n}-s{seed}", world,
                    {"family": "wall", "params": {"robots": k, "objects": n}, "seed": seed,
                     "planted": meta_planted, "wall_x": [w.a[0] for w in walls]})


def _rays(m: int) -> list[float]:
    return [-0.35, 0.35] if m == 2 else list(np.linspace(-0.5, 0.5, m))


def shelfwall(robots: int = 2, slots: int = 2, seed: int = 0) -> Scenario:
    """Shelf on robot B's side with front and rear slots on shared rays; a wall between A and B."""
    _check(robots == 2, "shelfwall uses exactly 2 robots")
    _check(slots in (2, 3), "shelfwall supports 2 or 3 rays per shelf")
    rng = np.random.default_rng([seed, 103])
    A, B = (-0.6, 0.0), (0.6, 0.0)
    front, rear = [], []
    for th in _rays(slots):
        u = np.array([math.cos(th), math.sin(th)])
        front.append(_pt(*(np.asarray(B) + 0.32 * u)))
        rear.append(_pt(*(np.asarray(B) + 0.6 * u)))
    for f, r in zip(front, rear):
        _check(collides(capsule(B, r, R_ARM), disc(f, R_OBJ)), "rear grasp must pass the front slot")
    ys = np.linspace(-0.3, 0.3, 2 * slots)
    # front objects take the middle of the table, so the short transfers look
    # attractive and the blocked ordering gets tried first
    inner = sorted(range(2 * slots), key=lambda i: (abs(ys[i]), i))
    order = list(rng.permutation(inner[:slots])) + list(rng.permutation(inner[slots:]))
    table = [_pt(-1.1, ys[i]) for i in order]
    goals = front + rear
    objs = [ObjectModel(j, R_OBJ, table[j], goals[j]) for j in range(2 * slots)]
    surfaces = [Surface("table", -1.2, _r(ys[0] - 0.1), -1.0, _r(ys[-1] + 0.1))]
    surfaces += [_slot_surface(f"shelf{i}", p, 0.065) for i, p in enumerate(front + rear)]
    surfaces.append(Surface("side", 0.35, -0.75, 0.85, -0.55))
    walls = [Wall((0.0, -0.9), (0.0, -0.05))]
    world = World(_bounds([A, B] + table + rear), walls, WALL_HW, surfaces,
                  [RobotModel(0, A, 0.85, R_ARM, 1.0), RobotModel(1, B, 0.85, R_ARM, 1.0)], objs)
    return Scenario(f"shelfwall-s{slots}-s{seed}", world,
                    {"family": "shelfwall", "params": {"robots": 2, "slots": slots}, "seed": seed,
                     "front": list(range(slots)), "rear": list(range(slots, 2 * slots)),
                     "blocks": {str(slots + i): i for i in range(slots)}})


def stocking(layers: int = 2, rays: int = 2, seed: int = 0) -> Scenario:
    """Existing items already on the shelf; new items must go behind them."""
    _check(layers in (2, 3), "stocking supports 2 or 3 layers")
    _check(rays in (2, 3), "stocking supports 2 or 3 rays")
    rng = np.random.default_rng([seed, 104])
    A, B = (-0.6, 0.0), (0.6, 0.0)
    depth = [0.3, 0.52, 0.74][:layers]
    grid = []
    for th in _rays(rays):
        u = np.array([math.cos(th), math.sin(th)])
        grid.append([_pt(*(np.asarray(B) + d * u)) for d in depth])
    objs = []
    existing = []
    for ray in grid:
        for p in ray[:-1]:
            existing.append(len(objs))
            objs.append(ObjectModel(len(objs), R_OBJ, p, p))
    ys = np.linspace(-0.25, 0.25, rays)
    table = [_pt(-1.1, y) for y in ys]
    order = rng.permutation(rays)
    new = []
    for i, ray in enumerate(grid):
        new.append(len(objs))
        objs.append(ObjectModel(len(objs), R_OBJ, table[order[i]], ray[-1]))
    surfaces = [Surface("table", -1.2, -0.4, -1.0, 0.4)]
    surfaces += [_slot_surface(f"shelf{i}", p, 0.065) for i, p in enumerate(q for ray in grid for q in ray)]
    surfaces.append(Surface("side", 0.35, -0.75, 0.85, -0.5))
    world = World(_bounds([A, B] + table + [g[-1] for g in grid]), [], WALL_HW, surfaces,
                  [RobotModel(0, A, 0.85, R_ARM, 1.0), RobotModel(1, B, 0.85, R_ARM, 1.0)], objs)
    return Scenario(f"stocking-l{layers}-r{rays}-s{seed}", world,
                    {"family": "stocking", "params": {"layers": layers, "rays": rays}, "seed": seed,
                     "existing": existing, "new": new})


def swap(seed: int = 0) -> Scenario:
    """One robot exchanges two objects that share a narrow surface."""
    rng = np.random.default_rng([seed, 105])
    y = 0.12
    a, b = _pt(0.5, y), _pt(0.5, -y)
    if rng.uniform() < 0.5:
        a, b = b, a
    objs = [ObjectModel(0, R_OBJ, a, b), ObjectModel(1, R_OBJ, b, a)]
    surfaces = [Surface("narrow", 0.44, -0.2, 0.56, 0.2), Surface("spare", -0.2, 0.35, 0.2, 0.6)]
    world = World((-1.0, -1.0, 1.0, 1.0), [], WALL_HW, surfaces, [RobotModel(0, (0.0, 0.0), 0.85, R_ARM, 1.0)],
                  objs)
    return Scenario(f"swap-s{seed}", world, {"family": "swap", "params": {}, "seed": seed})


def lab(robots: int = 2, objects: int = 2, seed: int = 0) -> Scenario:
    """Every object goes to a one-slot staging surface and back to where it started."""
    _check(robots == 2, "lab uses exactly 2 robots")
    _check(1 <= objects <= 4, "lab supports 1..4 objects")
    rng = np.random.default_rng([seed, 106])
    A, B = (-0.5, 0.0), (0.5, 0.0)
    bench = {0: [_pt(-0.5 + dx, -0.5) for dx in (-0.2, 0.2)], 1: [_pt(0.5 + dx, -0.5) for dx in (-0.2, 0.2)]}
    surfaces = [Surface("benchA", -0.85, -0.6, -0.15, -0.4), Surface("benchB", 0.15, -0.6, 0.85, -0.4),
                Surface("staging", -0.06, 0.34, 0.06, 0.46)]
    objs = []
    staging = {}
    side = list(rng.permutation(2))
    for j in range(objects):
        r = side[j % 2]
        p = bench[r][j // 2]
        objs.append(ObjectModel(j, R_OBJ, p, p, "staging"))
        staging[j] = (0.0, 0.4)
    world = World((-1.2, -1.0, 1.2, 1.0), [], WALL_HW, surfaces,
                  [RobotModel(0, A, 0.75, R_ARM, 1.0), RobotModel(1, B, 0.75, R_ARM, 1.0)], objs)
    return Scenario(f"lab-o{objects}-s{seed}", world,
                    {"family": "lab", "params": {"robots": 2, "objects": objects}, "seed": seed}, staging)


def open_world(robots: int = 1, objects: int = 1, seed: int = 0) -> Scenario:
    """Unobstructed single-robot relocation, the smallest useful case."""
    _check(robots == 1, "open uses exactly 1 robot")
    _check(1 <= objects <= 3, "open supports 1..3 objects")
    ys = [-0.3, 0.0, 0.3][:objects]
    objs = [ObjectModel(j, R_OBJ, _pt(0.5, y), _pt(-0.5, y)) for j, y in enumerate(ys)]
    surfaces = [Surface("right", 0.4, -0.45, 0.6, 0.45), Surface("left", -0.6, -0.45, -0.4, 0.45)]
    world = World((-1.0, -1.0, 1.0, 1.0), [], WALL_HW, surfaces, [RobotModel(0, (0.0, 0.0), 0.85, R_ARM, 1.0)],
                  objs)
    return Scenario(f"open-o{objects}-s{seed}", world, {"family": "open", "params": {"objects": objects},
                                                         "seed": seed})


PARAMS = {"sorting": ("robots", "objects"), "wall": ("robots", "objects", "planted"),
          "shelfwall": ("robots", "slots"), "stocking": ("layers", "rays"), "lab": ("robots", "objects"),
          "swap": (), "open": ("robots", "objects")}


def generate_scenario(family: str, params: dict | None = None, seed: int = 0) -> Scenario:
    params = dict(params or {})
    allowed = PARAMS.get(family)
    if allowed is not None:
        extra = sorted(set(params) - set(allowed))
        _check(not extra, f"{family}: unknown parameter(s) {', '.join(extra)}; accepts {', '.join(allowed) or 'none'}")
        for k, v in params.items():
            _check(isinstance(v, (bool, int)) and not (isinstance(v, bool) and k != "planted"),
                   f"{family}: parameter {k} must be an integer")
    try:
        if family == "sorting":
            return sorting(params.get("robots", 2), params.get("objects", 2), seed)
        if family == "wall":
            return wall(params.get("robots", 2), params.get("objects", 2), seed, params.get("planted", True))
        if family == "shelfwall":
            return shelfwall(params.get("robots", 2), params.get("slots", 2), seed)
        if family == "stocking":
            return stocking(params.get("layers", 2), params.get("rays", 2), seed)
        if family == "lab":
            return lab(params.get("robots", 2), params.get("objects", 2), seed)
        if family == "swap":
            return swap(seed)
        if family == "open":
            return open_world(params.get("robots", 1), params.get("objects", 1), seed)
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(str(e)) from e
    raise ScenarioError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
