"""Planar world model: capsule arms, disc objects, thick-segment walls.

Every shape is a segment swept by a radius (a disc is a zero-length segment),
so a single segment-segment distance routine covers all collision pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

TANGENCY_TOL = 1e-9
_EPS = 1e-14

Point = tuple[float, float]


# --------------------------------------------------------------------------
# distance primitives (vectorized, broadcast over leading axes)
# --------------------------------------------------------------------------

def point_segment_distance(p, a, b):
    """Distance from point(s) ``p`` to segment(s) ``a``-``b``."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = np.sum(ab * ab, axis=-1)
    safe = np.where(denom > _EPS, denom, 1.0)
    t = np.clip(np.sum((p - a) * ab, axis=-1) / safe, 0.0, 1.0)
    t = np.where(denom > _EPS, t, 0.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1)


def segment_segment_distance(p1, q1, p2, q2):
    """Minimum distance between segments p1-q1 and p2-q2 (broadcasting).

    Closed-form clamped closest-point computation; degenerate segments are
    treated as points.
    """
    p1 = np.asarray(p1, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    a_ok = a > _EPS
    e_ok = e > _EPS
    a_s = np.where(a_ok, a, 1.0)
    e_s = np.where(e_ok, e, 1.0)
    denom = a * e - b * b
    denom_ok = denom > _EPS * np.maximum(a * e, 1.0)
    denom_s = np.where(denom_ok, denom, 1.0)

    s = np.where(denom_ok, np.clip((b * f - c * e) / denom_s, 0.0, 1.0), 0.0)
    t = (b * s + f) / e_s
    s = np.where(t < 0.0, np.clip(-c / a_s, 0.0, 1.0), s)
    s = np.where(t > 1.0, np.clip((b - c) / a_s, 0.0, 1.0), s)
    t = np.clip(t, 0.0, 1.0)

    # first segment degenerate
    s = np.where(a_ok, s, 0.0)
    t = np.where(a_ok, t, np.clip(f / e_s, 0.0, 1.0))
    # second segment degenerate
    t = np.where(e_ok, t, 0.0)
    s = np.where(e_ok | ~a_ok, s, np.clip(-c / a_s, 0.0, 1.0))
    both = ~a_ok & ~e_ok
    s = np.where(both, 0.0, s)
    t = np.where(both, 0.0, t)

    c1 = p1 + s[..., None] * d1
    c2 = p2 + t[..., None] * d2
    return np.linalg.norm(c1 - c2, axis=-1)


def segment_segment_closest(p1, q1, p2, q2) -> tuple[np.ndarray, np.ndarray]:
    """Closest points (c1, c2) between two single segments."""
    p1, q1, p2, q2 = (np.asarray(x, dtype=float) for x in (p1, q1, p2, q2))
    best = None
    # candidate set: endpoints projected on the other segment, plus the
    # interior intersection when the segments cross
    cands = []
    for p, a, b, first in ((p1, p2, q2, True), (q1, p2, q2, True),
                           (p2, p1, q1, False), (q2, p1, q1, False)):
        ab = b - a
        den = float(ab @ ab)
        t = 0.0 if den <= _EPS else min(1.0, max(0.0, float((p - a) @ ab) / den))
        proj = a + t * ab
        cands.append((p, proj) if first else (proj, p))
    d1, d2 = q1 - p1, q2 - p2
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(cross) > _EPS:
        w = p2 - p1
        s = (w[0] * d2[1] - w[1] * d2[0]) / cross
        t = (w[0] * d1[1] - w[1] * d1[0]) / cross
        if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
            x = p1 + s * d1
            cands.append((x, x))
    for c1, c2 in cands:
        d = float(np.linalg.norm(c1 - c2))
        if best is None or d < best[0]:
            best = (d, c1, c2)
    return best[1], best[2]


# --------------------------------------------------------------------------
# shapes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Shape:
    """A segment ``a``-``b`` swept by ``radius``. ``a == b`` is a disc."""
    a: Point
    b: Point
    radius: float
    kind: str = "capsule"
    label: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a": list(self.a), "b": list(self.b),
                "radius": self.radius, "label": self.label}


def disc(center, radius: float, label: str = "") -> Shape:
    c = (float(center[0]), float(center[1]))
    return Shape(c, c, float(radius), "disc", label)


def capsule(base, effector, radius: float, label: str = "") -> Shape:
    return Shape((float(base[0]), float(base[1])),
                 (float(effector[0]), float(effector[1])), float(radius), "capsule", label)


def shape_distance(a: Shape, b: Shape) -> float:
    core = float(segment_segment_distance(a.a, a.b, b.a, b.b))
    return core - a.radius - b.radius


def collides(a: Shape, b: Shape, tol: float = TANGENCY_TOL) -> bool:
    """True iff the core primitives are closer than the sum of radii.

    Tangency (within ``tol``) counts as clear.
    """
    core = float(segment_segment_distance(a.a, a.b, b.a, b.b))
    return core < a.radius + b.radius - tol


# --------------------------------------------------------------------------
# world
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Surface:
    name: str
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, p, inset: float = 0.0) -> bool:
        return (self.xmin + inset <= p[0] <= self.xmax - inset
                and self.ymin + inset <= p[1] <= self.ymax - inset)

    def area(self, inset: float = 0.0) -> float:
        return max(0.0, self.xmax - self.xmin - 2 * inset) * max(0.0, self.ymax - self.ymin - 2 * inset)


@dataclass(frozen=True)
class Wall:
    a: Point
    b: Point


@dataclass(frozen=True)
class RobotModel:
    id: int
    base: Point
    reach: float
    r_arm: float
    v: float = 1.0

    def reaches(self, p) -> bool:
        return float(np.hypot(p[0] - self.base[0], p[1] - self.base[1])) <= self.reach + TANGENCY_TOL

    def rest(self) -> Point:
        return self.base


@dataclass(frozen=True)
class ObjectModel:
    id: int
    radius: float
    start: Point
    goal: Point
    via: Optional[str] = None  # surface the object must visit before its goal


@dataclass
class World:
    bounds: tuple[float, float, float, float]
    walls: list[Wall]
    wall_halfwidth: float
    surfaces: list[Surface]
    robots: list[RobotModel]
    objects: list[ObjectModel]
    _wall_arrays: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.wall_halfwidth <= 0:
            raise ValueError("wall half-width must be positive")
        for o in self.objects:
            if o.radius <= 0:
                raise ValueError(f"object {o.id} has non-positive radius")
        for r in self.robots:
            if not r.reach > r.r_arm > 0:
                raise ValueError(f"robot {r.id} must satisfy reach > r_arm > 0")
            if not self.in_bounds(r.base):
                raise ValueError(f"robot {r.id} base outside bounds")
        for s in self.surfaces:
            if not (self.in_bounds((s.xmin, s.ymin)) and self.in_bounds((s.xmax, s.ymax))):
                raise ValueError(f"surface {s.name} outside bounds")

    def in_bounds(self, p) -> bool:
        x0, y0, x1, y1 = self.bounds
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    def surface(self, name: str) -> Surface:
        for s in self.surfaces:
            if s.name == name:
                return s
        raise KeyError(name)

    def surface_of(self, p, inset: float = 0.0) -> Optional[Surface]:
        for s in self.surfaces:
            if s.contains(p, inset):
                return s
        return None

    @property
    def min_radius(self) -> float:
        radii = [r.r_arm for r in self.robots] + [o.radius for o in self.objects]
        return min(radii)

    @property
    def resolution(self) -> float:
        """Edge validation step ``ds``."""
        return self.min_radius / 2.0

    def wall_shapes(self) -> list[Shape]:
        return [Shape(w.a, w.b, self.wall_halfwidth, "wall", f"wall{i}")
                for i, w in enumerate(self.walls)]

    def wall_arrays(self):
        if self._wall_arrays is None:
            a = np.array([w.a for w in self.walls], dtype=float).reshape(-1, 2)
            b = np.array([w.b for w in self.walls], dtype=float).reshape(-1, 2)
            r = np.full(len(self.walls), self.wall_halfwidth)
            object.__setattr__(self, "_wall_arrays", (a, b, r))
        return self._wall_arrays


# --------------------------------------------------------------------------
# obstacle sets and body clearance checks
# --------------------------------------------------------------------------

class Obstacles:
    """Packed arrays of capsule obstacles for vectorized clearance tests."""

    __slots__ = ("a", "b", "r", "labels")

    def __init__(self, shapes: Iterable[Shape] = ()):
        shapes = list(shapes)
        self.a = np.array([s.a for s in shapes], dtype=float).reshape(-1, 2)
        self.b = np.array([s.b for s in shapes], dtype=float).reshape(-1, 2)
        self.r = np.array([s.radius for s in shapes], dtype=float)
        self.labels = [s.label for s in shapes]

    @classmethod
    def from_arrays(cls, a, b, r, labels=None):
        obj = cls.__new__(cls)
        obj.a, obj.b, obj.r = a, b, r
        obj.labels = labels if labels is not None else [""] * len(r)
        return obj

    def __len__(self):
        return len(self.r)

    def __add__(self, other: "Obstacles") -> "Obstacles":
        return Obstacles.from_arrays(np.vstack([self.a, other.a]), np.vstack([self.b, other.b]),
                                     np.concatenate([self.r, other.r]), self.labels + other.labels)


def wall_obstacles(world: World) -> Obstacles:
    a, b, r = world.wall_arrays()
    return Obstacles.from_arrays(a, b, r, [f"wall{i}" for i in range(len(r))])


def body_clear(base, points, r_arm: float, carry_r: float, obstacles: Obstacles,
               tol: float = TANGENCY_TOL) -> np.ndarray:
    """Per-point clearance of an arm (and optional carried disc) at ``points``.

    ``points`` is (m, 2); returns a bool array of length m.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(obstacles) == 0:
        return np.ones(len(pts), dtype=bool)
    base = np.asarray(base, dtype=float)
    P = pts[:, None, :]
    d_arm = segment_segment_distance(np.broadcast_to(base, P.shape), P, obstacles.a[None], obstacles.b[None])
    ok = d_arm >= r_arm + obstacles.r[None] - tol
    if carry_r > 0:
        d_obj = point_segment_distance(P, obstacles.a[None], obstacles.b[None])
        ok &= d_obj >= carry_r + obstacles.r[None] - tol
    return ok.all(axis=1)


def body_shapes(robot: RobotModel, effector, carry_r: float = 0.0) -> list[Shape]:
    shapes = [capsule(robot.base, effector, robot.r_arm, f"robot{robot.id}")]
    if carry_r > 0:
        shapes.append(disc(effector, carry_r, f"carried@robot{robot.id}"))
    return shapes


# --------------------------------------------------------------------------
# poses, grasps, paths
# --------------------------------------------------------------------------

def stable_pose_valid(world: World, object_id: int, p, placed: Sequence[Shape] = ()) -> bool:
    """Stability predicate: inside a surface (inset by radius), clear of walls and ``placed``."""
    r = world.objects[object_id].radius
    if world.surface_of(p, inset=r) is None:
        return False
    d = disc(p, r)
    for w in world.wall_shapes():
        if collides(d, w):
            return False
    for s in placed:
        if collides(d, s):
            return False
    return True


def sample_stable_pose(world: World, object_id: int, blocked: Sequence[Shape], rng: np.random.Generator,
                       attempts: int = 100, surfaces: Optional[Sequence[Surface]] = None) -> Optional[Point]:
    r = world.objects[object_id].radius
    cands = [s for s in (surfaces if surfaces is not None else world.surfaces) if s.area(r) > 0
             or (s.xmax - s.xmin >= 2 * r and s.ymax - s.ymin >= 2 * r)]
    if not cands:
        return None
    for _ in range(attempts):
        s = cands[int(rng.integers(len(cands)))]
        p = (float(rng.uniform(s.xmin + r, s.xmax - r)), float(rng.uniform(s.ymin + r, s.ymax - r)))
        if stable_pose_valid(world, object_id, p, blocked):
            return p
    return None


def grasp_config(robot: RobotModel, p) -> Optional[Point]:
    """Effector placed at the object center if within the closed reach disc."""
    if robot.reaches(p):
        return (float(p[0]), float(p[1]))
    return None


def reach_intersection_nonempty(r1: RobotModel, r2: RobotModel) -> bool:
    d = float(np.hypot(r1.base[0] - r2.base[0], r1.base[1] - r2.base[1]))
    return d < r1.reach + r2.reach - TANGENCY_TOL


def sample_in_lens(r1: RobotModel, r2: RobotModel, rng: np.random.Generator, attempts: int = 1000) -> Optional[Point]:
    """Uniform sample from the intersection of two reach discs (rejection)."""
    small, big = (r1, r2) if r1.reach <= r2.reach else (r2, r1)
    for _ in range(attempts):
        ang = rng.uniform(0.0, 2 * np.pi)
        rad = small.reach * np.sqrt(rng.uniform())
        p = (small.base[0] + rad * np.cos(ang), small.base[1] + rad * np.sin(ang))
        if big.reaches(p):
            return (float(p[0]), float(p[1]))
    return None


@dataclass
class Path:
    """Piecewise-linear configuration path (rows are configs)."""
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        self.points = pts

    def __len__(self):
        return len(self.points)

    @property
    def seg_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    @property
    def total_length(self) -> float:
        return float(self.seg_lengths.sum()) if len(self.points) > 1 else 0.0

    def to_list(self) -> list[list[float]]:
        return [[float(x) for x in row] for row in self.points]


def interpolate(path: Path, s: float) -> np.ndarray:
    """Arc-length parameterized point on ``path`` at fraction ``s`` in [0, 1]."""
    if len(path) == 0:
        raise ValueError("empty path")
    pts = path.points
    if len(pts) == 1 or s <= 0.0:
        return pts[0].copy()
    if s >= 1.0:
        return pts[-1].copy()
    seg = path.seg_lengths
    total = seg.sum()
    if total <= 0.0:
        return pts[0].copy()
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    target = s * total
    i = int(np.searchsorted(cum, target, side="right") - 1)
    i = min(max(i, 0), len(seg) - 1)
    frac = 0.0 if seg[i] <= 0 else (target - cum[i]) / seg[i]
    return pts[i] + frac * (pts[i + 1] - pts[i])


def densify(a, b, step: float) -> np.ndarray:
    """Points from a to b (inclusive) spaced at most ``step`` apart."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(1, int(np.ceil(np.linalg.norm(b - a) / step)))
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    return a + t * (b - a)
