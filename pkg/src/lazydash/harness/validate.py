"""Independent replay of a serialized timed schedule.

Written against the serialized form only (per-robot timed waypoints plus
transition events) and using shapely for every distance, so it shares no
collision code with the planner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.ops import nearest_points

TOL = 1e-9
POS_TOL = 1e-6


@dataclass
class ValidationResult:
    violations: list = field(default_factory=list)
    samples: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, kind: str) -> int:
        return sum(1 for v in self.violations if v["kind"] == kind)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "samples": self.samples, "violations": self.violations}


def _times(makespan: float, dt: float) -> np.ndarray:
    n = int(np.floor(makespan / dt + 1e-9))
    t = dt * np.arange(n + 1)
    if makespan - t[-1] > 1e-12:
        t = np.append(t, makespan)
    return t


def _runs(mask: np.ndarray):
    """Start indices of maximal runs of True."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return []
    prev = np.concatenate([[False], m[:-1]])
    return np.flatnonzero(m & ~prev).tolist()


def validate_schedule(scenario, schedule: dict, dt: float) -> ValidationResult:
    world = scenario.world
    res = ValidationResult()
    bad = res.violations
    robots = world.robots
    objects = world.objects
    R, O = len(robots), len(objects)
    span = float(schedule["makespan"])
    wps = [np.asarray(w, dtype=float).reshape(-1, 3) for w in schedule["robots"]]
    if len(wps) != R:
        bad.append({"kind": "format", "detail": "robot count mismatch"})
        return res

    # -- trajectories --------------------------------------------------------
    for i, w in enumerate(wps):
        rb = robots[i]
        if len(w) == 0 or abs(w[0, 0]) > TOL or np.hypot(*(w[0, 1:] - rb.base)) > POS_TOL:
            bad.append({"kind": "continuity", "robot": i, "detail": "does not start at rest at t=0"})
        if len(w) and w[-1, 0] < span - 1e-9:
            bad.append({"kind": "format", "robot": i, "detail": "trajectory ends before makespan"})
        dtw = np.diff(w[:, 0])
        if (dtw < -TOL).any():
            bad.append({"kind": "format", "robot": i, "detail": "waypoint times decrease"})
        step = np.hypot(*np.diff(w[:, 1:], axis=0).T) if len(w) > 1 else np.zeros(0)
        jump = (dtw <= TOL) & (step > POS_TOL)
        for k in np.flatnonzero(jump):
            bad.append({"kind": "continuity", "robot": i, "t": float(w[k, 0]), "detail": "instant jump"})
        fast = (dtw > TOL) & (step > rb.v * dtw * (1 + 1e-6) + 1e-9)
        for k in np.flatnonzero(fast)[:1]:
            bad.append({"kind": "speed", "robot": i, "t": float(w[k, 0])})
        d = np.hypot(w[:, 1] - rb.base[0], w[:, 2] - rb.base[1])
        for k in np.flatnonzero(d > rb.reach + 1e-9)[:1]:
            bad.append({"kind": "reach", "robot": i, "t": float(w[k, 0])})

    def eff(i, t):
        w = wps[i]
        return np.array([np.interp(t, w[:, 0], w[:, 1]), np.interp(t, w[:, 0], w[:, 2])])

    # -- events ------------------------------------------------------------------
    events = sorted(schedule["events"], key=lambda e: (e["t"], e.get("index", 0)))
    holder = [-1] * O
    rest = [tuple(o.start) for o in objects]
    holds = [-1] * R
    obj_t = [[] for _ in range(O)]
    obj_h = [[] for _ in range(O)]
    obj_p = [[] for _ in range(O)]
    rev = [[] for _ in range(R)]
    for e in events:
        t, act, j, pt = float(e["t"]), e["action"], int(e["obj"]), np.asarray(e["point"], dtype=float)
        rs = [int(x) for x in e["robots"]]
        for r in rs:
            rev[r].append(t)
            if np.hypot(*(eff(r, t) - pt)) > POS_TOL:
                bad.append({"kind": "continuity", "robot": r, "t": t, "detail": f"{act} away from its anchor"})
            if not robots[r].reaches(pt):
                bad.append({"kind": "reach", "robot": r, "t": t, "detail": f"{act} out of reach"})
        if act == "Pick":
            r = rs[0]
            if holder[j] != -1 or holds[r] != -1 or np.hypot(*(np.asarray(rest[j]) - pt)) > POS_TOL:
                bad.append({"kind": "event", "t": t, "detail": f"inconsistent pick of object {j}"})
            holder[j], holds[r] = r, j
        elif act == "Place":
            r = rs[0]
            if holder[j] != r:
                bad.append({"kind": "event", "t": t, "detail": f"robot {r} places object {j} it does not hold"})
            s_ok = any(s.contains(pt, objects[j].radius - 1e-9) for s in world.surfaces)
            if not s_ok:
                bad.append({"kind": "stability", "t": t, "obj": j})
            holder[j], holds[r], rest[j] = -1, -1, (float(pt[0]), float(pt[1]))
        elif act == "Handover":
            g, rc = rs
            if holder[j] != g or holds[rc] != -1:
                bad.append({"kind": "event", "t": t, "detail": f"inconsistent handover of object {j}"})
            holder[j], holds[g], holds[rc] = rc, -1, j
        else:
            bad.append({"kind": "format", "detail": f"unknown action {act}"})
            continue
        obj_t[j].append(t)
        obj_h[j].append(holder[j])
        obj_p[j].append(rest[j])

    # via surfaces must be visited before the final placement
    for o in objects:
        if o.via is None:
            continue
        s = world.surface(o.via)
        if not any(h == -1 and s.contains(p, 0.0) for h, p in zip(obj_h[o.id], obj_p[o.id])):
            bad.append({"kind": "via", "obj": o.id, "detail": f"never rested on {o.via}"})

    # -- final state -------------------------------------------------------------
    for o in objects:
        if holder[o.id] != -1:
            bad.append({"kind": "final", "obj": o.id, "detail": "still held"})
        elif np.hypot(rest[o.id][0] - o.goal[0], rest[o.id][1] - o.goal[1]) > POS_TOL:
            bad.append({"kind": "final", "obj": o.id, "detail": "not at goal"})

    # -- waivers -----------------------------------------------------------------
    seen = [0] * R

    def around(r, t):
        ts_ = rev[r]
        k = seen[r] - 1   # position of the current event in the robot's own list
        return (ts_[k - 1] if k > 0 else 0.0), (ts_[k + 1] if k + 1 < len(ts_) else span)

    engaged = []   # (robot, obj, t0, t1)
    contact = []   # (members, h, t0, t1, zone)
    r_arm_max = max(r.r_arm for r in robots)
    for e in events:
        t, act, j = float(e["t"]), e["action"], int(e["obj"])
        rs = [int(x) for x in e["robots"]]
        for r in rs:
            seen[r] += 1
        if act == "Pick":
            engaged.append((rs[0], j, around(rs[0], t)[0], t))
        elif act == "Place":
            engaged.append((rs[0], j, t, around(rs[0], t)[1]))
        elif act == "Handover":
            (pg, ng), (pr, nr) = around(rs[0], t), around(rs[1], t)
            zone = 2.0 * (r_arm_max + objects[j].radius)
            contact.append(({("robot", rs[0]), ("robot", rs[1]), ("object", j)}, tuple(e["point"]),
                            min(pg, pr), max(ng, nr), zone))

    # -- timed replay ------------------------------------------------------------
    T = _times(span, dt)
    res.samples = len(T)
    C = len(T)
    E = np.stack([np.column_stack([np.interp(T, w[:, 0], w[:, 1]), np.interp(T, w[:, 0], w[:, 2])]) for w in wps])
    P = np.zeros((O, C, 2))
    H = np.full((O, C), -1)
    for j in range(O):
        P[j] = objects[j].start
        if obj_t[j]:
            k = np.searchsorted(np.asarray(obj_t[j]), T, side="right") - 1
            for c in range(C):
                if k[c] < 0:
                    continue
                h = obj_h[j][k[c]]
                H[j, c] = h
                P[j, c] = E[h, c] if h >= 0 else obj_p[j][k[c]]

    bases = np.array([r.base for r in robots], dtype=float)
    arms = [shapely.linestrings(np.stack([np.broadcast_to(bases[i], (C, 2)), E[i]], axis=1)) for i in range(R)]
    pts = [shapely.points(P[j]) for j in range(O)]
    walls = [shapely.LineString([w.a, w.b]) for w in world.walls]

    def geom(ent, c):
        if ent[0] == "robot":
            return arms[ent[1]][c], robots[ent[1]].r_arm
        return pts[ent[1]][c], objects[ent[1]].radius

    def waived(ea, eb, c) -> bool:
        t = T[c]
        for members, h, t0, t1, zone in contact:
            if t0 - 1e-12 <= t <= t1 + 1e-12 and ea in members and eb in members:
                ga, ra = geom(ea, c)
                gb, rb = geom(eb, c)
                pa, pb = nearest_points(ga, gb)
                lim = zone + ra + rb
                if np.hypot(pa.x - h[0], pa.y - h[1]) <= lim and np.hypot(pb.x - h[0], pb.y - h[1]) <= lim:
                    return True
        return False

    def report(kind, ea, eb, mask):
        for c0 in _runs(mask):
            # a run may mix waived and unwaived samples; report its first unwaived one
            c = c0
            while c < C and mask[c]:
                if not waived(ea, eb, c):
                    bad.append({"kind": kind, "t": float(T[c]), "a": list(ea), "b": list(eb)})
                    break
                c += 1

    for i in range(R):
        for wi, w in enumerate(walls):
            d = shapely.distance(arms[i], w)
            report("wall", ("robot", i), ("wall", wi), d < robots[i].r_arm + world.wall_halfwidth - TOL)
    for j in range(O):
        for wi, w in enumerate(walls):
            d = shapely.distance(pts[j], w)
            report("wall", ("object", j), ("wall", wi), d < objects[j].radius + world.wall_halfwidth - TOL)
    for i in range(R):
        for k in range(i + 1, R):
            d = shapely.distance(arms[i], arms[k])
            report("collision", ("robot", i), ("robot", k), d < robots[i].r_arm + robots[k].r_arm - TOL)
    for i in range(R):
        for j in range(O):
            d = shapely.distance(arms[i], pts[j])
            m = (d < robots[i].r_arm + objects[j].radius - TOL) & (H[j] != i)
            for r, o, t0, t1 in engaged:
                if r == i and o == j:
                    m &= ~((T >= t0 - 1e-12) & (T <= t1 + 1e-12))
            report("collision", ("robot", i), ("object", j), m)
    for j in range(O):
        for l in range(j + 1, O):
            d = shapely.distance(pts[j], pts[l])
            report("collision", ("object", j), ("object", l), d < objects[j].radius + objects[l].radius - TOL)
    return res
