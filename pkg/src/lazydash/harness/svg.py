"""SVG snapshots of a timed schedule, one file per sample step."""
from __future__ import annotations

from pathlib import Path as FsPath

import numpy as np

ARM = "#4a6fa5"
OBJ = "#d9822b"
HELD = "#c0392b"


def frame_times(makespan: float, dt: float) -> np.ndarray:
    """floor(makespan/dt)+1 sample times; the last one is pinned to the makespan."""
    n = int(np.floor(makespan / dt + 1e-9)) + 1
    t = dt * np.arange(n, dtype=float)
    t[-1] = makespan if n > 1 else 0.0
    return np.minimum(t, makespan)


def replay_states(scenario, schedule: dict, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Effector positions (R,C,2), object positions (O,C,2) and holders (O,C) at ``times``."""
    world = scenario.world
    T = np.asarray(times, dtype=float)
    wps = [np.asarray(w, dtype=float).reshape(-1, 3) for w in schedule["robots"]]
    E = np.stack([np.column_stack([np.interp(T, w[:, 0], w[:, 1]), np.interp(T, w[:, 0], w[:, 2])]) for w in wps])
    O = len(world.objects)
    P = np.array([np.broadcast_to(o.start, (len(T), 2)) for o in world.objects], dtype=float).reshape(O, len(T), 2)
    H = np.full((O, len(T)), -1)
    holder = [-1] * O
    rest = [tuple(o.start) for o in world.objects]
    for e in sorted(schedule["events"], key=lambda e: (e["t"], e.get("index", 0))):
        j, rs = int(e["obj"]), [int(x) for x in e["robots"]]
        if e["action"] == "Pick":
            holder[j] = rs[0]
        elif e["action"] == "Handover":
            holder[j] = rs[1]
        else:
            holder[j], rest[j] = -1, tuple(e["point"])
        after = T >= e["t"]
        H[j, after] = holder[j]
        P[j, after] = rest[j]
    for j in range(O):
        for c in np.flatnonzero(H[j] >= 0):
            P[j, c] = E[H[j, c], c]
    return E, P, H


def _frame(scenario, E, P, H, c, t) -> str:
    w = scenario.world
    x0, y0, x1, y1 = w.bounds
    scale = 400.0 / max(x1 - x0, y1 - y0)

    def X(x):
        return (x - x0) * scale

    def Y(y):
        return (y1 - y) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{X(x1):.1f}" height="{Y(y0):.1f}">',
           f'<rect width="100%" height="100%" fill="white"/>']
    for s in w.surfaces:
        out.append(f'<rect x="{X(s.xmin):.2f}" y="{Y(s.ymax):.2f}" width="{(s.xmax - s.xmin) * scale:.2f}" '
                   f'height="{(s.ymax - s.ymin) * scale:.2f}" fill="#eeeeee" stroke="#bbbbbb"/>')
    for wl in w.walls:
        out.append(f'<line x1="{X(wl.a[0]):.2f}" y1="{Y(wl.a[1]):.2f}" x2="{X(wl.b[0]):.2f}" y2="{Y(wl.b[1]):.2f}" '
                   f'stroke="black" stroke-width="{2 * w.wall_halfwidth * scale:.2f}" stroke-linecap="round"/>')
    for o in w.objects:
        out.append(f'<circle cx="{X(o.goal[0]):.2f}" cy="{Y(o.goal[1]):.2f}" r="{o.radius * scale:.2f}" '
                   f'fill="none" stroke="{OBJ}" stroke-dasharray="3,2"/>')
    for r in w.robots:
        e = E[r.id, c]
        out.append(f'<line x1="{X(r.base[0]):.2f}" y1="{Y(r.base[1]):.2f}" x2="{X(e[0]):.2f}" y2="{Y(e[1]):.2f}" '
                   f'stroke="{ARM}" stroke-opacity="0.8" stroke-width="{2 * r.r_arm * scale:.2f}" '
                   f'stroke-linecap="round"/>')
        out.append(f'<circle cx="{X(r.base[0]):.2f}" cy="{Y(r.base[1]):.2f}" r="4" fill="black"/>')
    for o in w.objects:
        p = P[o.id, c]
        col = HELD if H[o.id, c] >= 0 else OBJ
        out.append(f'<circle cx="{X(p[0]):.2f}" cy="{Y(p[1]):.2f}" r="{o.radius * scale:.2f}" fill="{col}"/>')
        out.append(f'<text x="{X(p[0]):.2f}" y="{Y(p[1]) + 3:.2f}" font-size="9" text-anchor="middle">{o.id}</text>')
    out.append(f'<text x="6" y="14" font-size="12">t = {t:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_svg(scenario, schedule: dict, dt: float, out_dir) -> list[FsPath]:
    """Write frame_00000.svg ... into ``out_dir``; returns the paths in time order."""
    d = FsPath(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    T = frame_times(float(schedule["makespan"]), dt)
    E, P, H = replay_states(scenario, schedule, T)
    paths = []
    for c, t in enumerate(T):
        p = d / f"frame_{c:05d}.svg"
        p.write_text(_frame(scenario, E, P, H, c, t))
        paths.append(p)
    return paths
