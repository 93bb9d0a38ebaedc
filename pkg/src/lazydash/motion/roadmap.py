"""Lazy probabilistic roadmaps in an arbitrary-dimensional configuration space.

Edges are created with status UNKNOWN and validated only when they lie on a
candidate shortest path. A roadmap built with ``eager=True`` validates every
edge as soon as it is created, which is what the baseline mode uses.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

UNKNOWN, VALID, INVALID = 0, 1, 2
STATUS_NAMES = {UNKNOWN: "Unknown", VALID: "Valid", INVALID: "Invalid"}


@dataclass
class Counters:
    validated_edges: int = 0     # edge validations against the persistent (wall) check
    lazy_validations: int = 0
    eager_validations: int = 0
    context_checks: int = 0      # edge checks against query-local statics/regions
    collision_checks: int = 0    # body configurations tested

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class Roadmap:
    """Undirected k-nearest roadmap with per-edge validation status."""

    def __init__(self, key, dim: int, sampler: Callable, domain: Callable, base_check: Callable,
                 k: int = 8, eager: bool = False, counters: Optional[Counters] = None):
        self.key = key
        self.dim = dim
        self.sampler = sampler        # (rng, n) -> (n, dim)
        self.domain = domain          # (q) -> bool
        self.base_check = base_check  # (qa, qb) -> bool
        self.k = k
        self.eager = eager
        self.counters = counters if counters is not None else Counters()
        self._pts = np.zeros((16, dim))
        self.n = 0
        self.adj: list[list[tuple[int, int]]] = []
        self.eu: list[int] = []
        self.ev: list[int] = []
        self.elen: list[float] = []
        self.status: list[int] = []
        self._edge_of: dict[tuple[int, int], int] = {}
        self._lookup: dict[tuple, int] = {}

    # -- structure ----------------------------------------------------------
    @property
    def points(self) -> np.ndarray:
        return self._pts[:self.n]

    @property
    def n_edges(self) -> int:
        return len(self.eu)

    def _add_point(self, q) -> int:
        q = np.asarray(q, dtype=float)
        key = tuple(q.tolist())
        vid = self._lookup.get(key)
        if vid is not None:
            return vid
        if self.n == len(self._pts):
            self._pts = np.vstack([self._pts, np.zeros_like(self._pts)])
        self._pts[self.n] = q
        self._lookup[key] = self.n
        self.adj.append([])
        self.n += 1
        return self.n - 1

    def _add_edge(self, u: int, v: int) -> Optional[int]:
        if u == v:
            return None
        key = (u, v) if u < v else (v, u)
        if key in self._edge_of:
            return None
        e = len(self.eu)
        self._edge_of[key] = e
        self.eu.append(key[0])
        self.ev.append(key[1])
        self.elen.append(float(np.linalg.norm(self._pts[u] - self._pts[v])))
        self.status.append(UNKNOWN)
        self.adj[u].append((v, e))
        self.adj[v].append((u, e))
        if self.eager:
            self.validate(e, eager=True)
        return e

    def edge(self, u: int, v: int) -> Optional[int]:
        return self._edge_of.get((u, v) if u < v else (v, u))

    def build(self, rng: np.random.Generator, n_samples: int) -> None:
        pts = np.asarray(self.sampler(rng, n_samples), dtype=float).reshape(-1, self.dim)
        first = self.n
        ids = [self._add_point(q) for q in pts]
        if self.n - first <= 1 and first == 0:
            return
        allp = self.points
        tree = cKDTree(allp)
        kk = min(self.k + 1, self.n)
        _, nbrs = tree.query(allp[first:], k=kk)
        nbrs = np.asarray(nbrs).reshape(len(allp) - first, -1)
        for row, u in zip(nbrs, range(first, self.n)):
            for v in row:
                self._add_edge(u, int(v))
        del ids

    def insert(self, q) -> int:
        """Add a configuration (if new) and connect it to its k nearest vertices."""
        q = np.asarray(q, dtype=float)
        vid = self._lookup.get(tuple(q.tolist()))
        if vid is not None:
            return vid
        others = self.n
        vid = self._add_point(q)
        if others:
            d = np.linalg.norm(self._pts[:others] - q, axis=1)
            kk = min(self.k, others)
            near = np.argpartition(d, kk - 1)[:kk] if kk < others else np.arange(others)
            for v in sorted(near.tolist(), key=lambda i: (d[i], i)):
                self._add_edge(vid, int(v))
        return vid

    # -- validation -----------------------------------------------------------
    def validate(self, e: int, eager: bool = False) -> int:
        if self.status[e] == UNKNOWN:
            ok = self.base_check(self._pts[self.eu[e]], self._pts[self.ev[e]])
            self.status[e] = VALID if ok else INVALID
            self.counters.validated_edges += 1
            if eager:
                self.counters.eager_validations += 1
            else:
                self.counters.lazy_validations += 1
        return self.status[e]

    def validate_all(self) -> None:
        for e in range(len(self.eu)):
            self.validate(e, eager=True)

    def counts(self) -> tuple[int, int]:
        return self.n, len(self.eu)

    def status_counts(self) -> dict:
        s = np.asarray(self.status, dtype=int)
        return {STATUS_NAMES[k]: int((s == k).sum()) for k in STATUS_NAMES}

    def to_dict(self) -> dict:
        return {"key": list(self.key) if isinstance(self.key, tuple) else self.key,
                "vertices": self.points.tolist(),
                "edges": [[u, v, l, STATUS_NAMES[s]] for u, v, l, s in
                          zip(self.eu, self.ev, self.elen, self.status)]}


class EdgeContext:
    """Query-local edge check (statics, constraint regions) with a private cache."""

    def __init__(self, check: Callable, counters: Optional[Counters] = None):
        self.check = check
        self.cache: dict[int, bool] = {}
        self.counters = counters

    def ok(self, rm: Roadmap, e: int) -> bool:
        r = self.cache.get(e)
        if r is None:
            r = bool(self.check(rm._pts[rm.eu[e]], rm._pts[rm.ev[e]]))
            self.cache[e] = r
            if self.counters is not None:
                self.counters.context_checks += 1
        return r

    def known_bad(self, e: int) -> bool:
        return self.cache.get(e) is False


def shortest_path(rm: Roadmap, s: int, g: int, usable: Callable[[int], bool]) -> Optional[list[int]]:
    """Dijkstra over edges accepted by ``usable``; ties broken by vertex id."""
    dist = {s: 0.0}
    prev = {}
    heap = [(0.0, s)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == g:
            out = [g]
            while out[-1] != s:
                out.append(prev[out[-1]])
            return out[::-1]
        done.add(u)
        for v, e in rm.adj[u]:
            if v in done or not usable(e):
                continue
            nd = d + rm.elen[e]
            if nd < dist.get(v, np.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    return None


@dataclass
class PathResult:
    path: Optional[np.ndarray]
    vertices: list = field(default_factory=list)
    validated: int = 0        # distinct edges checked by this call
    iterations: int = 0
    repairs: int = 0
    status: str = "ok"        # ok | disconnected | budget

    @property
    def ok(self) -> bool:
        return self.path is not None

    @property
    def length(self) -> float:
        if self.path is None or len(self.path) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.path, axis=0), axis=1).sum())


def _local_samples(rm: Roadmap, bad_edges: list[int], rng: np.random.Generator, n: int) -> list:
    out = []
    tries = 0
    while len(out) < n and tries < 20 * n and bad_edges:
        tries += 1
        e = bad_edges[int(rng.integers(len(bad_edges)))]
        a, b = rm._pts[rm.eu[e]], rm._pts[rm.ev[e]]
        mid = (a + b) / 2
        rad = max(rm.elen[e], 1e-3)
        # uniform in the ball around the midpoint
        d = rng.normal(size=rm.dim)
        d /= max(np.linalg.norm(d), 1e-12)
        q = mid + d * rad * rng.uniform() ** (1.0 / rm.dim)
        if rm.domain(q):
            out.append(q)
    return out


def lazy_path(rm: Roadmap, start, goal, ctx: Optional[EdgeContext] = None,
              rng: Optional[np.random.Generator] = None, max_iters: int = 200,
              repair_rounds: int = 3, n_local: int = 20, n_global: int = 50) -> PathResult:
    """Lazy PRM query with local repair and global resampling on disconnect.

    Repair rounds alternate local (around invalid edges) and global samples;
    ``repair_rounds=0`` gives the plain lazy query on a fixed roadmap.
    """
    s = rm.insert(start)
    g = rm.insert(goal)
    if s == g:
        return PathResult(np.asarray([rm._pts[s]]), [s], 0, 0, 0, "ok")
    checked: set[int] = set()
    bad: list[int] = []
    rounds = 0

    def usable(e):
        return rm.status[e] != INVALID and not (ctx is not None and ctx.known_bad(e))

    for it in range(1, max_iters + 1):
        vs = shortest_path(rm, s, g, usable)
        if vs is None:
            if rounds >= repair_rounds or rng is None:
                return PathResult(None, [], len(checked), it, rounds, "disconnected")
            rounds += 1
            if rounds % 2 == 1 and bad:
                new = _local_samples(rm, bad, rng, n_local)
                if rounds == repair_rounds:
                    new += list(rm.sampler(rng, n_global))
            else:
                new = list(rm.sampler(rng, n_global))
            for q in new:
                rm.insert(q)
            continue
        clean = True
        for u, v in zip(vs[:-1], vs[1:]):
            e = rm.edge(u, v)
            checked.add(e)
            if rm.validate(e) == INVALID:
                bad.append(e)
                clean = False
                break
            if ctx is not None and not ctx.ok(rm, e):
                bad.append(e)
                clean = False
                break
        if clean:
            return PathResult(rm._pts[vs].copy(), vs, len(checked), it, rounds, "ok")
    return PathResult(None, [], len(checked), max_iters, rounds, "budget")


def eager_path(rm: Roadmap, start, goal, ctx: Optional[EdgeContext] = None) -> PathResult:
    """Validate every edge upfront, then search the valid subgraph."""
    s = rm.insert(start)
    g = rm.insert(goal)
    if s == g:
        return PathResult(np.asarray([rm._pts[s]]), [s], 0, 1, 0, "ok")
    for e in range(rm.n_edges):
        rm.validate(e, eager=True)
        if ctx is not None and rm.status[e] == VALID:
            ctx.ok(rm, e)
    good = lambda e: rm.status[e] == VALID and (ctx is None or ctx.cache.get(e, False))
    vs = shortest_path(rm, s, g, good)
    if vs is None:
        return PathResult(None, [], rm.n_edges, 1, 0, "disconnected")
    return PathResult(rm._pts[vs].copy(), vs, rm.n_edges, 1, 0, "ok")
