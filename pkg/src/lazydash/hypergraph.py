"""Directed hypergraph store shared by the task and motion layers.

Append-only: vertices and hyperarcs get sequential ids that are never reused.
Invalid content is masked by constraints in higher layers, never deleted.
"""
from __future__ import annotations

import json
from typing import Any, Iterable


class HypergraphError(ValueError):
    pass


class UnknownVertexError(HypergraphError, KeyError):
    pass


class EmptySetError(HypergraphError):
    pass


class Hypergraph:
    def __init__(self):
        self._vertices: list[Any] = []
        self._arcs: list[tuple[frozenset, frozenset, Any]] = []
        self._fstar: list[list[int]] = []
        self._bstar: list[list[int]] = []

    def add_vertex(self, payload: Any = None) -> int:
        self._vertices.append(payload)
        self._fstar.append([])
        self._bstar.append([])
        return len(self._vertices) - 1

    def add_hyperarc(self, tail: Iterable[int], head: Iterable[int], payload: Any = None) -> int:
        tail = frozenset(tail)
        head = frozenset(head)
        if not tail or not head:
            raise EmptySetError("hyperarc tail and head must be non-empty")
        for v in tail | head:
            self._check(v)
        aid = len(self._arcs)
        self._arcs.append((tail, head, payload))
        for v in tail:
            self._fstar[v].append(aid)
        for v in head:
            self._bstar[v].append(aid)
        return aid

    def _check(self, v: int) -> None:
        if not isinstance(v, int) or v < 0 or v >= len(self._vertices):
            raise UnknownVertexError(v)

    def forward_star(self, v: int) -> frozenset[int]:
        self._check(v)
        return frozenset(self._fstar[v])

    def forward_list(self, v: int) -> list[int]:
        """Forward star in insertion order (no copy; do not mutate)."""
        return self._fstar[v]

    def backward_star(self, v: int) -> frozenset[int]:
        self._check(v)
        return frozenset(self._bstar[v])

    def vertex(self, v: int) -> Any:
        self._check(v)
        return self._vertices[v]

    def tail(self, a: int) -> frozenset[int]:
        return self._arcs[a][0]

    def head(self, a: int) -> frozenset[int]:
        return self._arcs[a][1]

    def arc(self, a: int) -> Any:
        return self._arcs[a][2]

    def arcs(self) -> range:
        return range(len(self._arcs))

    def vertices(self) -> range:
        return range(len(self._vertices))

    def counts(self) -> tuple[int, int]:
        return len(self._vertices), len(self._arcs)

    def to_dict(self) -> dict:
        def enc(p):
            if hasattr(p, "to_dict"):
                return p.to_dict()
            return p if isinstance(p, (str, int, float, bool, type(None), list, dict)) else repr(p)

        return {
            "vertices": [{"id": i, "payload": enc(p)} for i, p in enumerate(self._vertices)],
            "hyperarcs": [{"id": i, "tail": sorted(t), "head": sorted(h), "payload": enc(p)}
                          for i, (t, h, p) in enumerate(self._arcs)],
        }

    def dump_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)
