"""Base graphs: ordered simple graphs with degree/girth/connectivity checks.

Vertices are identified with 0..n-1 in their total order. A small named
catalog covers the graphs the rest of the toolkit builds on; anything else
is generated with the pairing model plus rejection.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import networkx as nx

INFINITY = float("inf")


class GraphError(ValueError):
    """Invalid base graph input."""


class GenerationFailed(RuntimeError):
    """No graph met the bounds within budget; carries the best candidate."""

    def __init__(self, message: str, best: Optional["BaseGraph"] = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class BaseGraph:
    n: int
    edges: tuple  # tuple of (u, v) with u < v, sorted
    name: str = ""
    adjacency: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n <= 0:
            raise GraphError("graph must have at least one vertex")
        seen = set()
        adj = [[] for _ in range(self.n)]
        for e in self.edges:
            u, v = e
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge {e} out of range")
            if u >= v:
                raise GraphError(f"edge {e} not normalized (need u < v)")
            if (u, v) in seen:
                raise GraphError(f"parallel edge {e}")
            seen.add((u, v))
            adj[u].append(v)
            adj[v].append(u)
        if tuple(sorted(self.edges)) != tuple(self.edges):
            raise GraphError("edge list must be sorted")
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))
        if self.n > 1 and not self._connected():
            raise GraphError("graph must be connected")

    def _connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y in self.adjacency[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return len(seen) == self.n

    def neighbors(self, x: int) -> tuple:
        return self.adjacency[x]

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edge_set

    @property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    def bfs_distances(self, sources: Iterable[int]) -> list:
        dist = [-1] * self.n
        queue = deque()
        for s in sources:
            dist[s] = 0
            queue.append(s)
        while queue:
            x = queue.popleft()
            for y in self.adjacency[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def distance(self, u: int, v: int) -> int:
        return self.bfs_distances([u])[v]

    def to_nx(self) -> "nx.Graph":
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def to_text(self) -> str:
        lines = [f"{self.n} {len(self.edges)}"]
        lines.extend(f"{u} {v}" for u, v in self.edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, name: str = "") -> "BaseGraph":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise GraphError("empty graph document")
        try:
            n, m = map(int, lines[0].split())
            edges = sorted(tuple(map(int, ln.split())) for ln in lines[1:])
        except Exception as exc:
            raise GraphError(f"malformed graph document: {exc}") from exc
        if len(edges) != m:
            raise GraphError(f"header says {m} edges, found {len(edges)}")
        return cls(n=n, edges=tuple(edges), name=name)

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "m": len(self.edges),
            "name": self.name,
            "edges": [list(e) for e in self.edges],
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BaseGraph":
        try:
            doc = json.loads(text)
            edges = tuple(sorted(tuple(e) for e in doc["edges"]))
            g = cls(n=doc["n"], edges=edges, name=doc.get("name", ""))
        except GraphError:
            raise
        except Exception as exc:
            raise GraphError(f"malformed graph JSON: {exc}") from exc
        if doc.get("m", len(edges)) != len(edges):
            raise GraphError("edge count mismatch")
        return g


@dataclass(frozen=True)
class GraphReport:
    degrees: tuple
    is_regular: bool
    degree: Optional[int]
    girth: object  # int or INFINITY
    connectivity: int


def girth(g: BaseGraph):
    """Length of the shortest cycle via BFS from every vertex."""
    best = INFINITY
    for root in range(g.n):
        dist = [-1] * g.n
        parent = [-1] * g.n
        dist[root] = 0
        queue = deque([root])
        while queue:
            x = queue.popleft()
            if 2 * dist[x] >= best:
                continue
            for y in g.adjacency[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    parent[y] = x
                    queue.append(y)
                elif parent[x] != y:
                    # non-tree edge closes a cycle through the BFS tree
                    best = min(best, dist[x] + dist[y] + 1)
    return best


def connectivity(g: BaseGraph) -> int:
    """Exact vertex connectivity (max-flow based)."""
    if g.n == 1:
        return 0
    return int(nx.node_connectivity(g.to_nx()))


def properties(g: BaseGraph) -> GraphReport:
    degrees = tuple(g.degree(x) for x in range(g.n))
    is_regular = len(set(degrees)) == 1
    return GraphReport(
        degrees=degrees,
        is_regular=is_regular,
        degree=degrees[0] if is_regular else None,
        girth=girth(g),
        connectivity=connectivity(g),
    )


def _from_nx(graph, name: str) -> BaseGraph:
    mapping = {v: i for i, v in enumerate(sorted(graph.nodes()))}
    edges = sorted(
        (min(mapping[u], mapping[v]), max(mapping[u], mapping[v]))
        for u, v in graph.edges()
    )
    return BaseGraph(n=graph.number_of_nodes(), edges=tuple(edges), name=name)


def complete_graph(n: int) -> BaseGraph:
    return _from_nx(nx.complete_graph(n), f"K{n}")


def hypercube(dim: int) -> BaseGraph:
    g = nx.hypercube_graph(dim)
    relabeled = nx.relabel_nodes(
        g, {v: sum(b << i for i, b in enumerate(v)) for v in g.nodes()}
    )
    return _from_nx(relabeled, f"Q{dim}")


def petersen() -> BaseGraph:
    return _from_nx(nx.petersen_graph(), "petersen")


def heawood() -> BaseGraph:
    return _from_nx(nx.heawood_graph(), "heawood")


def mcgee() -> BaseGraph:
    return _from_nx(nx.LCF_graph(24, [12, 7, -7], 8), "mcgee")


def tutte_coxeter() -> BaseGraph:
    return _from_nx(nx.LCF_graph(30, [-13, -9, 7, -7, 9, 13], 5), "tutte-coxeter")


def circulant(n: int, jumps: Sequence[int]) -> BaseGraph:
    name = "circulant-%d-%s" % (n, ",".join(map(str, jumps)))
    return _from_nx(nx.circulant_graph(n, list(jumps)), name)


def prism3() -> BaseGraph:
    g = circulant(6, [2, 3])
    return BaseGraph(n=g.n, edges=g.edges, name="3-prism")


def catalog() -> list:
    """Named catalog, ordered by size."""
    entries = [
        complete_graph(4),
        complete_graph(5),
        prism3(),
        complete_graph(6),
        circulant(8, [1, 3]),
        hypercube(3),
        petersen(),
        circulant(12, [1, 5]),
        heawood(),
        hypercube(4),
        mcgee(),
        tutte_coxeter(),
        hypercube(5),
    ]
    return sorted(entries, key=lambda g: (g.n, len(g.edges)))


def catalog_graph(name: str) -> BaseGraph:
    for g in catalog():
        if g.name == name:
            return g
    raise GraphError(f"unknown catalog graph {name!r}")


def catalog_or_generate(
    degree: int,
    min_girth: int,
    min_connectivity: int,
    seed: Optional[int] = None,
    budget: int = 400,
) -> BaseGraph:
    """Smallest catalog graph meeting the bounds, else random regular."""
    if degree < 3:
        raise GraphError("degree must be at least 3")
    for g in catalog():
        rep = properties(g)
        if (
            rep.is_regular
            and rep.degree == degree
            and rep.girth >= min_girth
            and rep.connectivity >= min_connectivity
        ):
            return g
    if seed is None:
        raise GenerationFailed(
            "no catalog hit; random generation requires a seed", best=None
        )
    best = None
    n = max(degree + 1, 2 * degree)
    if (n * degree) % 2:
        n += 1
    for attempt in range(budget):
        candidate = _from_nx(
            nx.random_regular_graph(degree, n, seed=seed + attempt),
            f"random-{degree}-{n}-{seed + attempt}",
        )
        try:
            rep = properties(candidate)
        except GraphError:
            continue
        if rep.girth >= min_girth and rep.connectivity >= min_connectivity:
            return candidate
        if best is None:
            best = candidate
        if attempt and attempt % 50 == 0:
            n += 2
            if (n * degree) % 2:
                n += 1
    raise GenerationFailed(
        f"no ({degree},{min_girth},{min_connectivity})-graph within budget", best=best
    )


def distant_vertex(g: BaseGraph, blocked: Iterable[int], ell: int) -> Optional[int]:
    """Minimal vertex at distance > ell from every blocked vertex, if any."""
    blocked = list(blocked)
    if not blocked:
        return 0
    dist = g.bfs_distances(blocked)
    for x in range(g.n):
        if dist[x] > ell or dist[x] < 0:
            return x
    return None


__all__ = [
    "INFINITY",
    "BaseGraph",
    "GraphReport",
    "GraphError",
    "GenerationFailed",
    "girth",
    "connectivity",
    "properties",
    "complete_graph",
    "hypercube",
    "petersen",
    "heawood",
    "mcgee",
    "tutte_coxeter",
    "circulant",
    "prism3",
    "catalog",
    "catalog_graph",
    "catalog_or_generate",
    "distant_vertex",
]
