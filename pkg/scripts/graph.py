"""
Finite undirected simple graphs with stable vertex and edge indexing.

Vertices and edges are 1-based at the interface (files, CLI output, Graph.edges)
and 0-based in the numpy arrays handed to the energy code. Edge k is the k-th
pair of the lexicographically sorted canonical edge list, which fixes the
meaning of J_k across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from scripts.errors import InvalidGraph


@dataclass(frozen=True)
class Graph:
    """Graph with N_V vertices and canonical (min, max) edge pairs."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not isinstance(self.n_vertices, (int, np.integer)) or self.n_vertices < 1:
            raise InvalidGraph(f"n_vertices must be a positive integer, got {self.n_vertices!r}")
        previous = None
        for a, b in self.edges:
            if not 1 <= a < b <= self.n_vertices:
                raise InvalidGraph(f"edge ({a}, {b}) is not canonical for {self.n_vertices} vertices")
            if previous is not None and (a, b) <= previous:
                raise InvalidGraph("edges must be strictly increasing lexicographically")
            previous = (a, b)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def _endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        pairs = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2) - 1
        first, second = pairs[:, 0].copy(), pairs[:, 1].copy()
        first.setflags(write=False)
        second.setflags(write=False)
        return first, second

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Return the 0-based endpoint maps (pi_1, pi_2) as read-only arrays."""
        return self._endpoints

    def neighbors(self, vertex: int) -> list[int]:
        """Return the 1-based neighbours of a 1-based vertex in increasing order."""
        self._check_vertex(vertex)
        found = [b for a, b in self.edges if a == vertex] + [a for a, b in self.edges if b == vertex]
        return sorted(found)

    def degree(self, vertex: int) -> int:
        return len(self.neighbors(vertex))

    def _check_vertex(self, vertex):
        if not 1 <= vertex <= self.n_vertices:
            raise InvalidGraph(f"vertex {vertex} out of range 1..{self.n_vertices}")


def new_graph(n_vertices: int, edges) -> Graph:
    """Validate, canonicalize and sort an edge list into a Graph."""
    if isinstance(n_vertices, bool) or not isinstance(n_vertices, (int, np.integer)):
        raise InvalidGraph(f"n_vertices must be an integer, got {n_vertices!r}")
    if n_vertices < 1:
        raise InvalidGraph(f"n_vertices must be at least 1, got {n_vertices}")

    canonical = set()
    for pair in edges:
        try:
            a, b = pair
            whole = a == int(a) and b == int(b)
        except (TypeError, ValueError, OverflowError):
            raise InvalidGraph(f"edge {pair!r} is not a pair of vertex indices")
        if not whole:
            raise InvalidGraph(f"edge {pair!r} has a non-integer vertex index")
        a, b = int(a), int(b)
        if a == b:
            raise InvalidGraph(f"self-loop ({a}, {b}) is not allowed in a simple graph")
        if not (1 <= a <= n_vertices and 1 <= b <= n_vertices):
            raise InvalidGraph(f"edge ({a}, {b}) has a vertex outside 1..{n_vertices}")
        key = (min(a, b), max(a, b))
        if key in canonical:
            raise InvalidGraph(f"duplicate edge {key}")
        canonical.add(key)

    return Graph(int(n_vertices), tuple(sorted(canonical)))


def complete(n: int) -> Graph:
    """Complete graph K_n."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidGraph(f"complete graph needs n >= 1, got {n!r}")
    return new_graph(n, [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1)])


def path(n: int) -> Graph:
    """Path graph P_n on vertices 1..n."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidGraph(f"path graph needs n >= 1, got {n!r}")
    return new_graph(n, [(i, i + 1) for i in range(1, n)])


def cycle(n: int) -> Graph:
    """Cycle graph C_n; a simple cycle needs at least three vertices."""
    if not isinstance(n, (int, np.integer)) or n < 3:
        raise InvalidGraph(f"cycle graph needs n >= 3, got {n!r}")
    return new_graph(n, [(i, i + 1) for i in range(1, n)] + [(1, n)])


def petersen() -> Graph:
    """Petersen graph: outer 5-cycle 1..5, inner pentagram 6..10, spokes (i, i+5)."""
    outer = [(i, i % 5 + 1) for i in range(1, 6)]
    spokes = [(i, i + 5) for i in range(1, 6)]
    inner = [(6 + j, 6 + (j + 2) % 5) for j in range(5)]
    return new_graph(10, outer + spokes + inner)


def graph_to_dict(graph: Graph) -> dict:
    return {"n_vertices": graph.n_vertices, "edges": [[a, b] for a, b in graph.edges]}


def graph_from_dict(data) -> Graph:
    """Parse the JSON graph object {"n_vertices": int, "edges": [[a, b], ...]}."""
    if not isinstance(data, dict):
        raise InvalidGraph("graph must be a JSON object")
    if "n_vertices" not in data:
        raise InvalidGraph("graph.n_vertices is missing")
    n_vertices = data["n_vertices"]
    if isinstance(n_vertices, bool) or not isinstance(n_vertices, int):
        raise InvalidGraph(f"graph.n_vertices must be an integer, got {n_vertices!r}")
    edges = data.get("edges", [])
    if not isinstance(edges, list):
        raise InvalidGraph("graph.edges must be a list of [a, b] pairs")
    for pair in edges:
        if not isinstance(pair, list) or len(pair) != 2 or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in pair
        ):
            raise InvalidGraph(f"graph.edges entry {pair!r} is not a pair of integers")
    return new_graph(n_vertices, edges)
