"""Static undirected network graphs over dense node ids ``0..n-1``."""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    n: int
    edges: frozenset[tuple[int, int]]
    _adj: tuple[frozenset[int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 0:
            raise TopologyError("n must be non-negative")
        normalized = set()
        for i, j in self.edges:
            if i == j:
                raise TopologyError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge ({i}, {j}) outside [0, {self.n})")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for i, j in normalized:
            adj[i].add(j)
            adj[j].add(i)
        object.__setattr__(self, "_adj", tuple(frozenset(a) for a in adj))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Topology":
        return cls(n, frozenset((int(i), int(j)) for i, j in edges))

    def neighbors(self, i: int) -> frozenset[int]:
        if not 0 <= i < self.n:
            raise TopologyError(f"invalid node id {i}")
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def directed_edges(self) -> list[tuple[int, int]]:
        """Both orientations of every edge, ordered by source then target."""
        return [(i, k) for i in range(self.n) for k in sorted(self._adj[i])]

    def is_connected(self) -> bool:
        return self.n <= 1 or len(connected_components(self, range(self.n))) == 1

    def to_edge_list(self) -> str:
        lines = [str(self.n)] + [f"{i} {j}" for i, j in self.sorted_edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "Topology":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or len(rows[0]) != 1:
            raise TopologyError("edge list must start with a line holding n")
        n = int(rows[0][0])
        edges = []
        for row in rows[1:]:
            if len(row) != 2:
                raise TopologyError(f"malformed edge line: {' '.join(row)!r}")
            edges.append((int(row[0]), int(row[1])))
        return cls.from_edges(n, edges)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_edge_list())

    @classmethod
    def load(cls, path: str | Path) -> "Topology":
        return cls.from_edge_list(Path(path).read_text())


@dataclass(frozen=True)
class HonestPartition:
    honest: frozenset[int]
    corrupted: frozenset[int]

    @classmethod
    def from_corrupted(cls, n: int, corrupted: Iterable[int]) -> "HonestPartition":
        bad = frozenset(int(c) for c in corrupted)
        if any(not 0 <= c < n for c in bad):
            raise TopologyError(f"corrupted ids outside [0, {n})")
        return cls(frozenset(range(n)) - bad, bad)

    def validate(self, n: int) -> None:
        if self.honest & self.corrupted:
            raise TopologyError("honest and corrupted sets overlap")
        if self.honest | self.corrupted != frozenset(range(n)):
            raise TopologyError("partition does not cover all nodes")


def neighbors(g: Topology, i: int) -> frozenset[int]:
    return g.neighbors(i)


def connected_components(g: Topology, subset: Iterable[int]) -> list[frozenset[int]]:
    """Maximal connected pieces of the subgraph induced by ``subset``.

    Components come back ordered by their smallest node id.
    """
    members = set(subset)
    if any(not 0 <= i < g.n for i in members):
        raise TopologyError("subset contains invalid node ids")
    seen: set[int] = set()
    out = []
    for start in sorted(members):
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in g.neighbors(u):
                if v in members and v not in comp:
                    comp.add(v)
                    queue.append(v)
        seen |= comp
        out.append(frozenset(comp))
    return out


def honest_neighbor_condition(g: Topology, part: HonestPartition) -> dict[int, bool]:
    part.validate(g.n)
    return {i: bool(g.neighbors(i) & part.honest) for i in sorted(part.honest)}


def ring(n: int) -> Topology:
    if n < 1:
        raise TopologyError("n must be >= 1")
    if n == 1:
        return Topology.from_edges(1, [])
    return Topology.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n: int) -> Topology:
    return Topology.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star(n: int) -> Topology:
    """Node 0 is the hub."""
    return Topology.from_edges(n, [(0, j) for j in range(1, n)])


def erdos_renyi(n: int, prob: float, seed: int) -> Topology:
    if n < 1:
        raise TopologyError("n must be >= 1")
    if not 0.0 <= prob <= 1.0:
        raise TopologyError("prob must lie in [0, 1]")
    rng = random.Random(seed)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            # one draw per pair, in a fixed order, keeps the graph a pure function of the seed
            if rng.random() < prob:
                edges.append((i, j))
    return Topology.from_edges(n, edges)


def random_geometric(n: int, radius: float, seed: int) -> Topology:
    """Nodes uniform in the unit square, linked when within ``radius``."""
    if n < 1:
        raise TopologyError("n must be >= 1")
    if radius <= 0:
        raise TopologyError("radius must be positive")
    rng = random.Random(seed)
    pts = [(rng.random(), rng.random()) for _ in range(n)]
    edges = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if math.dist(pts[i], pts[j]) <= radius
    ]
    return Topology.from_edges(n, edges)


def make_topology(kind: str, n: int, *, prob: float = 0.5, radius: float = 0.5, seed: int = 0) -> Topology:
    if kind == "ring":
        return ring(n)
    if kind == "complete":
        return complete(n)
    if kind == "star":
        return star(n)
    if kind == "erdos_renyi":
        return erdos_renyi(n, prob, seed)
    if kind == "random_geometric":
        return random_geometric(n, radius, seed)
    raise TopologyError(f"unknown topology kind {kind!r}")
