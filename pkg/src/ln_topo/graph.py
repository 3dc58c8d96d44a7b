"""Immutable undirected simple graph with contiguous integer indices.

Channel multiplicities collapse to single edges; 33-byte node ids survive only
in the id map so traversal loops stay on small integers.  Includes component
extraction, BFS distance primitives, degree distributions, and connected
subgraph sampling by probabilistic neighborhood burning.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

from .errors import ComponentTooSmall, NodeNotFound
from .snapshot import Snapshot

INFINITY = float("inf")


class TopologyGraph:
    """Undirected simple graph: sorted adjacency lists plus an id map."""

    __slots__ = ("n", "adjacency", "ids", "_index")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]],
                 ids: Sequence[str] | None = None):
        if ids is not None and len(ids) != n:
            raise ValueError(f"id map size {len(ids)} != node count {n}")
        neighbor_sets: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise NodeNotFound(f"edge ({u},{v}) outside 0..{n - 1}")
            if u == v:
                continue
            neighbor_sets[u].add(v)
            neighbor_sets[v].add(u)
        self.n = n
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(s)) for s in neighbor_sets)
        self.ids: tuple[str, ...] = tuple(ids) if ids is not None else tuple(
            str(i) for i in range(n))
        self._index = {node_id: i for i, node_id in enumerate(self.ids)}

    @property
    def edge_count(self) -> int:
        return sum(len(adj) for adj in self.adjacency) // 2

    def edges(self) -> Iterator[tuple[int, int]]:
        for u in range(self.n):
            for v in self.adjacency[u]:
                if u < v:
                    yield u, v

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def degrees(self) -> list[int]:
        return [len(adj) for adj in self.adjacency]

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise NodeNotFound(node_id) from None

    def has_edge(self, u: int, v: int) -> bool:
        a = self.adjacency[u]
        lo, hi = 0, len(a)
        while lo < hi:
            mid = (lo + hi) // 2
            if a[mid] < v:
                lo = mid + 1
            else:
                hi = mid
        return lo < len(a) and a[lo] == v

    def subgraph(self, nodes: Sequence[int]) -> "TopologyGraph":
        """Induced subgraph on the given node indices (in the given order)."""
        remap = {old: new for new, old in enumerate(nodes)}
        edges = [(remap[u], remap[v]) for u in nodes for v in self.adjacency[u]
                 if v in remap and u < v]
        return TopologyGraph(len(nodes), edges, [self.ids[u] for u in nodes])


def to_undirected(snapshot: Snapshot) -> TopologyGraph:
    """One edge per unordered endpoint pair, regardless of channel multiplicity."""
    ids = sorted(snapshot.nodes)
    index = {node_id: i for i, node_id in enumerate(ids)}
    edges = {tuple(sorted((index[ch.endpoint_a], index[ch.endpoint_b])))
             for ch in snapshot.channels}
    return TopologyGraph(len(ids), edges, ids)


def connected_components(g: TopologyGraph) -> list[list[int]]:
    """Components as sorted index lists, ordered by first (smallest) member."""
    seen = [False] * g.n
    components = []
    for start in range(g.n):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        members = [start]
        while queue:
            u = queue.popleft()
            for v in g.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    members.append(v)
                    queue.append(v)
        members.sort()
        components.append(members)
    return components


def largest_component(g: TopologyGraph) -> TopologyGraph:
    """Induced subgraph on the largest component; ties keep the smallest
    minimum node index (i.e. the first one found)."""
    if g.n == 0:
        return g
    best: list[int] | None = None
    for component in connected_components(g):
        if best is None or len(component) > len(best):
            best = component
    return g.subgraph(best)


def bfs_distances(g: TopologyGraph, source: int) -> list[float]:
    """Unweighted hop distances from ``source``; unreachable nodes are inf."""
    if not (0 <= source < g.n):
        raise NodeNotFound(f"source index {source}")
    dist: list[float] = [INFINITY] * g.n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u]
        for v in g.adjacency[u]:
            if dist[v] == INFINITY:
                dist[v] = du + 1
                queue.append(v)
    return dist


def all_pairs_distances(g: TopologyGraph) -> Iterator[tuple[int, list[float]]]:
    """Rows of (source, distances); rows are independent of each other."""
    for source in range(g.n):
        yield source, bfs_distances(g, source)


@dataclass(frozen=True)
class DegreeDistribution:
    """Multiset of node degrees, kept as a sorted tuple."""

    degrees: tuple[int, ...]

    @classmethod
    def from_graph(cls, g: TopologyGraph) -> "DegreeDistribution":
        return cls(tuple(sorted(g.degrees())))

    @classmethod
    def from_values(cls, values: Iterable[int]) -> "DegreeDistribution":
        return cls(tuple(sorted(values)))

    def __len__(self) -> int:
        return len(self.degrees)


# ---------------------------------------------------------------------------
# Connected subgraph sampling
# ---------------------------------------------------------------------------

def sample_forestfire(g: TopologyGraph, target_size: int, count: int,
                      p_forward: float = 0.7, seed: int = 0) -> list[TopologyGraph]:
    """Sample ``count`` connected induced subgraphs of exactly ``target_size``.

    Fire spreads from a uniformly random ignition node: each untouched
    neighbor of a burning node catches independently with probability
    ``p_forward``, frontier processed in BFS order.  A dead fire re-ignites
    from a random burned node; the final burn wave is truncated to hit the
    target size exactly.  Deterministic for a given seed.
    """
    if not 0 < p_forward <= 1:
        raise ValueError(f"p_forward must be in (0, 1], got {p_forward}")
    eligible: list[int] = []
    for component in connected_components(g):
        if len(component) >= target_size:
            eligible.extend(component)
    if not eligible:
        raise ComponentTooSmall(
            f"no component has at least {target_size} nodes (n={g.n})")
    eligible.sort()
    master = random.Random(seed)
    samples = []
    for _ in range(count):
        rng = random.Random(master.getrandbits(64))
        burned = _burn(g, target_size, p_forward, rng, eligible)
        samples.append(g.subgraph(sorted(burned)))
    return samples


def _burn(g: TopologyGraph, target_size: int, p_forward: float,
          rng: random.Random, eligible: list[int]) -> set[int]:
    ignition = eligible[rng.randrange(len(eligible))]
    burned = {ignition}
    burned_order = [ignition]
    queue = deque([ignition])
    while len(burned) < target_size:
        if not queue:
            # fire died: re-ignite from a random burned node that can spread
            candidates = [u for u in burned_order
                          if any(v not in burned for v in g.adjacency[u])]
            queue.append(candidates[rng.randrange(len(candidates))])
        u = queue.popleft()
        for v in g.adjacency[u]:
            if v not in burned and rng.random() < p_forward:
                burned.add(v)
                burned_order.append(v)
                queue.append(v)
                if len(burned) == target_size:
                    return burned
    return burned


# ---------------------------------------------------------------------------
# Edge-list fixture format: one "u v" pair per line, 0-based indices
# ---------------------------------------------------------------------------

def read_edge_list(path: Union[str, Path], n: int | None = None) -> TopologyGraph:
    edges = []
    max_index = -1
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            u_str, v_str = text.split()
            u, v = int(u_str), int(v_str)
            max_index = max(max_index, u, v)
            edges.append((u, v))
    return TopologyGraph(n if n is not None else max_index + 1, edges)


def write_edge_list(g: TopologyGraph, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for u, v in g.edges():
            handle.write(f"{u} {v}\n")
