"""Per-snapshot metric catalog.

Exact algorithms at desk scale; documented sampling approximations above the
caps, always with recorded sample size and seed.  Distance-family metrics
(diameter, average shortest path, efficiency, betweenness, Wiener index and
the current-flow / communicability / vitality centralities) are computed on
the largest connected component; that convention is recorded in run
manifests.  Heavy standard machinery (max-flow connectivity, maximum
matching, current-flow and communicability centralities, Burt's constraint
and effective size, label propagation) delegates to networkx behind this
module's surface.
"""

from __future__ import annotations

import enum
import math
import random
from collections import Counter, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence, Union

import networkx as nx
import numpy as np

from .errors import (DegenerateDistribution, EmptyGraph, MetricUnsupportedInMode,
                     NoPairs)
from .graph import (DegreeDistribution, TopologyGraph, bfs_distances,
                    connected_components, largest_component, sample_forestfire)


class MetricId(enum.Enum):
    # structure
    NODE_COUNT = "node_count"
    EDGE_COUNT = "edge_count"
    COMPONENT_COUNT = "component_count"
    DENSITY = "density"
    DIAMETER = "diameter"
    AVG_SHORTEST_PATH = "avg_shortest_path"
    MEAN_DEGREE = "mean_degree"
    DEGREE_ASSORTATIVITY = "degree_assortativity"
    # connectivity and resilience
    BRIDGE_COUNT = "bridge_count"
    AVG_NODE_CONNECTIVITY = "avg_node_connectivity"
    MIN_EDGE_COVER_SIZE = "min_edge_cover_size"
    TRANSITIVITY = "transitivity"
    AVG_CLUSTERING = "avg_clustering"
    # function and dynamics
    GLOBAL_EFFICIENCY = "global_efficiency"
    INFORMATION_CENTRALITY = "information_centrality"
    MEAN_BETWEENNESS = "mean_betweenness"
    COMMUNICABILITY_BETWEENNESS = "communicability_betweenness"
    COMMON_NEIGHBOR_CENTRALITY = "common_neighbor_centrality"
    CONSTRAINT = "constraint"
    EFFECTIVE_SIZE = "effective_size"
    BURTS_EFFECTIVE_SIZE = "burts_effective_size"
    CLOSENESS_VITALITY = "closeness_vitality"
    # emergent patterns
    AVG_RESOURCE_ALLOCATION = "avg_resource_allocation"
    AVG_JACCARD = "avg_jaccard"
    AVG_PREFERENTIAL_ATTACHMENT = "avg_preferential_attachment"
    AVG_PREFERENTIAL_ATTACHMENT_NORMALIZED = "avg_preferential_attachment_normalized"
    FLP_COMMUNITY_COUNT = "flp_community_count"
    ALP_COMMUNITY_COUNT = "alp_community_count"
    # other
    GINI_BETWEENNESS = "gini_betweenness"
    WIENER_INDEX = "wiener_index"
    DEGREE_ENTROPY = "degree_entropy"
    POWER_LAW_FIT = "power_law_fit"


@dataclass(frozen=True)
class MetricParams:
    """Knobs shared by all metrics; defaults match the documented caps."""

    exact_cap: int = 2000        # largest n for exact O(n*m) distance metrics
    cubic_cap: int = 500         # largest n for dense linear-algebra metrics
    sample_size: int = 500
    seed: int = 0
    ccpa_alpha: float = 0.8
    pair_source: str = "edges"   # "edges" | "sampled_non_edges"
    non_edge_samples: int = 100_000


@dataclass(frozen=True)
class MetricValue:
    metric: MetricId
    value: Union[int, float, tuple[float, ...]]
    mode: str = "exact"          # "exact" | "sampled"
    n_samples: int | None = None
    seed: int | None = None


class PowerLawFit(NamedTuple):
    alpha: float
    r_squared: float


# ---------------------------------------------------------------------------
# Inequality helpers (shared with the routing simulator)
# ---------------------------------------------------------------------------

def gini(values: Iterable[float]) -> float:
    """Gini index via the sorted-rank form of the pairwise-difference formula.

    Values must be non-negative; an all-zero vector counts as perfectly equal.
    """
    vals = sorted(float(v) for v in values)
    n = len(vals)
    if n == 0:
        raise ValueError("gini of an empty vector")
    if vals[0] < 0:
        raise ValueError("gini requires non-negative values")
    total = sum(vals)
    if total == 0:
        return 0.0
    weighted = sum(i * v for i, v in enumerate(vals, start=1))
    return 2.0 * weighted / (n * total) - (n + 1) / n


def lorenz_points(values: Iterable[float]) -> list[tuple[float, float]]:
    """Cumulative-share curve over ascending values: n+1 points, (0,0) to (1,1).

    A zero-sum vector degenerates to the equality diagonal.
    """
    vals = sorted(float(v) for v in values)
    n = len(vals)
    if n == 0:
        raise ValueError("lorenz curve of an empty vector")
    total = sum(vals)
    points = [(0.0, 0.0)]
    cum = 0.0
    for i, v in enumerate(vals, start=1):
        cum += v
        share = cum / total if total > 0 else i / n
        points.append((i / n, share))
    return points


# ---------------------------------------------------------------------------
# Betweenness (Brandes accumulation, networkx-compatible normalization)
# ---------------------------------------------------------------------------

def betweenness_values(g: TopologyGraph, sources: Sequence[int] | None = None,
                       normalized: bool = True) -> list[float]:
    """Shortest-path betweenness per node.

    With ``sources`` given, accumulates only from those pivots and rescales by
    n/k (the standard pivot approximation).
    """
    n = g.n
    bc = [0.0] * n
    source_list = range(n) if sources is None else sources
    for s in source_list:
        stack: list[int] = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = [0] * n
        sigma[s] = 1
        dist = [-1] * n
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            dv = dist[v]
            sv = sigma[v]
            for w in g.adjacency[v]:
                if dist[w] < 0:
                    dist[w] = dv + 1
                    queue.append(w)
                if dist[w] == dv + 1:
                    sigma[w] += sv
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                delta[v] += sigma[v] * coeff
            if w != s:
                bc[w] += delta[w]
    if normalized:
        scale = 1.0 / ((n - 1) * (n - 2)) if n > 2 else 0.0
    else:
        scale = 0.5
    if sources is not None and len(source_list) > 0:
        scale *= n / len(source_list)
    return [b * scale for b in bc]


# ---------------------------------------------------------------------------
# Degree distribution fitting
# ---------------------------------------------------------------------------

def fit_power_law(dd: DegreeDistribution | Sequence[int]) -> PowerLawFit:
    """Least-squares line on (log k, log P(k)) over the degree frequency
    points with k >= 1; alpha is the negated slope, r^2 on the log-log points."""
    degrees = dd.degrees if isinstance(dd, DegreeDistribution) else tuple(dd)
    counts = Counter(d for d in degrees if d >= 1)
    if len(counts) < 3:
        raise DegenerateDistribution(
            f"need at least 3 distinct positive degrees, got {len(counts)}")
    total = len(degrees)
    ks = sorted(counts)
    xs = np.log(np.array(ks, dtype=float))
    ys = np.log(np.array([counts[k] / total for k in ks]))
    slope, intercept = np.polyfit(xs, ys, 1)
    predicted = slope * xs + intercept
    ss_res = float(np.sum((ys - predicted) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateDistribution("zero variance in log-frequencies")
    return PowerLawFit(float(-slope), 1.0 - ss_res / ss_tot)


# ---------------------------------------------------------------------------
# Link-prediction averages
# ---------------------------------------------------------------------------

_LINK_INDICES = ("resource_allocation", "jaccard", "preferential_attachment")


def _pair_universe(g: TopologyGraph, pair_source: str, n_pairs: int,
                   seed: int) -> tuple[list[tuple[int, int]], str]:
    if pair_source == "edges":
        pairs = list(g.edges())
        if not pairs:
            raise NoPairs("graph has no edges")
        return pairs, "exact"
    if pair_source != "sampled_non_edges":
        raise ValueError(f"unknown pair source {pair_source!r}")
    n = g.n
    total_pairs = n * (n - 1) // 2
    non_edge_count = total_pairs - g.edge_count
    if non_edge_count <= 0:
        raise NoPairs("graph has no non-edges")
    if non_edge_count <= n_pairs:
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)
                 if not g.has_edge(u, v)]
        return pairs, "exact"
    rng = random.Random(seed)
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < n_pairs:
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u == v:
            continue
        pair = (u, v) if u < v else (v, u)
        if not g.has_edge(*pair):
            chosen.add(pair)
    return sorted(chosen), "sampled"


def avg_link_prediction(g: TopologyGraph, index: str = "resource_allocation",
                        pair_source: str = "edges", n_pairs: int = 100_000,
                        seed: int = 0) -> float:
    """Mean link-prediction score over the pair universe.

    resource_allocation: sum over common neighbors of 1/deg;
    jaccard: |common| / |union|; preferential_attachment: deg * deg.
    """
    if index not in _LINK_INDICES:
        raise ValueError(f"unknown link-prediction index {index!r}")
    pairs, _ = _pair_universe(g, pair_source, n_pairs, seed)
    adj_sets = [set(a) for a in g.adjacency]
    degs = g.degrees()
    total = 0.0
    for u, v in pairs:
        if index == "preferential_attachment":
            total += degs[u] * degs[v]
        elif index == "jaccard":
            union = len(adj_sets[u] | adj_sets[v])
            total += len(adj_sets[u] & adj_sets[v]) / union if union else 0.0
        else:
            total += sum(1.0 / degs[w] for w in adj_sets[u] & adj_sets[v])
    return total / len(pairs)


# ---------------------------------------------------------------------------
# Community detection (label propagation, seeded)
# ---------------------------------------------------------------------------

def label_propagation_communities(g: TopologyGraph, variant: str = "fast",
                                  seed: int = 0) -> tuple[int, list[int]]:
    """Community count plus a per-node labeling, deterministic given the seed.

    ``fast``: queue-based propagation (unique initial labels, random seed
    order, majority adoption with random ties, changed neighbors re-enqueue).
    ``async``: random-order sweeps until no label changes.
    """
    if g.n == 0:
        raise EmptyGraph("label propagation on an empty graph")
    nxg = _to_networkx(g)
    if variant == "fast":
        communities = list(nx.community.fast_label_propagation_communities(nxg, seed=seed))
    elif variant == "async":
        communities = list(nx.community.asyn_lpa_communities(nxg, seed=seed))
    else:
        raise ValueError(f"unknown label propagation variant {variant!r}")
    communities.sort(key=min)
    labels = [0] * g.n
    for label, members in enumerate(communities):
        for node in members:
            labels[node] = label
    return len(communities), labels


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------

def _to_networkx(g: TopologyGraph) -> nx.Graph:
    nxg = nx.Graph()
    nxg.add_nodes_from(range(g.n))
    nxg.add_edges_from(g.edges())
    return nxg


def _sample_indices(n: int, k: int, seed: int) -> list[int]:
    rng = random.Random(seed)
    return sorted(rng.sample(range(n), k))


def _sample_pairs(n: int, k: int, seed: int) -> list[tuple[int, int]]:
    rng = random.Random(seed)
    chosen: set[tuple[int, int]] = set()
    total = n * (n - 1) // 2
    k = min(k, total)
    while len(chosen) < k:
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u != v:
            chosen.add((u, v) if u < v else (v, u))
    return sorted(chosen)


def _connected_stand_in(lc: TopologyGraph, params: MetricParams) -> TopologyGraph:
    """Connected subgraph of cap size used when dense metrics exceed the cap."""
    return sample_forestfire(lc, params.cubic_cap, 1, seed=params.seed)[0]


def count_bridges(g: TopologyGraph) -> int:
    """Edges whose removal increases the number of connected components."""
    n = g.n
    disc = [-1] * n
    low = [0] * n
    bridges = 0
    timer = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        # iterative low-link DFS; (node, parent, neighbor cursor)
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, 0, True)]
        while stack:
            u, parent, cursor, skip_parent = stack.pop()
            adj = g.adjacency[u]
            advanced = False
            while cursor < len(adj):
                v = adj[cursor]
                cursor += 1
                if v == parent and skip_parent:
                    skip_parent = False      # one parent edge only (simple graph)
                    continue
                if disc[v] < 0:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((u, parent, cursor, skip_parent))
                    stack.append((v, u, 0, True))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if not advanced and parent >= 0:
                low[parent] = min(low[parent], low[u])
                if low[u] > disc[parent]:
                    bridges += 1
    return bridges


def _row_sums(g: TopologyGraph, sources: Iterable[int]):
    """Per-source (sum of finite distances, max distance, count of 1/d)."""
    for s in sources:
        dist = bfs_distances(g, s)
        total = 0.0
        eff = 0.0
        ecc = 0.0
        for i, d in enumerate(dist):
            if i == s or d == math.inf:
                continue
            total += d
            eff += 1.0 / d
            ecc = max(ecc, d)
        yield total, eff, ecc


def _distance_sweep(lc: TopologyGraph, params: MetricParams):
    """(sum_d, sum_inv_d, max_ecc, mode, n_samples, seed) over rows of the
    largest component, sampling sources above the exact cap."""
    if lc.n <= params.exact_cap:
        sources: Sequence[int] = range(lc.n)
        mode, n_samples, seed = "exact", None, None
    else:
        sources = _sample_indices(lc.n, params.sample_size, params.seed)
        mode, n_samples, seed = "sampled", len(sources), params.seed
    sum_d = sum_inv = 0.0
    ecc = 0.0
    rows = 0
    for total, eff, row_ecc in _row_sums(lc, sources):
        sum_d += total
        sum_inv += eff
        ecc = max(ecc, row_ecc)
        rows += 1
    return sum_d, sum_inv, ecc, rows, mode, n_samples, seed


# ---------------------------------------------------------------------------
# Metric implementations
# ---------------------------------------------------------------------------

_EXACT = ("exact", None, None)


def _m_node_count(g, params):
    return g.n, *_EXACT


def _m_edge_count(g, params):
    return g.edge_count, *_EXACT


def _m_component_count(g, params):
    return len(connected_components(g)), *_EXACT


def _m_density(g, params):
    if g.n < 2:
        return 0.0, *_EXACT
    return 2.0 * g.edge_count / (g.n * (g.n - 1)), *_EXACT


def _m_mean_degree(g, params):
    return 2.0 * g.edge_count / g.n, *_EXACT


def _m_diameter(g, params):
    lc = largest_component(g)
    if lc.n < 2:
        return 0.0, *_EXACT
    _, _, ecc, _, mode, n_samples, seed = _distance_sweep(lc, params)
    return ecc, mode, n_samples, seed


def _m_avg_shortest_path(g, params):
    lc = largest_component(g)
    if lc.n < 2:
        return float("nan"), *_EXACT
    sum_d, _, _, rows, mode, n_samples, seed = _distance_sweep(lc, params)
    return sum_d / (rows * (lc.n - 1)), mode, n_samples, seed


def _m_global_efficiency(g, params):
    lc = largest_component(g)
    if lc.n < 2:
        return 0.0, *_EXACT
    _, sum_inv, _, rows, mode, n_samples, seed = _distance_sweep(lc, params)
    return sum_inv / (rows * (lc.n - 1)), mode, n_samples, seed


def _m_wiener_index(g, params):
    lc = largest_component(g)
    if lc.n < 2:
        return 0.0, *_EXACT
    sum_d, _, _, rows, mode, n_samples, seed = _distance_sweep(lc, params)
    return sum_d * lc.n / rows / 2.0, mode, n_samples, seed


def _m_degree_assortativity(g, params):
    xs: list[int] = []
    ys: list[int] = []
    degs = g.degrees()
    for u, v in g.edges():
        xs.extend((degs[u], degs[v]))
        ys.extend((degs[v], degs[u]))
    if not xs:
        return float("nan"), *_EXACT
    x = np.array(xs, dtype=float)
    y = np.array(ys, dtype=float)
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        return float("nan"), *_EXACT
    r = float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))
    return r, *_EXACT


def _m_bridge_count(g, params):
    return count_bridges(g), *_EXACT


def _m_avg_node_connectivity(g, params):
    from networkx.algorithms.connectivity import (build_auxiliary_node_connectivity,
                                                  local_node_connectivity)
    from networkx.algorithms.flow import build_residual_network
    total_pairs = g.n * (g.n - 1) // 2
    if total_pairs == 0:
        return 0.0, *_EXACT
    if total_pairs <= params.sample_size:
        pairs = [(u, v) for u in range(g.n) for v in range(u + 1, g.n)]
        mode, n_samples, seed = "exact", None, None
    else:
        pairs = _sample_pairs(g.n, params.sample_size, params.seed)
        mode, n_samples, seed = "sampled", len(pairs), params.seed
    nxg = _to_networkx(g)
    aux = build_auxiliary_node_connectivity(nxg)
    residual = build_residual_network(aux, "capacity")
    total = sum(local_node_connectivity(nxg, u, v, auxiliary=aux, residual=residual)
                for u, v in pairs)
    return total / len(pairs), mode, n_samples, seed


def _m_min_edge_cover_size(g, params):
    if any(d == 0 for d in g.degrees()):
        raise MetricUnsupportedInMode("edge cover undefined with isolated nodes")
    if g.n <= params.cubic_cap:
        matching = nx.max_weight_matching(_to_networkx(g), maxcardinality=True)
        return g.n - len(matching), *_EXACT
    sub = _connected_stand_in(largest_component(g), params)
    matching = nx.max_weight_matching(_to_networkx(sub), maxcardinality=True)
    estimate = g.n * (sub.n - len(matching)) / sub.n
    return estimate, "sampled", sub.n, params.seed


def _common_neighbor_sums(g: TopologyGraph):
    """Per-edge common-neighbor counts; yields (u, v, count)."""
    adj_sets = [set(a) for a in g.adjacency]
    for u, v in g.edges():
        yield u, v, len(adj_sets[u] & adj_sets[v])


def _m_transitivity(g, params):
    triads = sum(d * (d - 1) // 2 for d in g.degrees())
    if triads == 0:
        return 0.0, *_EXACT
    closed = sum(c for _, _, c in _common_neighbor_sums(g))
    return closed / triads, *_EXACT


def _m_avg_clustering(g, params):
    adj_sets = [set(a) for a in g.adjacency]
    total = 0.0
    for v in range(g.n):
        d = len(adj_sets[v])
        if d < 2:
            continue
        triangles = sum(len(adj_sets[v] & adj_sets[u]) for u in adj_sets[v]) / 2
        total += triangles / (d * (d - 1) / 2)
    return total / g.n, *_EXACT


def _m_information_centrality(g, params):
    lc = largest_component(g)
    if lc.n < 2:
        return float("nan"), *_EXACT
    if lc.n <= params.cubic_cap:
        target, mode, n_samples, seed = lc, "exact", None, None
    else:
        target = _connected_stand_in(lc, params)
        mode, n_samples, seed = "sampled", target.n, params.seed
    values = nx.information_centrality(_to_networkx(target))
    return float(np.mean(list(values.values()))), mode, n_samples, seed


def _betweenness_with_mode(g, params):
    lc = largest_component(g)
    if lc.n <= params.exact_cap:
        return lc, betweenness_values(lc), "exact", None, None
    sources = _sample_indices(lc.n, params.sample_size, params.seed)
    return lc, betweenness_values(lc, sources=sources), "sampled", len(sources), params.seed


def _m_mean_betweenness(g, params):
    _, values, mode, n_samples, seed = _betweenness_with_mode(g, params)
    return float(np.mean(values)) if values else 0.0, mode, n_samples, seed


def _m_gini_betweenness(g, params):
    _, values, mode, n_samples, seed = _betweenness_with_mode(g, params)
    return gini(values), mode, n_samples, seed


def _m_communicability_betweenness(g, params):
    lc = largest_component(g)
    if lc.n < 2:
        return float("nan"), *_EXACT
    if lc.n <= params.cubic_cap:
        target, mode, n_samples, seed = lc, "exact", None, None
    else:
        target = _connected_stand_in(lc, params)
        mode, n_samples, seed = "sampled", target.n, params.seed
    values = nx.communicability_betweenness_centrality(_to_networkx(target))
    return float(np.mean(list(values.values()))), mode, n_samples, seed


def _m_common_neighbor_centrality(g, params):
    alpha = params.ccpa_alpha
    adj_sets = [set(a) for a in g.adjacency]
    if params.pair_source == "edges":
        pairs = list(g.edges())
        if not pairs:
            raise NoPairs("graph has no edges")
        mode, n_samples, seed = "exact", None, None
        distances = {pair: 1.0 for pair in pairs}
    else:
        pairs, pair_mode = _pair_universe(g, "sampled_non_edges",
                                          params.non_edge_samples, params.seed)
        mode = pair_mode
        n_samples, seed = (len(pairs), params.seed) if pair_mode == "sampled" else (None, None)
        distances = {}
        for u in sorted({u for u, _ in pairs}):
            row = bfs_distances(g, u)
            for pu, pv in pairs:
                if pu == u:
                    distances[(pu, pv)] = row[pv]
    total = 0.0
    for u, v in pairs:
        d = distances[(u, v)]
        reach = g.n / d if d != math.inf else 0.0
        total += alpha * len(adj_sets[u] & adj_sets[v]) + (1 - alpha) * reach
    return total / len(pairs), mode, n_samples, seed


def _nodewise_networkx(g, params, fn):
    """Mean of a per-node networkx metric, node-sampled above the exact cap."""
    if g.n <= params.exact_cap:
        nodes, mode, n_samples, seed = None, "exact", None, None
    else:
        nodes = _sample_indices(g.n, params.sample_size, params.seed)
        mode, n_samples, seed = "sampled", len(nodes), params.seed
    values = fn(_to_networkx(g), nodes)
    finite = [v for v in values if not math.isnan(v)]
    if not finite:
        return float("nan"), mode, n_samples, seed
    return float(np.mean(finite)), mode, n_samples, seed


def _m_constraint(g, params):
    def fn(nxg, nodes):
        return list(nx.constraint(nxg, nodes=nodes).values())
    return _nodewise_networkx(g, params, fn)


def _m_effective_size(g, params):
    def fn(nxg, nodes):
        return list(nx.effective_size(nxg, nodes=nodes).values())
    return _nodewise_networkx(g, params, fn)


def _m_burts_effective_size(g, params):
    # degree-normalized ego efficiency: effective size over ego degree
    degs = g.degrees()

    def fn(nxg, nodes):
        sizes = nx.effective_size(nxg, nodes=nodes)
        return [size / degs[node] if degs[node] > 0 else float("nan")
                for node, size in sizes.items()]
    return _nodewise_networkx(g, params, fn)


def _m_closeness_vitality(g, params):
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    lc = largest_component(g)
    if lc.n == 1:
        return 0.0, *_EXACT
    if lc.n <= params.cubic_cap:
        target, mode, n_samples, seed = lc, "exact", None, None
    else:
        target = _connected_stand_in(lc, params)
        mode, n_samples, seed = "sampled", target.n, params.seed
    n = target.n
    rows, cols = [], []
    for u, v in target.edges():
        rows.extend((u, v))
        cols.extend((v, u))
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    full = shortest_path(adj, method="D", directed=False, unweighted=True)
    wiener = full.sum() / 2.0
    keep = np.ones(n, dtype=bool)
    vitalities = []
    for v in range(n):
        keep[v] = False
        sub = adj[keep][:, keep]
        dist = shortest_path(sub, method="D", directed=False, unweighted=True)
        keep[v] = True
        if np.isinf(dist).any():
            continue                      # cut vertex: vitality diverges
        vitalities.append(wiener - dist.sum() / 2.0)
    if not vitalities:
        return float("nan"), mode, n_samples, seed
    return float(np.mean(vitalities)), mode, n_samples, seed


def _link_avg(g, params, index):
    n_pairs = params.non_edge_samples
    value = avg_link_prediction(g, index, params.pair_source, n_pairs, params.seed)
    if params.pair_source == "edges":
        return value, "exact", None, None
    return value, "sampled", n_pairs, params.seed


def _m_avg_resource_allocation(g, params):
    return _link_avg(g, params, "resource_allocation")


def _m_avg_jaccard(g, params):
    return _link_avg(g, params, "jaccard")


def _m_avg_preferential_attachment(g, params):
    return _link_avg(g, params, "preferential_attachment")


def _m_avg_pa_normalized(g, params):
    value, mode, n_samples, seed = _link_avg(g, params, "preferential_attachment")
    mean_degree = 2.0 * g.edge_count / g.n
    if mean_degree == 0:
        return float("nan"), mode, n_samples, seed
    return value / mean_degree, mode, n_samples, seed


def _m_flp_communities(g, params):
    count, _ = label_propagation_communities(g, "fast", params.seed)
    return count, "sampled", 1, params.seed


def _m_alp_communities(g, params):
    count, _ = label_propagation_communities(g, "async", params.seed)
    return count, "sampled", 1, params.seed


def _m_degree_entropy(g, params):
    counts = Counter(g.degrees())
    n = g.n
    entropy = -sum((c / n) * math.log2(c / n) for c in counts.values())
    return entropy, *_EXACT


def _m_power_law_fit(g, params):
    fit = fit_power_law(DegreeDistribution.from_graph(g))
    return (fit.alpha, fit.r_squared), *_EXACT


_DISPATCH: dict[MetricId, Callable] = {
    MetricId.NODE_COUNT: _m_node_count,
    MetricId.EDGE_COUNT: _m_edge_count,
    MetricId.COMPONENT_COUNT: _m_component_count,
    MetricId.DENSITY: _m_density,
    MetricId.DIAMETER: _m_diameter,
    MetricId.AVG_SHORTEST_PATH: _m_avg_shortest_path,
    MetricId.MEAN_DEGREE: _m_mean_degree,
    MetricId.DEGREE_ASSORTATIVITY: _m_degree_assortativity,
    MetricId.BRIDGE_COUNT: _m_bridge_count,
    MetricId.AVG_NODE_CONNECTIVITY: _m_avg_node_connectivity,
    MetricId.MIN_EDGE_COVER_SIZE: _m_min_edge_cover_size,
    MetricId.TRANSITIVITY: _m_transitivity,
    MetricId.AVG_CLUSTERING: _m_avg_clustering,
    MetricId.GLOBAL_EFFICIENCY: _m_global_efficiency,
    MetricId.INFORMATION_CENTRALITY: _m_information_centrality,
    MetricId.MEAN_BETWEENNESS: _m_mean_betweenness,
    MetricId.COMMUNICABILITY_BETWEENNESS: _m_communicability_betweenness,
    MetricId.COMMON_NEIGHBOR_CENTRALITY: _m_common_neighbor_centrality,
    MetricId.CONSTRAINT: _m_constraint,
    MetricId.EFFECTIVE_SIZE: _m_effective_size,
    MetricId.BURTS_EFFECTIVE_SIZE: _m_burts_effective_size,
    MetricId.CLOSENESS_VITALITY: _m_closeness_vitality,
    MetricId.AVG_RESOURCE_ALLOCATION: _m_avg_resource_allocation,
    MetricId.AVG_JACCARD: _m_avg_jaccard,
    MetricId.AVG_PREFERENTIAL_ATTACHMENT: _m_avg_preferential_attachment,
    MetricId.AVG_PREFERENTIAL_ATTACHMENT_NORMALIZED: _m_avg_pa_normalized,
    MetricId.FLP_COMMUNITY_COUNT: _m_flp_communities,
    MetricId.ALP_COMMUNITY_COUNT: _m_alp_communities,
    MetricId.GINI_BETWEENNESS: _m_gini_betweenness,
    MetricId.WIENER_INDEX: _m_wiener_index,
    MetricId.DEGREE_ENTROPY: _m_degree_entropy,
    MetricId.POWER_LAW_FIT: _m_power_law_fit,
}


def compute(g: TopologyGraph, metric: MetricId | str,
            params: MetricParams | None = None) -> MetricValue:
    """Compute one catalog metric; deterministic given (params.seed)."""
    metric = MetricId(metric) if not isinstance(metric, MetricId) else metric
    if g.n == 0:
        raise EmptyGraph(f"{metric.value} on an empty graph")
    params = params or MetricParams()
    value, mode, n_samples, seed = _DISPATCH[metric](g, params)
    return MetricValue(metric=metric, value=value, mode=mode,
                       n_samples=n_samples, seed=seed)


# ---------------------------------------------------------------------------
# Metric series table and its CSV form
# ---------------------------------------------------------------------------

_CSV_HEADER = ["timestamp", "metric_id", "value", "mode", "n_samples", "seed"]


def _format_number(x) -> str:
    if isinstance(x, bool):
        raise TypeError("boolean metric value")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _parse_number(token: str):
    try:
        return int(token)
    except ValueError:
        return float(token)


class MetricSeries:
    """(timestamp, metric) -> MetricValue table; at most one row per key.

    Failed computations are carried as error rows so a long run never loses
    the rest of its output.
    """

    def __init__(self):
        self._rows: dict[tuple[int, str], MetricValue] = {}
        self._errors: dict[tuple[int, str], str] = {}

    def add(self, timestamp: int, value: MetricValue) -> None:
        key = (timestamp, value.metric.value)
        if key in self._rows or key in self._errors:
            raise ValueError(f"duplicate metric row {key}")
        self._rows[key] = value

    def add_error(self, timestamp: int, metric: MetricId | str, reason: str) -> None:
        metric_id = metric.value if isinstance(metric, MetricId) else str(metric)
        key = (timestamp, metric_id)
        if key in self._rows or key in self._errors:
            raise ValueError(f"duplicate metric row {key}")
        self._errors[key] = reason

    def get(self, timestamp: int, metric: MetricId | str) -> MetricValue | None:
        metric_id = metric.value if isinstance(metric, MetricId) else str(metric)
        return self._rows.get((timestamp, metric_id))

    @property
    def error_count(self) -> int:
        return len(self._errors)

    def timestamps(self) -> list[int]:
        seen = {ts for ts, _ in self._rows} | {ts for ts, _ in self._errors}
        return sorted(seen)

    def rows(self):
        for (ts, _), value in sorted(self._rows.items()):
            yield ts, value

    def to_csv(self, path: Union[str, Path]) -> None:
        import csv as _csv
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = _csv.writer(handle, lineterminator="\n")
            writer.writerow(_CSV_HEADER)
            keys = sorted(set(self._rows) | set(self._errors))
            for key in keys:
                ts, metric_id = key
                if key in self._rows:
                    mv = self._rows[key]
                    if isinstance(mv.value, tuple):
                        cell = ";".join(_format_number(x) for x in mv.value)
                    else:
                        cell = _format_number(mv.value)
                    writer.writerow([ts, metric_id, cell, mv.mode,
                                     "" if mv.n_samples is None else mv.n_samples,
                                     "" if mv.seed is None else mv.seed])
                else:
                    writer.writerow([ts, metric_id, "", f"error:{self._errors[key]}", "", ""])

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "MetricSeries":
        import csv as _csv
        series = cls()
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = _csv.reader(handle)
            header = next(reader, None)
            if header != _CSV_HEADER:
                raise ValueError(f"unexpected metrics CSV header: {header}")
            for row in reader:
                ts = int(row[0])
                metric_id = row[1]
                if row[3].startswith("error:"):
                    series.add_error(ts, metric_id, row[3][len("error:"):])
                    continue
                tokens = row[2].split(";")
                value = (_parse_number(tokens[0]) if len(tokens) == 1
                         else tuple(float(t) for t in tokens))
                series.add(ts, MetricValue(
                    metric=MetricId(metric_id), value=value, mode=row[3],
                    n_samples=int(row[4]) if row[4] else None,
                    seed=int(row[5]) if row[5] else None))
        return series
