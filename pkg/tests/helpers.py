"""Shared fixtures and independent oracles for the test suite.

Oracles here deliberately use different algorithms than the implementations
they check: brute-force path enumeration for betweenness, Floyd-Warshall for
distances, Bellman-Ford for route costs, union-find for components, label
permutation for KS p-values, discrete maximum likelihood for power-law
exponents, and the pairwise-difference formula for Gini.
"""

from __future__ import annotations

import itertools
import math
import random
import struct

import numpy as np

from ln_topo.gossip import (ChannelAnnouncement, ChannelUpdate, GossipRecord,
                            ShortChannelId, record_of)
from ln_topo.graph import TopologyGraph
from ln_topo.routing import CostModel, edge_cost
from ln_topo.snapshot import Channel, ChannelPolicy, Snapshot


def hexid(i: int) -> str:
    """Deterministic 33-byte node id, ordered by i."""
    return (b"\x02" + i.to_bytes(32, "big")).hex()


# ---------------------------------------------------------------------------
# Wire payload synthesis (zeroed signatures/chain_hash/features/rgb so the
# serializer reproduces inputs byte-exactly)
# ---------------------------------------------------------------------------

def synth_channel_update(rng: random.Random) -> bytes:
    scid = rng.randrange(1 << 64)
    with_max = rng.random() < 0.7
    message_flags = 1 if with_max else 0
    channel_flags = rng.randrange(2) | (2 if rng.random() < 0.2 else 0)
    htlc_min = rng.randrange(1 << 32)
    body = struct.pack(
        ">QIBBHQII", scid, rng.randrange(1, 1 << 32), message_flags, channel_flags,
        rng.randrange(1 << 16), htlc_min, rng.randrange(1 << 32), rng.randrange(1 << 32))
    if with_max:
        body += struct.pack(">Q", htlc_min + rng.randrange(1 << 30))
    return struct.pack(">H", 258) + bytes(64 + 32) + body


def synth_channel_announcement(rng: random.Random) -> bytes:
    first, second = sorted(rng.sample(range(1, 1 << 20), 2))
    return (struct.pack(">H", 256) + bytes(4 * 64) + struct.pack(">H", 0) + bytes(32)
            + struct.pack(">Q", rng.randrange(1 << 64))
            + bytes.fromhex(hexid(first)) + bytes.fromhex(hexid(second)) + bytes(66))


def synth_node_announcement(rng: random.Random) -> bytes:
    alias = bytes(rng.randrange(1, 256) for _ in range(rng.randrange(12)))
    alias = alias.rstrip(b"\x00")
    addresses = b""
    if rng.random() < 0.5:
        addresses = bytes([1]) + bytes(rng.randrange(256) for _ in range(6))
    return (struct.pack(">H", 257) + bytes(64) + struct.pack(">H", 0)
            + struct.pack(">I", rng.randrange(1, 1 << 32))
            + bytes.fromhex(hexid(rng.randrange(1, 1 << 20))) + bytes(3)
            + alias.ljust(32, b"\x00")
            + struct.pack(">H", len(addresses)) + addresses)


def synth_payload(rng: random.Random) -> bytes:
    kind = rng.randrange(3)
    if kind == 0:
        return synth_channel_update(rng)
    if kind == 1:
        return synth_channel_announcement(rng)
    return synth_node_announcement(rng)


def min_payload_len(data: bytes) -> int:
    """Length of the fixed layout for a synthesized payload."""
    msg_type = struct.unpack_from(">H", data, 0)[0]
    if msg_type == 256:
        return 2 + 4 * 64 + 2 + 32 + 8 + 4 * 33
    if msg_type == 257:
        addrlen = struct.unpack_from(">H", data, 2 + 64 + 2 + 4 + 33 + 3 + 32)[0]
        return 2 + 64 + 2 + 4 + 33 + 3 + 32 + 2 + addrlen
    message_flags = data[2 + 64 + 32 + 8 + 4]
    return 2 + 64 + 32 + 8 + 4 + 1 + 1 + 2 + 8 + 4 + 4 + (8 if message_flags & 1 else 0)


# ---------------------------------------------------------------------------
# Snapshot fixtures
# ---------------------------------------------------------------------------

def usable_policy(direction: int, fee_base: int = 1000, fee_ppm: int = 100,
                  cltv: int = 40, last_update: int = 100,
                  disabled: bool = False) -> ChannelPolicy:
    return ChannelPolicy(direction=direction, fee_base_msat=fee_base,
                         fee_proportional_millionths=fee_ppm, cltv_expiry_delta=cltv,
                         htlc_minimum_msat=0, htlc_maximum_msat=None,
                         last_update=last_update, disabled=disabled)


def snapshot_from_edges(edges, at: int = 1000, window: int = 14 * 86400,
                        rng: random.Random | None = None,
                        fee_range=(0, 5000), ppm_range=(0, 2000),
                        cltv_range=(0, 144)) -> Snapshot:
    """Snapshot over integer-indexed edges; both directions usable.

    Random (seeded) fees/cltv when rng given, fixed defaults otherwise.
    """
    channels = []
    nodes = set()
    for k, (u, v) in enumerate(sorted(set(map(lambda e: tuple(sorted(e)), edges)))):
        a, b = hexid(u), hexid(v)
        nodes.update((a, b))

        def policy(direction):
            if rng is None:
                return usable_policy(direction)
            return usable_policy(
                direction,
                fee_base=rng.randrange(fee_range[0], fee_range[1] + 1),
                fee_ppm=rng.randrange(ppm_range[0], ppm_range[1] + 1),
                cltv=rng.randrange(cltv_range[0], cltv_range[1] + 1))
        channels.append(Channel(ShortChannelId.from_u64(k + 1), a, b,
                                policy(0), policy(1)))
    return Snapshot(at, frozenset(nodes), tuple(channels), window)


def random_connected_edges(rng: random.Random, n: int, extra: int) -> list[tuple[int, int]]:
    """Random spanning tree plus ``extra`` random chords."""
    edges = [(rng.randrange(i), i) for i in range(1, n)]
    for _ in range(extra):
        u, v = rng.sample(range(n), 2)
        edges.append((min(u, v), max(u, v)))
    return edges


def random_graph(rng: random.Random, n: int, p: float) -> TopologyGraph:
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return TopologyGraph(n, edges)


# ---------------------------------------------------------------------------
# Distance / component / betweenness oracles
# ---------------------------------------------------------------------------

def oracle_floyd_warshall(g: TopologyGraph):
    n = g.n
    dist = [[math.inf] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = 0
    for u, v in g.edges():
        dist[u][v] = dist[v][u] = 1
    for k in range(n):
        for i in range(n):
            dik = dist[i][k]
            if dik == math.inf:
                continue
            for j in range(n):
                alt = dik + dist[k][j]
                if alt < dist[i][j]:
                    dist[i][j] = alt
    return dist


def oracle_components_union_find(g: TopologyGraph) -> list[list[int]]:
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in g.edges():
        parent[find(u)] = find(v)
    groups: dict[int, list[int]] = {}
    for node in range(g.n):
        groups.setdefault(find(node), []).append(node)
    return sorted((sorted(members) for members in groups.values()), key=lambda m: m[0])


def oracle_betweenness_bruteforce(g: TopologyGraph) -> list[float]:
    """Normalized betweenness by enumerating every shortest path (n <= ~12)."""
    n = g.n
    dist = oracle_floyd_warshall(g)
    counts = [0.0] * n
    for s, t in itertools.combinations(range(n), 2):
        if dist[s][t] == math.inf:
            continue
        paths: list[list[int]] = []
        stack = [[s]]
        while stack:
            path = stack.pop()
            u = path[-1]
            if u == t:
                paths.append(path)
                continue
            for v in g.adjacency[u]:
                if dist[s][v] == len(path) and dist[v][t] == dist[s][t] - len(path):
                    stack.append(path + [v])
        sigma = len(paths)
        for path in paths:
            for v in path[1:-1]:
                counts[v] += 1.0 / sigma
    if n <= 2:
        return [0.0] * n
    norm = (n - 1) * (n - 2) / 2.0
    return [c / norm for c in counts]


def oracle_transitivity(g: TopologyGraph) -> float:
    # closed triples / connected triples; each triangle closes 3 triples
    closed = 0
    triads = 0
    adj = [set(a) for a in g.adjacency]
    for v in range(g.n):
        d = len(adj[v])
        triads += d * (d - 1) // 2
        for u, w in itertools.combinations(adj[v], 2):
            if w in adj[u]:
                closed += 1
    return closed / triads if triads else 0.0


def oracle_gini_pairwise(values) -> float:
    vals = [float(v) for v in values]
    n = len(vals)
    mu = sum(vals) / n
    if mu == 0:
        return 0.0
    total = sum(abs(a - b) for a in vals for b in vals)
    return total / (2 * n * n * mu)


# ---------------------------------------------------------------------------
# Routing oracle
# ---------------------------------------------------------------------------

def oracle_bellman_ford_cost(snapshot: Snapshot, source: str, destination: str,
                             model: CostModel, amount_msat: int) -> float:
    """Minimum route cost by edge relaxation; inf when unreachable."""
    ids = sorted(snapshot.nodes)
    index = {node: i for i, node in enumerate(ids)}
    edges = []
    for channel in snapshot.channels:
        a, b = index[channel.endpoint_a], index[channel.endpoint_b]
        for policy, src, dst in ((channel.policy_a, a, b), (channel.policy_b, b, a)):
            if policy is None:
                continue
            try:
                edges.append((src, dst, edge_cost(model, policy, amount_msat)))
            except Exception:
                continue
    dist = [math.inf] * len(ids)
    dist[index[source]] = 0.0
    for _ in range(len(ids) - 1):
        changed = False
        for src, dst, weight in edges:
            if dist[src] + weight < dist[dst]:
                dist[dst] = dist[src] + weight
                changed = True
        if not changed:
            break
    return dist[index[destination]]


# ---------------------------------------------------------------------------
# Statistics oracles
# ---------------------------------------------------------------------------

def oracle_ks_permutation_p(a, b, n_perm: int = 10_000, seed: int = 0) -> float:
    """Permutation p-value for the two-sample KS statistic (vectorized)."""
    a = np.asarray(sorted(a), dtype=float)
    b = np.asarray(sorted(b), dtype=float)
    n, m = len(a), len(b)
    pool = np.sort(np.concatenate([a, b]))
    run_end = np.nonzero(np.r_[pool[1:] != pool[:-1], True])[0]

    def stat(labels):
        ca = np.cumsum(labels, axis=-1) / n
        cb = np.cumsum(1 - labels, axis=-1) / m
        return np.max(np.abs(ca[..., run_end] - cb[..., run_end]), axis=-1)

    order = np.argsort(np.concatenate([a, b]), kind="stable")
    base_labels = np.concatenate([np.ones(n), np.zeros(m)])[order]
    d_obs = float(stat(base_labels))
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 500
    for _ in range(n_perm // chunk):
        labels = np.tile(base_labels, (chunk, 1))
        idx = rng.permuted(np.tile(np.arange(n + m), (chunk, 1)), axis=1)
        labels = np.take_along_axis(labels, idx, axis=1)
        hits += int(np.sum(stat(labels) >= d_obs - 1e-12))
    return hits / (n_perm // chunk * chunk)


def oracle_mle_alpha(degrees) -> float:
    """Discrete power-law MLE with k_min at the smallest observed degree."""
    degrees = [d for d in degrees if d >= 1]
    k_min = min(degrees)
    return 1.0 + len(degrees) / sum(math.log(d / (k_min - 0.5)) for d in degrees)


def oracle_wasserstein_order_stats(a, b) -> float:
    """Closed form for equal-size samples: mean |order statistic difference|."""
    xs, ys = sorted(a), sorted(b)
    assert len(xs) == len(ys)
    return sum(abs(x - y) for x, y in zip(xs, ys)) / len(xs)


# ---------------------------------------------------------------------------
# Gossip stream fixture
# ---------------------------------------------------------------------------

def make_channel_records(scid: int, u: int, v: int, announced_at: int,
                         update_times: dict[int, list[tuple[int, bool]]] | None = None
                         ) -> list[GossipRecord]:
    """Announcement plus (timestamp, disabled) updates per direction."""
    a, b = sorted((hexid(u), hexid(v)))
    records = [record_of(ChannelAnnouncement(ShortChannelId.from_u64(scid), a, b),
                         announced_at)]
    for direction, updates in (update_times or {}).items():
        for ts, disabled in updates:
            flag = bool(disabled)
            records.append(record_of(ChannelUpdate(
                ShortChannelId.from_u64(scid), ts, direction, flag,
                cltv_expiry_delta=40, htlc_minimum_msat=0, fee_base_msat=1000,
                fee_proportional_millionths=100)))
    return records
