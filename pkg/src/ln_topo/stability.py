"""Topological stability between snapshots.

Node intersection rate: fraction of the earlier snapshot's nodes surviving
into the later one.  Channel intersection rate: fraction of the earlier
snapshot's channels (between surviving node pairs) that still have a route of
hop length at most 1 + hop_slack in the later snapshot; slack 0 demands the
direct channel persist, slack >= 1 accepts an equally short reconfigured
route.  Degree-distribution drift is measured by a two-sample KS test with
the asymptotic tail probability and by the first Wasserstein distance.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence, Union

from .errors import EmptyBase, EmptySample, TooFewSnapshots
from .graph import (DegreeDistribution, TopologyGraph, sample_forestfire,
                    to_undirected)
from .snapshot import Snapshot


def _values(sample) -> list[float]:
    if isinstance(sample, DegreeDistribution):
        return list(sample.degrees)
    return [float(x) for x in sample]


class KsResult(NamedTuple):
    statistic: float
    p_value: float


def ks_two_sample(a, b) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test.

    D is the supremum ECDF difference (tie-aware); the p-value uses the
    asymptotic Kolmogorov series with lambda = D * sqrt(nm/(n+m)), truncated
    once terms drop below 1e-12 and clamped to [0, 1].
    """
    xs = sorted(_values(a))
    ys = sorted(_values(b))
    if not xs or not ys:
        raise EmptySample("KS test needs two nonempty samples")
    n, m = len(xs), len(ys)
    i = j = 0
    d = 0.0
    while i < n and j < m:
        point = xs[i] if xs[i] <= ys[j] else ys[j]
        while i < n and xs[i] == point:
            i += 1
        while j < m and ys[j] == point:
            j += 1
        d = max(d, abs(i / n - j / m))
    if d == 0.0:
        return KsResult(0.0, 1.0)
    lam = d * math.sqrt(n * m / (n + m))
    total = 0.0
    sign = 1.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        if term < 1e-12:
            break
        total += sign * term
        sign = -sign
        k += 1
    return KsResult(d, min(1.0, max(0.0, 2.0 * total)))


def wasserstein1(a, b) -> float:
    """First Wasserstein distance between empirical distributions: the area
    between the two ECDFs.  For equal-size samples this equals the mean
    absolute difference of order statistics."""
    xs = sorted(_values(a))
    ys = sorted(_values(b))
    if not xs or not ys:
        raise EmptySample("Wasserstein distance needs two nonempty samples")
    n, m = len(xs), len(ys)
    points = sorted(set(xs) | set(ys))
    total = 0.0
    i = j = 0
    for left, right in zip(points, points[1:]):
        while i < n and xs[i] <= left:
            i += 1
        while j < m and ys[j] <= left:
            j += 1
        total += abs(i / n - j / m) * (right - left)
    return total


def node_intersection_rate(s_t: Snapshot, s_next: Snapshot) -> float:
    """Fraction of the earlier snapshot's nodes present in the later one."""
    if not s_t.nodes:
        raise EmptyBase("earlier snapshot has no nodes")
    return len(s_t.nodes & s_next.nodes) / len(s_t.nodes)


def channel_intersection_rate(s_t: Snapshot, s_next: Snapshot,
                              hop_slack: int = 0) -> float:
    """Fraction of surviving-pair channels still routable within the slack.

    Base pairs: unordered endpoint pairs with a direct channel in the earlier
    snapshot, both endpoints shared by the two snapshots.  A pair survives if
    its hop distance in the later snapshot is at most 1 + hop_slack.
    """
    if hop_slack < 0:
        raise ValueError("hop_slack must be >= 0")
    shared = s_t.nodes & s_next.nodes
    base_pairs = {(min(ch.endpoint_a, ch.endpoint_b), max(ch.endpoint_a, ch.endpoint_b))
                  for ch in s_t.channels
                  if ch.endpoint_a in shared and ch.endpoint_b in shared}
    if not base_pairs:
        raise EmptyBase("no earlier-snapshot channels between shared nodes")
    g_next = to_undirected(s_next)
    return _pair_survival(g_next, base_pairs, hop_slack)


def _pair_survival(g_next: TopologyGraph, base_pairs: set[tuple[str, str]],
                   hop_slack: int) -> float:
    limit = 1 + hop_slack
    if hop_slack == 0:
        surviving = sum(
            1 for a, b in base_pairs
            if g_next.has_edge(g_next.index_of(a), g_next.index_of(b)))
        return surviving / len(base_pairs)
    by_source: dict[str, list[str]] = {}
    for a, b in base_pairs:
        by_source.setdefault(a, []).append(b)
    surviving = 0
    for a, targets in by_source.items():
        dist = _bounded_bfs(g_next, g_next.index_of(a), limit)
        for b in targets:
            if dist.get(g_next.index_of(b), math.inf) <= limit:
                surviving += 1
    return surviving / len(base_pairs)


def _bounded_bfs(g: TopologyGraph, source: int, limit: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if dist[u] == limit:
            continue
        for v in g.adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


# ---------------------------------------------------------------------------
# Series over a snapshot schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    count: int = 100
    target_size: int = 100
    p_forward: float = 0.7
    seed: int = 0


@dataclass(frozen=True)
class SnapshotPairStats:
    t: int
    t_next: int
    i_node: float
    i_channel: float
    hop_slack: int
    ks_statistic: float
    ks_p_value: float
    wasserstein: float
    wasserstein_norm: float
    scope: str                      # "full" or "sample_<k>"


@dataclass(frozen=True)
class StabilitySeries:
    rows: tuple[SnapshotPairStats, ...]

    def full_rows(self) -> list[SnapshotPairStats]:
        return [r for r in self.rows if r.scope == "full"]

    def sample_rows(self, t: int, t_next: int) -> list[SnapshotPairStats]:
        return [r for r in self.rows
                if r.scope.startswith("sample_") and r.t == t and r.t_next == t_next]

    def sample_means(self, t: int, t_next: int) -> tuple[float, float]:
        """Mean sampled (i_node, i_channel) for one transition, NaNs skipped."""
        rows = self.sample_rows(t, t_next)
        nodes = [r.i_node for r in rows if not math.isnan(r.i_node)]
        channels = [r.i_channel for r in rows if not math.isnan(r.i_channel)]
        mean = lambda xs: sum(xs) / len(xs) if xs else float("nan")
        return mean(nodes), mean(channels)


def _pair_stats(s_t: Snapshot, s_next: Snapshot, hop_slack: int,
                scope: str, t: int, t_next: int) -> SnapshotPairStats:
    try:
        i_node = node_intersection_rate(s_t, s_next)
    except EmptyBase:
        i_node = float("nan")
    try:
        i_channel = channel_intersection_rate(s_t, s_next, hop_slack)
    except EmptyBase:
        i_channel = float("nan")
    dd_t = DegreeDistribution.from_graph(to_undirected(s_t))
    dd_next = DegreeDistribution.from_graph(to_undirected(s_next))
    try:
        ks = ks_two_sample(dd_t, dd_next)
        w = wasserstein1(dd_t, dd_next)
    except EmptySample:
        ks = KsResult(float("nan"), float("nan"))
        w = float("nan")
    mean_degree = (sum(dd_t.degrees) / len(dd_t.degrees)) if len(dd_t) else float("nan")
    w_norm = w / mean_degree if mean_degree and not math.isnan(w) else float("nan")
    return SnapshotPairStats(t, t_next, i_node, i_channel, hop_slack,
                             ks.statistic, ks.p_value, w, w_norm, scope)


def _subgraph_snapshot_pair(sample: TopologyGraph, s_t: Snapshot, s_next: Snapshot,
                            g_next: TopologyGraph, hop_slack: int):
    """Sampled intersection stats between a subgraph of the earlier snapshot
    and its node-induced image in the later one."""
    sample_nodes = list(sample.ids)
    shared = [n for n in sample_nodes if n in s_next.nodes]
    i_node = len(shared) / len(sample_nodes)
    image_indices = sorted(g_next.index_of(n) for n in shared)
    image = g_next.subgraph(image_indices)
    shared_set = set(shared)
    base_pairs = {(sample.ids[u], sample.ids[v]) for u, v in sample.edges()
                  if sample.ids[u] in shared_set and sample.ids[v] in shared_set}
    base_pairs = {(min(a, b), max(a, b)) for a, b in base_pairs}
    if base_pairs:
        i_channel = _pair_survival(image, base_pairs, hop_slack)
    else:
        i_channel = float("nan")
    dd_sample = DegreeDistribution.from_graph(sample)
    dd_image = DegreeDistribution.from_graph(image)
    try:
        ks = ks_two_sample(dd_sample, dd_image)
        w = wasserstein1(dd_sample, dd_image)
    except EmptySample:
        ks = KsResult(float("nan"), float("nan"))
        w = float("nan")
    mean_degree = (sum(dd_sample.degrees) / len(dd_sample.degrees)) if len(dd_sample) else 0.0
    w_norm = w / mean_degree if mean_degree and not math.isnan(w) else float("nan")
    return i_node, i_channel, ks, w, w_norm


def stability_series(snapshots: Sequence[Snapshot], hop_slack: int = 0,
                     sampler: SamplerConfig | None = None) -> StabilitySeries:
    """Pairwise stability statistics for consecutive snapshots, optional
    subgraph-sampled variants, and a long-range first-to-last row."""
    if len(snapshots) < 2:
        raise TooFewSnapshots(f"need >= 2 snapshots, got {len(snapshots)}")
    rows: list[SnapshotPairStats] = []
    transitions = [(snapshots[i], snapshots[i + 1]) for i in range(len(snapshots) - 1)]
    if len(snapshots) > 2:
        transitions.append((snapshots[0], snapshots[-1]))       # long-range row
    for s_t, s_next in transitions:
        rows.append(_pair_stats(s_t, s_next, hop_slack, "full", s_t.at, s_next.at))
        if sampler is None:
            continue
        g_t = to_undirected(s_t)
        g_next = to_undirected(s_next)
        try:
            samples = sample_forestfire(g_t, sampler.target_size, sampler.count,
                                        sampler.p_forward, sampler.seed)
        except Exception:
            continue                     # snapshot too small to sample
        for k, sample in enumerate(samples):
            i_node, i_channel, ks, w, w_norm = _subgraph_snapshot_pair(
                sample, s_t, s_next, g_next, hop_slack)
            rows.append(SnapshotPairStats(s_t.at, s_next.at, i_node, i_channel,
                                          hop_slack, ks.statistic, ks.p_value,
                                          w, w_norm, f"sample_{k}"))
    return StabilitySeries(tuple(rows))


_CSV_HEADER = ["t", "t_next", "i_node", "i_channel", "hop_slack", "ks_D", "ks_p",
               "wasserstein", "wasserstein_norm", "scope"]


def write_stability_csv(series: StabilitySeries, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for r in series.rows:
            writer.writerow([r.t, r.t_next, repr(r.i_node), repr(r.i_channel),
                             r.hop_slack, repr(r.ks_statistic), repr(r.ks_p_value),
                             repr(r.wasserstein), repr(r.wasserstein_norm), r.scope])


def read_stability_csv(path: Union[str, Path]) -> StabilitySeries:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise ValueError(f"unexpected stability CSV header: {header}")
        for row in reader:
            rows.append(SnapshotPairStats(
                int(row[0]), int(row[1]), float(row[2]), float(row[3]), int(row[4]),
                float(row[5]), float(row[6]), float(row[7]), float(row[8]), row[9]))
    return StabilitySeries(tuple(rows))
