"""Payment routing simulation under approximated client cost functions.

Each channel direction is usable when its policy is present, not disabled,
and the payment amount sits inside the policy's HTLC bounds.  All models
charge the policy fee (base plus proportional); they differ in how they price
the time-lock delta:

    lnd: fee + amount * cltv * risk_factor           (risk_factor 15e-9)
    cln: fee + amount * cltv * rf / (52596 * 100)    (rf 10, blocks per year)
    ecl: (fee + hop_base) * (w_base + w_cltv * cltv/2016)

A tiny epsilon keeps every edge cost strictly positive for Dijkstra.
Capacity is proxied by htlc_maximum_msat when present, otherwise unbounded:
gossip carries no on-chain amounts and the simulation is liquidity-agnostic.
"""

from __future__ import annotations

import csv
import heapq
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .errors import (DegenerateDistribution, EmptyTally, GraphTooSmall,
                     NodeNotFound, PolicyUnusable)
from .metrics import fit_power_law, gini
from .snapshot import ChannelPolicy, Snapshot

COST_EPSILON = 1e-6


@dataclass(frozen=True)
class CostModel:
    kind: str                                  # "lnd" | "ecl" | "cln"
    lnd_risk_factor: float = 15e-9
    cln_risk_factor: float = 10.0
    cln_blocks_per_year: int = 52596
    ecl_hop_base_msat: float = 0.0
    ecl_weight_base: float = 1.0
    ecl_weight_cltv: float = 0.15
    ecl_cltv_norm_blocks: float = 2016.0
    epsilon: float = COST_EPSILON

    def __post_init__(self):
        if self.kind not in ("lnd", "ecl", "cln"):
            raise ValueError(f"unknown cost model kind {self.kind!r}")

    @classmethod
    def lnd(cls, **kwargs) -> "CostModel":
        return cls("lnd", **kwargs)

    @classmethod
    def ecl(cls, **kwargs) -> "CostModel":
        return cls("ecl", **kwargs)

    @classmethod
    def cln(cls, **kwargs) -> "CostModel":
        return cls("cln", **kwargs)


@dataclass(frozen=True)
class PaymentRequest:
    source: str
    destination: str
    amount_msat: int

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError("payment endpoints must differ")
        if self.amount_msat <= 0:
            raise ValueError("payment amount must be positive")


@dataclass(frozen=True)
class RouteResult:
    status: str                                # "found" | "no_route"
    hops: tuple[str, ...] = ()                 # intermediate nodes only
    total_cost: float = math.inf

    @property
    def found(self) -> bool:
        return self.status == "found"


def edge_cost(model: CostModel, policy: ChannelPolicy, amount_msat: int) -> float:
    """Cost of forwarding ``amount_msat`` across one usable channel direction."""
    if policy.disabled:
        raise PolicyUnusable("policy is disabled")
    if amount_msat < policy.htlc_minimum_msat:
        raise PolicyUnusable(
            f"amount {amount_msat} below htlc_minimum {policy.htlc_minimum_msat}")
    if policy.htlc_maximum_msat is not None and amount_msat > policy.htlc_maximum_msat:
        raise PolicyUnusable(
            f"amount {amount_msat} above htlc_maximum {policy.htlc_maximum_msat}")
    fee = policy.fee_base_msat + amount_msat * policy.fee_proportional_millionths / 1e6
    cltv = policy.cltv_expiry_delta
    if model.kind == "lnd":
        cost = fee + amount_msat * cltv * model.lnd_risk_factor
    elif model.kind == "cln":
        cost = fee + amount_msat * cltv * model.cln_risk_factor / (model.cln_blocks_per_year * 100)
    else:
        cost = (fee + model.ecl_hop_base_msat) * (
            model.ecl_weight_base + model.ecl_weight_cltv * cltv / model.ecl_cltv_norm_blocks)
    return cost + model.epsilon


class _RoutingGraph:
    """Directed usable-policy adjacency over snapshot nodes for one amount."""

    def __init__(self, snapshot: Snapshot, model: CostModel, amount_msat: int):
        self.ids: list[str] = sorted(snapshot.nodes)
        self.index = {node: i for i, node in enumerate(self.ids)}
        self.out_edges: list[list[tuple[int, float]]] = [[] for _ in self.ids]
        for channel in snapshot.channels:
            a = self.index[channel.endpoint_a]
            b = self.index[channel.endpoint_b]
            for policy, src, dst in ((channel.policy_a, a, b), (channel.policy_b, b, a)):
                if policy is None:
                    continue
                try:
                    cost = edge_cost(model, policy, amount_msat)
                except PolicyUnusable:
                    continue
                self.out_edges[src].append((dst, cost))
        for edges in self.out_edges:
            edges.sort()

    def shortest(self, source: int, destination: int) -> tuple[float, tuple[int, ...]] | None:
        """Minimum-cost path; ties broken by hop count then lexicographic
        node index sequence, which makes results order-independent."""
        start = (0.0, 0, (source,))
        heap = [start]
        settled = [False] * len(self.ids)
        while heap:
            cost, hops, path = heapq.heappop(heap)
            u = path[-1]
            if settled[u]:
                continue
            settled[u] = True
            if u == destination:
                return cost, path
            for v, weight in self.out_edges[u]:
                if not settled[v]:
                    heapq.heappush(heap, (cost + weight, hops + 1, path + (v,)))
        return None


def find_route(snapshot: Snapshot, request: PaymentRequest,
               model: CostModel) -> RouteResult:
    """Cheapest route over directed usable policies, deterministic on ties."""
    if request.source not in snapshot.nodes:
        raise NodeNotFound(request.source)
    if request.destination not in snapshot.nodes:
        raise NodeNotFound(request.destination)
    rg = _RoutingGraph(snapshot, model, request.amount_msat)
    found = rg.shortest(rg.index[request.source], rg.index[request.destination])
    if found is None:
        return RouteResult("no_route")
    cost, path = found
    return RouteResult("found", tuple(rg.ids[i] for i in path[1:-1]), cost)


@dataclass
class HopTally:
    """Per-node intermediate-hop counts for one cost model's workload."""

    counts: dict[str, int]
    model: str
    n_requests: int = 0
    n_routed: int = 0


def simulate(snapshot: Snapshot, n_tx: int = 5000, amount_msat: int = 100_000,
             seed: int = 0, model: CostModel | None = None) -> HopTally:
    """Route ``n_tx`` uniformly drawn payments and tally intermediate hops.

    Endpoint pairs are uniform over node ids with source != destination;
    endpoints are never tallied; failed routes are recorded, never resampled.
    """
    if len(snapshot.nodes) < 2:
        raise GraphTooSmall(f"snapshot has {len(snapshot.nodes)} nodes")
    model = model or CostModel.lnd()
    rg = _RoutingGraph(snapshot, model, amount_msat)
    counts = {node: 0 for node in rg.ids}
    rng = random.Random(seed)
    n = len(rg.ids)
    routed = 0
    for _ in range(n_tx):
        src = rng.randrange(n)
        dst = rng.randrange(n - 1)
        if dst >= src:
            dst += 1
        found = rg.shortest(src, dst)
        if found is None:
            continue
        routed += 1
        _, path = found
        for node_index in path[1:-1]:
            counts[rg.ids[node_index]] += 1
    return HopTally(counts=counts, model=model.kind, n_requests=n_tx, n_routed=routed)


@dataclass(frozen=True)
class HopStatistics:
    curve: tuple[tuple[float, float], ...]   # (rank fraction, cumulative share)
    alpha: float
    r_squared: float
    gini: float
    n_routed: int


def hop_statistics(tally: HopTally) -> HopStatistics:
    """Concentration statistics over a hop tally.

    Nodes sort by descending count; the curve gives the hop share carried by
    the top rank fraction.  The power-law fit runs on the positive counts
    (NaN when degenerate); the Gini includes zero-hop nodes.
    """
    if not tally.counts:
        raise EmptyTally("tally has no nodes")
    values = sorted(tally.counts.values(), reverse=True)
    total = sum(values)
    if total == 0:
        raise EmptyTally("tally has no positive counts")
    n = len(values)
    curve = [(0.0, 0.0)]
    cum = 0
    for i, v in enumerate(values, start=1):
        cum += v
        curve.append((i / n, cum / total))
    positive = [v for v in values if v > 0]
    try:
        fit = fit_power_law(positive)
        alpha, r_squared = fit.alpha, fit.r_squared
    except DegenerateDistribution:
        alpha, r_squared = float("nan"), float("nan")
    return HopStatistics(tuple(curve), alpha, r_squared,
                         gini(tally.counts.values()), tally.n_routed)


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

def write_tally_csv(tally: HopTally, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["node_id_hex", "hops"])
        for node in sorted(tally.counts):
            writer.writerow([node, tally.counts[node]])


def read_tally_csv(path: Union[str, Path], model: str = "",
                   n_requests: int = 0, n_routed: int = 0) -> HopTally:
    counts: dict[str, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["node_id_hex", "hops"]:
            raise ValueError(f"unexpected tally CSV header: {header}")
        for node, hops in reader:
            counts[node] = int(hops)
    return HopTally(counts=counts, model=model, n_requests=n_requests, n_routed=n_routed)


def write_hop_statistics_csv(stats: HopStatistics, path: Union[str, Path]) -> None:
    """Rank curve rows followed by a one-row summary block."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["rank_fraction", "cum_hop_share"])
        for rank, share in stats.curve:
            writer.writerow([repr(rank), repr(share)])
        writer.writerow(["gini", "alpha", "r2", "n_routed"])
        writer.writerow([repr(stats.gini), repr(stats.alpha),
                         repr(stats.r_squared), stats.n_routed])
