import math
import random

import pytest

from ln_topo.errors import (EmptyTally, GraphTooSmall, NodeNotFound,
                            PolicyUnusable)
from ln_topo.gossip import ShortChannelId
from ln_topo.routing import (COST_EPSILON, CostModel, HopTally, PaymentRequest,
                             edge_cost, find_route, hop_statistics, read_tally_csv,
                             simulate, write_hop_statistics_csv, write_tally_csv)
from ln_topo.snapshot import Channel, ChannelPolicy, Snapshot
from helpers import (hexid, oracle_bellman_ford_cost, oracle_gini_pairwise,
                     random_connected_edges, snapshot_from_edges)

ALL_MODELS = (CostModel.lnd(), CostModel.ecl(), CostModel.cln())


def policy(direction=0, fee_base=0, fee_ppm=0, cltv=0, htlc_min=0, htlc_max=None,
           disabled=False):
    return ChannelPolicy(direction, fee_base, fee_ppm, cltv, htlc_min, htlc_max,
                         last_update=50, disabled=disabled)


class TestEdgeCost:
    def test_zero_fee_zero_cltv_gives_epsilon_only(self):
        p = policy()
        for model in ALL_MODELS:
            assert edge_cost(model, p, 12345) == pytest.approx(COST_EPSILON, abs=1e-18)

    def test_lnd_formula(self):
        p = policy(fee_base=1000, fee_ppm=100, cltv=40)
        cost = edge_cost(CostModel.lnd(), p, 10**6)
        # 1000 + 10^6*100/10^6 + 10^6*40*15e-9 + eps
        assert cost == pytest.approx(1000 + 100 + 0.6 + COST_EPSILON, abs=1e-12)

    def test_cln_formula(self):
        p = policy(fee_base=200, fee_ppm=0, cltv=144)
        cost = edge_cost(CostModel.cln(), p, 10**6)
        expected = 200 + 10**6 * 144 * 10 / (52596 * 100) + COST_EPSILON
        assert cost == pytest.approx(expected, rel=1e-12)

    def test_ecl_formula(self):
        p = policy(fee_base=500, fee_ppm=0, cltv=1008)
        cost = edge_cost(CostModel.ecl(), p, 10**6)
        expected = 500 * (1.0 + 0.15 * 1008 / 2016) + COST_EPSILON
        assert cost == pytest.approx(expected, rel=1e-12)

    def test_amount_below_minimum_unusable(self):
        p = policy(htlc_min=1000)
        with pytest.raises(PolicyUnusable):
            edge_cost(CostModel.lnd(), p, 999)

    def test_amount_above_maximum_unusable(self):
        p = policy(htlc_max=5000)
        with pytest.raises(PolicyUnusable):
            edge_cost(CostModel.lnd(), p, 5001)
        assert edge_cost(CostModel.lnd(), p, 5000) > 0

    def test_disabled_unusable(self):
        with pytest.raises(PolicyUnusable):
            edge_cost(CostModel.lnd(), policy(disabled=True), 100)

    def test_monotone_in_amount(self):
        p = policy(fee_base=10, fee_ppm=500, cltv=100)
        for model in ALL_MODELS:
            costs = [edge_cost(model, p, amount)
                     for amount in (10, 100, 10_000, 10**6, 10**8)]
            assert costs == sorted(costs)

    def test_costs_strictly_positive(self):
        rng = random.Random(101)
        for _ in range(200):
            p = policy(fee_base=rng.randrange(0, 10**4), fee_ppm=rng.randrange(0, 10**4),
                       cltv=rng.randrange(0, 2017))
            for model in ALL_MODELS:
                assert edge_cost(model, p, rng.randrange(1, 10**9)) > 0


def two_policy_channel(scid, u, v, fee_u=0, fee_v=0, cltv=0):
    a, b = sorted((hexid(u), hexid(v)))
    return Channel(ShortChannelId.from_u64(scid), a, b,
                   policy(0, fee_base=fee_u, cltv=cltv),
                   policy(1, fee_base=fee_v, cltv=cltv))


class TestFindRoute:
    def test_direct_channel_wins_when_cheaper(self):
        # 1-2 direct cheap, plus expensive detour via 3
        channels = (
            two_policy_channel(1, 1, 2, fee_u=10, fee_v=10),
            two_policy_channel(2, 1, 3, fee_u=5000, fee_v=5000),
            two_policy_channel(3, 2, 3, fee_u=5000, fee_v=5000),
        )
        snap = Snapshot(100, frozenset({hexid(1), hexid(2), hexid(3)}), channels, 100)
        result = find_route(snap, PaymentRequest(hexid(1), hexid(2), 1000), CostModel.lnd())
        assert result.found
        assert result.hops == ()
        assert result.total_cost == pytest.approx(10 + COST_EPSILON, abs=1e-12)

    def test_diamond_prefers_cheaper_two_hop_arm(self):
        # direct 1->4 fee 1000; arm 1->2->4 fees 100+100
        channels = (
            two_policy_channel(1, 1, 4, fee_u=1000, fee_v=1000),
            two_policy_channel(2, 1, 2, fee_u=100, fee_v=100),
            two_policy_channel(3, 2, 4, fee_u=100, fee_v=100),
        )
        nodes = frozenset({hexid(1), hexid(2), hexid(4)})
        snap = Snapshot(100, nodes, channels, 100)
        result = find_route(snap, PaymentRequest(hexid(1), hexid(4), 1000), CostModel.lnd())
        assert result.hops == (hexid(2),)
        assert result.total_cost == pytest.approx(200 + 2 * COST_EPSILON, abs=1e-12)

    def test_no_route_across_components(self):
        channels = (two_policy_channel(1, 1, 2), two_policy_channel(2, 3, 4))
        nodes = frozenset({hexid(i) for i in (1, 2, 3, 4)})
        snap = Snapshot(100, nodes, channels, 100)
        result = find_route(snap, PaymentRequest(hexid(1), hexid(3), 10), CostModel.ecl())
        assert result.status == "no_route"

    def test_node_not_found(self):
        snap = snapshot_from_edges([(1, 2)])
        with pytest.raises(NodeNotFound):
            find_route(snap, PaymentRequest(hexid(1), hexid(9), 10), CostModel.lnd())

    def test_missing_direction_policy_blocks_travel(self):
        a, b = sorted((hexid(1), hexid(2)))
        channel = Channel(ShortChannelId.from_u64(1), a, b, policy(0), None)
        snap = Snapshot(100, frozenset({a, b}), (channel,), 100)
        forward = find_route(snap, PaymentRequest(a, b, 10), CostModel.lnd())
        backward = find_route(snap, PaymentRequest(b, a, 10), CostModel.lnd())
        assert forward.found
        assert backward.status == "no_route"

    def test_deterministic_tie_break_prefers_lexicographic_path(self):
        # two equal-cost 2-hop routes 0->?->3 via 1 or 2
        channels = (
            two_policy_channel(1, 0, 1, fee_u=100, fee_v=100),
            two_policy_channel(2, 1, 3, fee_u=100, fee_v=100),
            two_policy_channel(3, 0, 2, fee_u=100, fee_v=100),
            two_policy_channel(4, 2, 3, fee_u=100, fee_v=100),
        )
        nodes = frozenset({hexid(0), hexid(1), hexid(2), hexid(3)})
        snap = Snapshot(100, nodes, channels, 100)
        result = find_route(snap, PaymentRequest(hexid(0), hexid(3), 10), CostModel.lnd())
        assert result.hops == (hexid(1),)

    def test_shorter_path_wins_cost_ties(self):
        # 0->3 direct fee 200 vs 0->1->3 fees 100+100 (equal cost, fewer hops wins)
        channels = (
            two_policy_channel(1, 0, 3, fee_u=200, fee_v=200),
            two_policy_channel(2, 0, 1, fee_u=100, fee_v=100),
            two_policy_channel(3, 1, 3, fee_u=100, fee_v=100),
        )
        nodes = frozenset({hexid(0), hexid(1), hexid(3)})
        snap = Snapshot(100, nodes, channels, 100)
        model = CostModel.lnd(epsilon=0.0)
        result = find_route(snap, PaymentRequest(hexid(0), hexid(3), 10), model)
        assert result.hops == ()

    def test_matches_bellman_ford_on_random_snapshots(self):
        rng = random.Random(102)
        for _ in range(25):
            n = rng.randrange(5, 30)
            snap = snapshot_from_edges(random_connected_edges(rng, n, n // 2),
                                       rng=random.Random(rng.randrange(1 << 30)))
            ids = sorted(snap.nodes)
            for model in ALL_MODELS:
                src, dst = rng.sample(ids, 2)
                mine = find_route(snap, PaymentRequest(src, dst, 50_000), model)
                oracle = oracle_bellman_ford_cost(snap, src, dst, model, 50_000)
                if mine.found:
                    assert mine.total_cost == pytest.approx(oracle, rel=1e-9)
                else:
                    assert oracle == math.inf

    def test_zero_fee_uniform_cltv_reduces_to_hop_count(self):
        rng = random.Random(103)
        for _ in range(10):
            n = rng.randrange(5, 20)
            snap = snapshot_from_edges(random_connected_edges(rng, n, n // 2))
            # all-zero fees, uniform cltv: every model must reduce to hop count
            channels = tuple(
                Channel(c.scid, c.endpoint_a, c.endpoint_b,
                        policy(0, cltv=40), policy(1, cltv=40))
                for c in snap.channels)
            uniform = Snapshot(snap.at, snap.nodes, channels, snap.liveness_window)
            ids = sorted(uniform.nodes)
            src, dst = rng.sample(ids, 2)
            lengths = set()
            for model in ALL_MODELS:
                result = find_route(uniform, PaymentRequest(src, dst, 1000), model)
                assert result.found
                lengths.add(len(result.hops))
            assert len(lengths) == 1


class TestSimulate:
    def test_star_graph_only_hub_accumulates(self):
        snap = snapshot_from_edges([(0, i) for i in range(1, 8)])
        tally = simulate(snap, n_tx=300, amount_msat=1000, seed=5, model=CostModel.lnd())
        hub = hexid(0)
        for node, count in tally.counts.items():
            if node != hub:
                assert count == 0
        assert tally.counts[hub] > 0
        assert tally.n_routed == 300

    def test_path_workload_through_middle(self):
        snap = snapshot_from_edges([(1, 2), (2, 3)])
        counts = {node: 0 for node in snap.nodes}
        for src, dst in ((hexid(1), hexid(3)), (hexid(3), hexid(1))):
            result = find_route(snap, PaymentRequest(src, dst, 100), CostModel.cln())
            for hop in result.hops:
                counts[hop] += 1
        assert counts == {hexid(1): 0, hexid(2): 2, hexid(3): 0}

    def test_fixed_seed_reproducible(self):
        rng = random.Random(104)
        snap = snapshot_from_edges(random_connected_edges(rng, 25, 10),
                                   rng=random.Random(9))
        first = simulate(snap, 200, 1000, seed=11, model=CostModel.ecl())
        second = simulate(snap, 200, 1000, seed=11, model=CostModel.ecl())
        assert first == second
        third = simulate(snap, 200, 1000, seed=12, model=CostModel.ecl())
        assert first != third

    def test_tally_conservation(self):
        rng = random.Random(105)
        snap = snapshot_from_edges(random_connected_edges(rng, 20, 8),
                                   rng=random.Random(3))
        ids = sorted(snap.nodes)
        total_intermediates = 0
        n_routed = 0
        sim_rng = random.Random(42)
        n = len(ids)
        for _ in range(150):
            src = sim_rng.randrange(n)
            dst = sim_rng.randrange(n - 1)
            if dst >= src:
                dst += 1
            result = find_route(snap, PaymentRequest(ids[src], ids[dst], 100_000),
                                CostModel.lnd())
            if result.found:
                n_routed += 1
                total_intermediates += len(result.hops)
        tally = simulate(snap, 150, 100_000, seed=42, model=CostModel.lnd())
        assert tally.n_routed == n_routed
        assert sum(tally.counts.values()) == total_intermediates

    def test_endpoints_never_tallied_on_two_node_graph(self):
        snap = snapshot_from_edges([(1, 2)])
        tally = simulate(snap, 50, 100, seed=1, model=CostModel.lnd())
        assert all(count == 0 for count in tally.counts.values())
        assert tally.n_routed == 50

    def test_graph_too_small(self):
        with pytest.raises(GraphTooSmall):
            simulate(Snapshot(10, frozenset(), (), 100), 10, 100, 0, CostModel.lnd())


class TestHopStatistics:
    def test_equal_positive_tallies_diagonal(self):
        tally = HopTally({hexid(i): 5 for i in range(4)}, "lnd", 10, 10)
        stats = hop_statistics(tally)
        assert stats.gini == pytest.approx(0.0)
        for rank, share in stats.curve:
            assert share == pytest.approx(rank, abs=1e-12)

    def test_single_holder(self):
        for n in (2, 5, 50):
            counts = {hexid(i): 0 for i in range(n)}
            counts[hexid(0)] = 77
            stats = hop_statistics(HopTally(counts, "ecl", 10, 10))
            assert stats.gini == pytest.approx((n - 1) / n)
            assert stats.curve[1] == (1 / n, 1.0)

    def test_one_two_three_four(self):
        tally = HopTally({hexid(i): i + 1 for i in range(4)}, "cln", 10, 10)
        stats = hop_statistics(tally)
        assert stats.gini == pytest.approx(0.25)
        assert stats.gini == pytest.approx(oracle_gini_pairwise([1, 2, 3, 4]))

    def test_gini_includes_zero_hop_nodes(self):
        with_zeros = HopTally({hexid(0): 10, hexid(1): 0, hexid(2): 0}, "lnd", 5, 5)
        stats = hop_statistics(with_zeros)
        assert stats.gini == pytest.approx(2 / 3)

    def test_empty_tally(self):
        with pytest.raises(EmptyTally):
            hop_statistics(HopTally({}, "lnd", 0, 0))
        with pytest.raises(EmptyTally):
            hop_statistics(HopTally({hexid(0): 0}, "lnd", 5, 0))

    def test_curve_endpoints(self):
        tally = HopTally({hexid(i): i for i in range(6)}, "lnd", 9, 9)
        stats = hop_statistics(tally)
        assert stats.curve[0] == (0.0, 0.0)
        assert stats.curve[-1] == (1.0, 1.0)


class TestCsvInterfaces:
    def test_tally_round_trip(self, tmp_path):
        tally = HopTally({hexid(2): 5, hexid(1): 0, hexid(3): 9}, "lnd", 20, 14)
        path = tmp_path / "hops.csv"
        write_tally_csv(tally, path)
        loaded = read_tally_csv(path, model="lnd", n_requests=20, n_routed=14)
        assert loaded.counts == tally.counts

    def test_statistics_csv_layout(self, tmp_path):
        tally = HopTally({hexid(i): i + 1 for i in range(4)}, "lnd", 9, 9)
        path = tmp_path / "stats.csv"
        write_hop_statistics_csv(hop_statistics(tally), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "rank_fraction,cum_hop_share"
        assert lines[-2] == "gini,alpha,r2,n_routed"
        assert lines[-1].split(",")[0] == repr(0.25)
