import random

import pytest

from ln_topo.errors import SchemaMismatch, UnsortedInput, UnsortedSchedule
from ln_topo.gossip import (NodeAnnouncement, ShortChannelId, dedup_and_order,
                            record_of)
from ln_topo.snapshot import (Channel, ChannelPolicy, Snapshot, build_series,
                              build_snapshot, read_snapshot, write_snapshot)
from helpers import hexid, make_channel_records, usable_policy


class TestBuildSnapshot:
    def test_fresh_update_included(self):
        records = make_channel_records(1, 1, 2, 100, {0: [(150, False)]})
        snap = build_snapshot(records, at=200, liveness_window=1000)
        assert len(snap.channels) == 1
        channel = snap.channels[0]
        assert channel.policy_a is not None and channel.policy_a.last_update == 150
        assert snap.nodes == {hexid(1), hexid(2)}

    def test_stale_update_excluded(self):
        records = make_channel_records(1, 1, 2, 100, {0: [(150, False)]})
        snap = build_snapshot(records, at=200, liveness_window=10)
        assert snap.channels == ()
        assert snap.nodes == frozenset()

    def test_announcement_after_query_time_excluded(self):
        records = make_channel_records(1, 1, 2, 300, {0: [(350, False)]})
        assert build_snapshot(records, at=200, liveness_window=1000).channels == ()

    def test_only_disabled_updates_exclude_channel(self):
        records = []
        records += make_channel_records(1, 1, 2, 100, {0: [(150, False)]})
        records += make_channel_records(2, 2, 3, 100, {0: [(150, True)], 1: [(160, True)]})
        records += make_channel_records(3, 3, 4, 100, {1: [(170, False)]})
        snap = build_snapshot(dedup_and_order(records), at=200, liveness_window=1000)
        scids = {c.scid.to_u64() for c in snap.channels}
        assert scids == {1, 3}            # hand enumeration: channel 2 fully disabled

    def test_disabled_direction_kept_when_other_side_enabled(self):
        records = make_channel_records(1, 1, 2, 100,
                                       {0: [(150, True)], 1: [(160, False)]})
        snap = build_snapshot(records, at=200, liveness_window=1000)
        assert len(snap.channels) == 1
        channel = snap.channels[0]
        assert channel.policy_a.disabled is True
        assert channel.policy_b.disabled is False

    def test_latest_update_per_direction_wins(self):
        records = make_channel_records(1, 1, 2, 100,
                                       {0: [(150, False), (180, False)]})
        snap = build_snapshot(records, at=200, liveness_window=1000)
        assert snap.channels[0].policy_a.last_update == 180

    def test_updates_after_query_time_ignored(self):
        records = make_channel_records(1, 1, 2, 100,
                                       {0: [(150, False), (250, False)]})
        snap = build_snapshot(records, at=200, liveness_window=1000)
        assert snap.channels[0].policy_a.last_update == 150

    def test_node_announcements_never_create_isolated_nodes(self):
        records = make_channel_records(1, 1, 2, 100, {0: [(150, False)]})
        records.append(record_of(NodeAnnouncement(hexid(9), 160, b"loner")))
        records.append(record_of(NodeAnnouncement(hexid(1), 161, b"alice")))
        snap = build_snapshot(dedup_and_order(records), at=200, liveness_window=1000)
        assert hexid(9) not in snap.nodes
        assert snap.aliases == {hexid(1): b"alice"}

    def test_unsorted_input_rejected(self):
        records = make_channel_records(1, 1, 2, 100, {0: [(150, False)]})
        with pytest.raises(UnsortedInput):
            build_snapshot(list(reversed(records)), at=200, liveness_window=1000)

    def test_window_monotonicity_random_windows(self):
        rng = random.Random(5)
        records = []
        for scid in range(1, 40):
            u, v = rng.sample(range(1, 15), 2)
            updates = {d: [(rng.randrange(100, 900), rng.random() < 0.3)]
                       for d in range(rng.randrange(1, 3))}
            records += make_channel_records(scid, u, v, rng.randrange(50, 400), updates)
        records = dedup_and_order(records)
        previous: set[int] = set()
        for window in sorted(rng.randrange(1, 1200) for _ in range(20)):
            scids = {c.scid.to_u64()
                     for c in build_snapshot(records, at=900, liveness_window=window).channels}
            assert previous <= scids
            previous = scids


class TestBuildSeries:
    def _three_week_fixture(self):
        rng = random.Random(17)
        week = 7 * 86400
        records = []
        for scid in range(1, 60):
            u, v = rng.sample(range(1, 25), 2)
            announced = rng.randrange(0, 3 * week)
            updates = {}
            for direction in (0, 1):
                times = sorted(rng.randrange(announced, 3 * week + week)
                               for _ in range(rng.randrange(0, 4)))
                updates[direction] = [(t, rng.random() < 0.2) for t in times]
            records += make_channel_records(scid, u, v, announced, updates)
        return dedup_and_order(records), [week, 2 * week, 3 * week]

    def test_series_matches_independent_snapshots(self):
        records, schedule = self._three_week_fixture()
        series = build_series(records, schedule, liveness_window=10 * 86400)
        for at, snap in zip(schedule, series):
            assert snap == build_snapshot(records, at, liveness_window=10 * 86400)

    def test_singleton_schedule(self):
        records, schedule = self._three_week_fixture()
        series = build_series(records, [schedule[0]], liveness_window=86400)
        assert series == [build_snapshot(records, schedule[0], liveness_window=86400)]

    def test_empty_schedule(self):
        records, _ = self._three_week_fixture()
        assert build_series(records, [], liveness_window=86400) == []

    def test_unsorted_schedule_rejected(self):
        records, schedule = self._three_week_fixture()
        with pytest.raises(UnsortedSchedule):
            build_series(records, list(reversed(schedule)), liveness_window=86400)
        with pytest.raises(UnsortedSchedule):
            build_series(records, [schedule[0], schedule[0]], liveness_window=86400)


def _sample_snapshot():
    a, b, c, d = hexid(1), hexid(2), hexid(3), hexid(4)
    channels = (
        Channel(ShortChannelId.from_u64(1), a, b, usable_policy(0), usable_policy(1)),
        Channel(ShortChannelId.from_u64(2), b, c, usable_policy(0, fee_base=5), None),
        Channel(ShortChannelId.from_u64(3), c, d,
                ChannelPolicy(0, 10, 20, 30, 40, 50, 99, False), usable_policy(1)),
    )
    return Snapshot(1000, frozenset({a, b, c, d}), channels, 7 * 86400,
                    {a: b"alice", c: b"c\xc3\xa9sar"})


class TestSnapshotFiles:
    def test_round_trip(self, tmp_path):
        snap = _sample_snapshot()
        write_snapshot(snap, tmp_path / "snap")
        assert read_snapshot(tmp_path / "snap") == snap

    def test_missing_direction_policy_preserved(self, tmp_path):
        snap = _sample_snapshot()
        write_snapshot(snap, tmp_path / "snap")
        loaded = read_snapshot(tmp_path / "snap")
        by_scid = {c.scid.to_u64(): c for c in loaded.channels}
        assert by_scid[2].policy_b is None
        assert by_scid[2].policy_a.fee_base_msat == 5
        assert by_scid[3].policy_a.htlc_maximum_msat == 50

    def test_duplicate_scid_rows_rejected(self, tmp_path):
        snap = _sample_snapshot()
        write_snapshot(snap, tmp_path / "snap")
        channels_csv = tmp_path / "snap" / "channels.csv"
        lines = channels_csv.read_text().splitlines()
        lines.append(lines[1])
        channels_csv.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaMismatch):
            read_snapshot(tmp_path / "snap")

    def test_extra_node_rows_rejected(self, tmp_path):
        snap = _sample_snapshot()
        write_snapshot(snap, tmp_path / "snap")
        nodes_csv = tmp_path / "snap" / "nodes.csv"
        with open(nodes_csv, "a") as handle:
            handle.write(f"{hexid(99)},-\n")
        with pytest.raises(SchemaMismatch):
            read_snapshot(tmp_path / "snap")

    def test_header_mismatch_rejected(self, tmp_path):
        snap = _sample_snapshot()
        write_snapshot(snap, tmp_path / "snap")
        nodes_csv = tmp_path / "snap" / "nodes.csv"
        lines = nodes_csv.read_text().splitlines()
        lines[0] = "node,alias"
        nodes_csv.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaMismatch):
            read_snapshot(tmp_path / "snap")


class TestSnapshotInvariants:
    def test_duplicate_scids_rejected(self):
        a, b = hexid(1), hexid(2)
        channel = Channel(ShortChannelId.from_u64(1), a, b, usable_policy(0), None)
        with pytest.raises(SchemaMismatch):
            Snapshot(100, frozenset({a, b}), (channel, channel), 100)

    def test_node_set_must_match_endpoints(self):
        a, b = hexid(1), hexid(2)
        channel = Channel(ShortChannelId.from_u64(1), a, b, usable_policy(0), None)
        with pytest.raises(SchemaMismatch):
            Snapshot(100, frozenset({a, b, hexid(3)}), (channel,), 100)

    def test_endpoint_ordering_enforced(self):
        with pytest.raises(SchemaMismatch):
            Channel(ShortChannelId.from_u64(1), hexid(2), hexid(1), None, None)

    def test_policy_after_snapshot_time_rejected(self):
        a, b = hexid(1), hexid(2)
        channel = Channel(ShortChannelId.from_u64(1), a, b,
                          usable_policy(0, last_update=500), None)
        with pytest.raises(SchemaMismatch):
            Snapshot(100, frozenset({a, b}), (channel,), 100)
