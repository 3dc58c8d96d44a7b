"""Point-in-time topology reconstruction from ordered gossip records.

A channel is part of the snapshot at time ``at`` iff its announcement is at or
before ``at`` and at least one direction has a non-disabled update inside the
liveness window ``[at - liveness_window, at]``.  Window expiry is the only
closure signal: gossip carries no explicit close messages.  Nodes exist only
as channel endpoints; announcements merely enrich them with aliases.
"""

from __future__ import annotations

import base64
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from .errors import SchemaMismatch, UnsortedInput, UnsortedSchedule
from .gossip import (ChannelAnnouncement, ChannelUpdate, GossipRecord,
                     NodeAnnouncement, ShortChannelId)

DEFAULT_LIVENESS_WINDOW = 14 * 24 * 3600  # channels prune after two stale weeks


@dataclass(frozen=True)
class ChannelPolicy:
    direction: int
    fee_base_msat: int
    fee_proportional_millionths: int
    cltv_expiry_delta: int
    htlc_minimum_msat: int
    htlc_maximum_msat: int | None
    last_update: int
    disabled: bool

    @classmethod
    def from_update(cls, update: ChannelUpdate) -> "ChannelPolicy":
        return cls(
            direction=update.direction,
            fee_base_msat=update.fee_base_msat,
            fee_proportional_millionths=update.fee_proportional_millionths,
            cltv_expiry_delta=update.cltv_expiry_delta,
            htlc_minimum_msat=update.htlc_minimum_msat,
            htlc_maximum_msat=update.htlc_maximum_msat,
            last_update=update.timestamp,
            disabled=update.disable_flag,
        )


@dataclass(frozen=True)
class Channel:
    scid: ShortChannelId
    endpoint_a: str              # lower node id; carries direction-0 policy
    endpoint_b: str
    policy_a: ChannelPolicy | None
    policy_b: ChannelPolicy | None

    def __post_init__(self):
        if self.endpoint_a >= self.endpoint_b:
            raise SchemaMismatch("channel endpoints must be in canonical order")

    @property
    def is_active(self) -> bool:
        return self.policy_a is not None or self.policy_b is not None


@dataclass(frozen=True)
class Snapshot:
    at: int
    nodes: frozenset[str]
    channels: tuple[Channel, ...]           # sorted by packed scid
    liveness_window: int
    aliases: dict[str, bytes] = field(default_factory=dict, compare=True)

    def __post_init__(self):
        seen = set()
        endpoints = set()
        for channel in self.channels:
            key = channel.scid.to_u64()
            if key in seen:
                raise SchemaMismatch(f"duplicate scid {channel.scid}")
            seen.add(key)
            endpoints.add(channel.endpoint_a)
            endpoints.add(channel.endpoint_b)
        if endpoints != set(self.nodes):
            raise SchemaMismatch("node set must equal the channel endpoint union")
        for channel in self.channels:
            for policy in (channel.policy_a, channel.policy_b):
                if policy is not None and policy.last_update > self.at:
                    raise SchemaMismatch("policy last_update after snapshot time")


class _GossipState:
    """Accumulates announcement, update, and alias state along a sorted stream."""

    def __init__(self):
        self.announced: dict[int, tuple[int, str, str]] = {}   # scid -> (ts, a, b)
        self.latest: dict[tuple[int, int], ChannelUpdate] = {}  # (scid, dir) -> update
        self.latest_enabled: dict[tuple[int, int], int] = {}    # (scid, dir) -> ts
        self.aliases: dict[str, tuple[int, bytes]] = {}
        self._last_ts: int | None = None

    def feed(self, record: GossipRecord) -> None:
        ts = record.timestamp
        if self._last_ts is not None and ts < self._last_ts:
            raise UnsortedInput(f"record at t={ts} after t={self._last_ts}")
        self._last_ts = ts
        payload = record.payload
        if isinstance(payload, ChannelAnnouncement):
            scid = payload.short_channel_id.to_u64()
            if scid not in self.announced:
                self.announced[scid] = (ts, payload.node_id_1, payload.node_id_2)
        elif isinstance(payload, ChannelUpdate):
            key = (payload.short_channel_id.to_u64(), payload.direction)
            self.latest[key] = payload
            if not payload.disable_flag:
                self.latest_enabled[key] = payload.timestamp
        elif isinstance(payload, NodeAnnouncement):
            self.aliases[payload.node_id] = (ts, payload.alias)

    def materialize(self, at: int, liveness_window: int) -> Snapshot:
        floor = at - liveness_window
        channels = []
        nodes = set()
        for scid, (announced_at, node_a, node_b) in self.announced.items():
            if announced_at > at:
                continue
            alive = any(
                floor <= self.latest_enabled.get((scid, direction), floor - 1)
                for direction in (0, 1)
            )
            if not alive:
                continue
            policies = []
            for direction in (0, 1):
                update = self.latest.get((scid, direction))
                policies.append(None if update is None else ChannelPolicy.from_update(update))
            channels.append(Channel(ShortChannelId.from_u64(scid), node_a, node_b,
                                    policies[0], policies[1]))
            nodes.add(node_a)
            nodes.add(node_b)
        channels.sort(key=lambda channel: channel.scid.to_u64())
        aliases = {node: alias for node, (_, alias) in self.aliases.items()
                   if node in nodes and alias}
        return Snapshot(at, frozenset(nodes), tuple(channels), liveness_window, aliases)


def build_snapshot(records: Iterable[GossipRecord], at: int,
                   liveness_window: int = DEFAULT_LIVENESS_WINDOW) -> Snapshot:
    """Reconstruct the topology at ``at`` with a single pass over the stream."""
    state = _GossipState()
    for record in records:
        if record.timestamp > at:
            break
        state.feed(record)
    return state.materialize(at, liveness_window)


def build_series(records: Iterable[GossipRecord], schedule: Sequence[int],
                 liveness_window: int = DEFAULT_LIVENESS_WINDOW) -> list[Snapshot]:
    """Reconstruct one snapshot per schedule point in a single forward sweep.

    Equivalent to independent build_snapshot calls, without re-scanning the
    stream per snapshot.
    """
    for earlier, later in zip(schedule, schedule[1:]):
        if later <= earlier:
            raise UnsortedSchedule(f"schedule must be strictly increasing: {earlier} -> {later}")
    state = _GossipState()
    snapshots = []
    stream = iter(records)
    pending: GossipRecord | None = None
    for at in schedule:
        while True:
            if pending is None:
                pending = next(stream, None)
            if pending is None or pending.timestamp > at:
                break
            state.feed(pending)
            pending = None
        snapshots.append(state.materialize(at, liveness_window))
    return snapshots


# ---------------------------------------------------------------------------
# Snapshot files: nodes.csv + channels.csv (+ meta.json for at/window)
# ---------------------------------------------------------------------------

_NODES_HEADER = ["node_id_hex", "alias_base64"]
_POLICY_COLUMNS = ["fee_base", "fee_ppm", "cltv", "htlc_min", "htlc_max", "disabled", "last_update"]
_CHANNELS_HEADER = (["scid_u64", "node_a_hex", "node_b_hex"]
                    + [f"dirA_{c}" for c in _POLICY_COLUMNS]
                    + [f"dirB_{c}" for c in _POLICY_COLUMNS])


def _policy_cells(policy: ChannelPolicy | None) -> list[str]:
    if policy is None:
        return ["-"] * len(_POLICY_COLUMNS)
    return [
        str(policy.fee_base_msat),
        str(policy.fee_proportional_millionths),
        str(policy.cltv_expiry_delta),
        str(policy.htlc_minimum_msat),
        "-" if policy.htlc_maximum_msat is None else str(policy.htlc_maximum_msat),
        "1" if policy.disabled else "0",
        str(policy.last_update),
    ]


def _policy_from_cells(cells: list[str], direction: int) -> ChannelPolicy | None:
    if all(cell == "-" for cell in cells):
        return None
    try:
        return ChannelPolicy(
            direction=direction,
            fee_base_msat=int(cells[0]),
            fee_proportional_millionths=int(cells[1]),
            cltv_expiry_delta=int(cells[2]),
            htlc_minimum_msat=int(cells[3]),
            htlc_maximum_msat=None if cells[4] == "-" else int(cells[4]),
            disabled={"0": False, "1": True}[cells[5]],
            last_update=int(cells[6]),
        )
    except (ValueError, KeyError) as exc:
        raise SchemaMismatch(f"bad policy cells: {exc}") from None


def write_snapshot(snapshot: Snapshot, out_dir: Union[str, Path]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "nodes.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_NODES_HEADER)
        for node in sorted(snapshot.nodes):
            alias = snapshot.aliases.get(node, b"")
            writer.writerow([node, base64.b64encode(alias).decode("ascii") if alias else "-"])
    with open(out / "channels.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_CHANNELS_HEADER)
        for channel in snapshot.channels:
            writer.writerow([str(channel.scid.to_u64()), channel.endpoint_a, channel.endpoint_b]
                            + _policy_cells(channel.policy_a) + _policy_cells(channel.policy_b))
    with open(out / "meta.json", "w", encoding="utf-8") as handle:
        json.dump({"at": snapshot.at, "liveness_window": snapshot.liveness_window},
                  handle, sort_keys=True)
        handle.write("\n")


def read_snapshot(in_dir: Union[str, Path]) -> Snapshot:
    src = Path(in_dir)
    try:
        with open(src / "meta.json", "r", encoding="utf-8") as handle:
            meta = json.load(handle)
        at = int(meta["at"])
        liveness_window = int(meta["liveness_window"])
    except (OSError, ValueError, KeyError) as exc:
        raise SchemaMismatch(f"unreadable snapshot meta: {exc}") from None

    aliases: dict[str, bytes] = {}
    nodes: set[str] = set()
    with open(src / "nodes.csv", "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != _NODES_HEADER:
            raise SchemaMismatch(f"unexpected nodes.csv header: {header}")
        for row in reader:
            if len(row) != 2:
                raise SchemaMismatch(f"nodes.csv row arity {len(row)}")
            node, alias_b64 = row
            if node in nodes:
                raise SchemaMismatch(f"duplicate node row {node}")
            nodes.add(node)
            if alias_b64 != "-":
                try:
                    aliases[node] = base64.b64decode(alias_b64, validate=True)
                except ValueError:
                    raise SchemaMismatch(f"bad alias for {node}") from None

    channels = []
    with open(src / "channels.csv", "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != _CHANNELS_HEADER:
            raise SchemaMismatch(f"unexpected channels.csv header: {header}")
        seen_scids: set[int] = set()
        for row in reader:
            if len(row) != len(_CHANNELS_HEADER):
                raise SchemaMismatch(f"channels.csv row arity {len(row)}")
            try:
                scid_u64 = int(row[0])
            except ValueError:
                raise SchemaMismatch(f"bad scid cell {row[0]!r}") from None
            if scid_u64 in seen_scids:
                raise SchemaMismatch(f"duplicate scid rows for {scid_u64}")
            seen_scids.add(scid_u64)
            channels.append(Channel(
                ShortChannelId.from_u64(scid_u64), row[1], row[2],
                _policy_from_cells(row[3:10], 0), _policy_from_cells(row[10:17], 1)))
    channels.sort(key=lambda channel: channel.scid.to_u64())
    return Snapshot(at, frozenset(nodes), tuple(channels), liveness_window, aliases)
