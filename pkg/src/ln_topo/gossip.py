"""Gossip message ingestion: BOLT#7 binary parsing and a portable line format.

Wire layouts (big-endian, after the 2-byte message type):

    channel_announcement (type 256):
        4 x 64B signatures | u16 flen | flen features | 32B chain_hash |
        8B short_channel_id | 33B node_id_1 | 33B node_id_2 |
        33B bitcoin_key_1 | 33B bitcoin_key_2

    node_announcement (type 257):
        64B signature | u16 flen | flen features | u32 timestamp |
        33B node_id | 3B rgb_color | 32B alias | u16 addrlen | addresses

    channel_update (type 258):
        64B signature | 32B chain_hash | 8B short_channel_id | u32 timestamp |
        u8 message_flags | u8 channel_flags | u16 cltv_expiry_delta |
        u64 htlc_minimum_msat | u32 fee_base_msat |
        u32 fee_proportional_millionths |
        [u64 htlc_maximum_msat when message_flags bit 0 is set]

Signatures and chain_hash are length-skipped, never verified: messages are
treated as topology facts, not as authenticated protocol traffic.  Unknown
trailing bytes after the fixed layout are ignored.
"""

from __future__ import annotations

import base64
import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

from .errors import MalformedField, MalformedLine, Truncated, UnknownType

MSG_CHANNEL_ANNOUNCEMENT = 256
MSG_NODE_ANNOUNCEMENT = 257
MSG_CHANNEL_UPDATE = 258

FLAG_DIRECTION = 1 << 0   # channel_flags bit 0
FLAG_DISABLE = 1 << 1     # channel_flags bit 1
FLAG_HTLC_MAX = 1 << 0    # message_flags bit 0

NODE_ID_HEX_LEN = 66      # 33 bytes


class MessageKind(enum.Enum):
    NODE_ANNOUNCEMENT = "node_announcement"
    CHANNEL_ANNOUNCEMENT = "channel_announcement"
    CHANNEL_UPDATE = "channel_update"


@dataclass(frozen=True, order=True)
class ShortChannelId:
    """64-bit channel identifier: block height / tx index / output index."""

    block_height: int
    tx_index: int
    output_index: int

    def __post_init__(self):
        if not (0 <= self.block_height < 1 << 24):
            raise MalformedField(f"block_height out of 24-bit range: {self.block_height}")
        if not (0 <= self.tx_index < 1 << 24):
            raise MalformedField(f"tx_index out of 24-bit range: {self.tx_index}")
        if not (0 <= self.output_index < 1 << 16):
            raise MalformedField(f"output_index out of 16-bit range: {self.output_index}")

    def to_u64(self) -> int:
        return (self.block_height << 40) | (self.tx_index << 16) | self.output_index

    @classmethod
    def from_u64(cls, value: int) -> "ShortChannelId":
        if not (0 <= value < 1 << 64):
            raise MalformedField(f"scid out of 64-bit range: {value}")
        return cls(value >> 40, (value >> 16) & 0xFFFFFF, value & 0xFFFF)

    def __str__(self) -> str:
        return f"{self.block_height}x{self.tx_index}x{self.output_index}"


def _check_node_id(node_id: str, name: str) -> None:
    if len(node_id) != NODE_ID_HEX_LEN:
        raise MalformedField(f"{name} must be 33 bytes of hex, got {len(node_id)} chars")
    try:
        bytes.fromhex(node_id)
    except ValueError:
        raise MalformedField(f"{name} is not valid hex") from None


@dataclass(frozen=True)
class NodeAnnouncement:
    node_id: str                      # 33-byte public key, lowercase hex
    timestamp: int
    alias: bytes = b""
    addresses: tuple[bytes, ...] = ()  # raw descriptors, opaque after splitting

    def __post_init__(self):
        _check_node_id(self.node_id, "node_id")
        if self.timestamp <= 0:
            raise MalformedField(f"node_announcement timestamp must be > 0, got {self.timestamp}")
        if len(self.alias) > 32:
            raise MalformedField(f"alias longer than 32 bytes: {len(self.alias)}")


@dataclass(frozen=True)
class ChannelAnnouncement:
    short_channel_id: ShortChannelId
    node_id_1: str
    node_id_2: str

    def __post_init__(self):
        _check_node_id(self.node_id_1, "node_id_1")
        _check_node_id(self.node_id_2, "node_id_2")
        if self.node_id_1 == self.node_id_2:
            raise MalformedField("channel endpoints must differ")
        if self.node_id_1 > self.node_id_2:
            raise MalformedField("node_id_1 must precede node_id_2 in byte order")


@dataclass(frozen=True)
class ChannelUpdate:
    short_channel_id: ShortChannelId
    timestamp: int
    direction: int                    # channel_flags bit 0
    disable_flag: bool                # channel_flags bit 1
    cltv_expiry_delta: int
    htlc_minimum_msat: int
    fee_base_msat: int
    fee_proportional_millionths: int
    htlc_maximum_msat: int | None = None

    def __post_init__(self):
        if self.direction not in (0, 1):
            raise MalformedField(f"direction must be 0 or 1, got {self.direction}")
        for name in ("cltv_expiry_delta", "htlc_minimum_msat", "fee_base_msat",
                     "fee_proportional_millionths"):
            if getattr(self, name) < 0:
                raise MalformedField(f"{name} must be non-negative")
        if self.htlc_maximum_msat is not None and self.htlc_maximum_msat < self.htlc_minimum_msat:
            raise MalformedField("htlc_maximum_msat below htlc_minimum_msat")


Payload = Union[NodeAnnouncement, ChannelAnnouncement, ChannelUpdate]

_KIND_OF_PAYLOAD = {
    NodeAnnouncement: MessageKind.NODE_ANNOUNCEMENT,
    ChannelAnnouncement: MessageKind.CHANNEL_ANNOUNCEMENT,
    ChannelUpdate: MessageKind.CHANNEL_UPDATE,
}


@dataclass(frozen=True)
class GossipRecord:
    kind: MessageKind
    payload: Payload
    received_at: int = 0

    def __post_init__(self):
        if _KIND_OF_PAYLOAD[type(self.payload)] is not self.kind:
            raise MalformedField(f"kind {self.kind.value} does not match payload type")

    @property
    def timestamp(self) -> int:
        """Canonical record time: payload timestamp where the wire carries one,
        receive time for channel_announcement (which has no timestamp field)."""
        if isinstance(self.payload, (NodeAnnouncement, ChannelUpdate)):
            return self.payload.timestamp
        return self.received_at


def record_of(payload: Payload, received_at: int | None = None) -> GossipRecord:
    """Wrap a payload; receive time defaults to the payload's own timestamp
    where the wire carries one (channel_announcement does not)."""
    if received_at is None:
        received_at = getattr(payload, "timestamp", 0)
    return GossipRecord(_KIND_OF_PAYLOAD[type(payload)], payload, received_at)


# ---------------------------------------------------------------------------
# Binary parsing
# ---------------------------------------------------------------------------

def _need(data: bytes, offset: int, count: int, what: str) -> None:
    if len(data) < offset + count:
        raise Truncated(f"payload ends inside {what} (need {offset + count} bytes, have {len(data)})")


def parse_bolt7(data: bytes, *, received_at: int = 0, strict: bool = False) -> GossipRecord:
    """Parse one binary gossip payload into a validated record.

    ``received_at`` supplies the record time for channel_announcement, whose
    wire format carries no timestamp.  In strict mode reserved flag bits raise
    MalformedField; lenient mode ignores them.
    """
    if len(data) < 2:
        raise Truncated("payload shorter than the 2-byte message type")
    msg_type = struct.unpack_from(">H", data, 0)[0]
    if msg_type == MSG_CHANNEL_ANNOUNCEMENT:
        return record_of(_parse_channel_announcement(data), received_at)
    if msg_type == MSG_NODE_ANNOUNCEMENT:
        return record_of(_parse_node_announcement(data))
    if msg_type == MSG_CHANNEL_UPDATE:
        return record_of(_parse_channel_update(data, strict=strict))
    raise UnknownType(f"message type {msg_type} is not a gossip topology message")


def _parse_channel_announcement(data: bytes) -> ChannelAnnouncement:
    off = 2 + 4 * 64                              # skip signatures
    _need(data, 2, 4 * 64, "signatures")
    _need(data, off, 2, "features length")
    flen = struct.unpack_from(">H", data, off)[0]
    off += 2
    _need(data, off, flen, "features")
    off += flen
    _need(data, off, 32 + 8 + 4 * 33, "channel_announcement body")
    off += 32                                     # skip chain_hash
    scid = ShortChannelId.from_u64(struct.unpack_from(">Q", data, off)[0])
    off += 8
    node_id_1 = data[off:off + 33].hex()
    node_id_2 = data[off + 33:off + 66].hex()
    return ChannelAnnouncement(scid, node_id_1, node_id_2)


def _parse_node_announcement(data: bytes) -> NodeAnnouncement:
    off = 2 + 64                                  # skip signature
    _need(data, 2, 64, "signature")
    _need(data, off, 2, "features length")
    flen = struct.unpack_from(">H", data, off)[0]
    off += 2
    _need(data, off, flen, "features")
    off += flen
    _need(data, off, 4 + 33 + 3 + 32 + 2, "node_announcement body")
    timestamp = struct.unpack_from(">I", data, off)[0]
    off += 4
    node_id = data[off:off + 33].hex()
    off += 33 + 3                                 # skip rgb_color
    alias = data[off:off + 32].rstrip(b"\x00")
    off += 32
    addrlen = struct.unpack_from(">H", data, off)[0]
    off += 2
    _need(data, off, addrlen, "addresses")
    addresses = _split_addresses(data[off:off + addrlen])
    return NodeAnnouncement(node_id, timestamp, alias, addresses)


# descriptor body sizes per address type; type 5 (DNS) is length-prefixed
_ADDR_BODY_LEN = {1: 6, 2: 18, 3: 12, 4: 37}


def _split_addresses(blob: bytes) -> tuple[bytes, ...]:
    """Split the addresses field into raw per-descriptor chunks.

    Descriptors stay opaque; an unknown type makes the remainder one chunk
    because later boundaries can no longer be determined.
    """
    out: list[bytes] = []
    i = 0
    while i < len(blob):
        atype = blob[i]
        if atype in _ADDR_BODY_LEN:
            end = i + 1 + _ADDR_BODY_LEN[atype]
        elif atype == 5 and i + 1 < len(blob):
            end = i + 2 + blob[i + 1] + 2         # len byte, hostname, port
        else:
            out.append(blob[i:])
            break
        if end > len(blob):
            raise Truncated("address descriptor ends past the addresses field")
        out.append(blob[i:end])
        i = end
    return tuple(out)


def _parse_channel_update(data: bytes, *, strict: bool) -> ChannelUpdate:
    off = 2 + 64 + 32                             # skip signature + chain_hash
    _need(data, 2, 64 + 32, "signature and chain_hash")
    _need(data, off, 8 + 4 + 1 + 1 + 2 + 8 + 4 + 4, "channel_update body")
    scid_u64, timestamp, message_flags, channel_flags, cltv, htlc_min, fee_base, fee_ppm = \
        struct.unpack_from(">QIBBHQII", data, off)
    off += 32
    if strict and (message_flags & ~0x01 or channel_flags & ~0x03):
        raise MalformedField(
            f"reserved flag bits set: message_flags={message_flags:#x} channel_flags={channel_flags:#x}")
    htlc_max = None
    if message_flags & FLAG_HTLC_MAX:
        _need(data, off, 8, "htlc_maximum_msat")
        htlc_max = struct.unpack_from(">Q", data, off)[0]
    return ChannelUpdate(
        short_channel_id=ShortChannelId.from_u64(scid_u64),
        timestamp=timestamp,
        direction=channel_flags & FLAG_DIRECTION,
        disable_flag=bool(channel_flags & FLAG_DISABLE),
        cltv_expiry_delta=cltv,
        htlc_minimum_msat=htlc_min,
        fee_base_msat=fee_base,
        fee_proportional_millionths=fee_ppm,
        htlc_maximum_msat=htlc_max,
    )


def serialize_bolt7(record: GossipRecord) -> bytes:
    """Re-encode a record on its fixed wire layout.

    Skipped wire fields (signatures, chain_hash, features, rgb_color) are
    zero-filled, so parse/serialize round-trips byte-exactly for payloads
    synthesized with zeroed filler.
    """
    p = record.payload
    if isinstance(p, ChannelAnnouncement):
        return b"".join([
            struct.pack(">H", MSG_CHANNEL_ANNOUNCEMENT),
            bytes(4 * 64),
            struct.pack(">H", 0),                 # empty features
            bytes(32),
            struct.pack(">Q", p.short_channel_id.to_u64()),
            bytes.fromhex(p.node_id_1),
            bytes.fromhex(p.node_id_2),
            bytes(66),                            # bitcoin keys
        ])
    if isinstance(p, NodeAnnouncement):
        addresses = b"".join(p.addresses)
        return b"".join([
            struct.pack(">H", MSG_NODE_ANNOUNCEMENT),
            bytes(64),
            struct.pack(">H", 0),
            struct.pack(">I", p.timestamp),
            bytes.fromhex(p.node_id),
            bytes(3),
            p.alias.ljust(32, b"\x00"),
            struct.pack(">H", len(addresses)),
            addresses,
        ])
    message_flags = FLAG_HTLC_MAX if p.htlc_maximum_msat is not None else 0
    channel_flags = p.direction | (FLAG_DISABLE if p.disable_flag else 0)
    out = b"".join([
        struct.pack(">H", MSG_CHANNEL_UPDATE),
        bytes(64 + 32),
        struct.pack(">QIBBHQII", p.short_channel_id.to_u64(), p.timestamp,
                    message_flags, channel_flags, p.cltv_expiry_delta,
                    p.htlc_minimum_msat, p.fee_base_msat, p.fee_proportional_millionths),
    ])
    if p.htlc_maximum_msat is not None:
        out += struct.pack(">Q", p.htlc_maximum_msat)
    return out


# ---------------------------------------------------------------------------
# Line record format
# ---------------------------------------------------------------------------
#
# One record per line, tab-separated, UTF-8:
#   CU <scid_u64> <timestamp> <direction> <disabled 0|1> <cltv> <htlc_min>
#      <fee_base> <fee_ppm> <htlc_max|->
#   CA <scid_u64> <node_id1_hex> <node_id2_hex> <timestamp>
#   NA <node_id_hex> <timestamp> <alias_base64|->

class ReadResult(NamedTuple):
    records: list[GossipRecord]
    skipped: int


def format_record(record: GossipRecord) -> str:
    p = record.payload
    if isinstance(p, ChannelUpdate):
        htlc_max = "-" if p.htlc_maximum_msat is None else str(p.htlc_maximum_msat)
        return "\t".join([
            "CU", str(p.short_channel_id.to_u64()), str(p.timestamp), str(p.direction),
            "1" if p.disable_flag else "0", str(p.cltv_expiry_delta),
            str(p.htlc_minimum_msat), str(p.fee_base_msat),
            str(p.fee_proportional_millionths), htlc_max,
        ])
    if isinstance(p, ChannelAnnouncement):
        return "\t".join([
            "CA", str(p.short_channel_id.to_u64()), p.node_id_1, p.node_id_2,
            str(record.received_at),
        ])
    alias = base64.b64encode(p.alias).decode("ascii") if p.alias else "-"
    return "\t".join(["NA", p.node_id, str(p.timestamp), alias])


def parse_record_line(line: str) -> GossipRecord:
    parts = line.rstrip("\n").split("\t")
    tag = parts[0] if parts else ""
    try:
        if tag == "CU" and len(parts) == 10:
            update = ChannelUpdate(
                short_channel_id=ShortChannelId.from_u64(int(parts[1])),
                timestamp=int(parts[2]),
                direction=int(parts[3]),
                disable_flag={"0": False, "1": True}[parts[4]],
                cltv_expiry_delta=int(parts[5]),
                htlc_minimum_msat=int(parts[6]),
                fee_base_msat=int(parts[7]),
                fee_proportional_millionths=int(parts[8]),
                htlc_maximum_msat=None if parts[9] == "-" else int(parts[9]),
            )
            return record_of(update, update.timestamp)
        if tag == "CA" and len(parts) == 5:
            ann = ChannelAnnouncement(ShortChannelId.from_u64(int(parts[1])), parts[2], parts[3])
            return record_of(ann, int(parts[4]))
        if tag == "NA" and len(parts) == 4:
            alias = b"" if parts[3] == "-" else base64.b64decode(parts[3], validate=True)
            node = NodeAnnouncement(parts[1], int(parts[2]), alias)
            return record_of(node, node.timestamp)
    except (ValueError, KeyError, MalformedField) as exc:
        raise MalformedField(str(exc)) from None
    raise MalformedField(f"unrecognized record tag or arity: {tag!r}/{len(parts)}")


def read_records(source: Union[str, Path, Iterable[str]], *, strict: bool = False) -> ReadResult:
    """Read line-format records in file order.

    Lenient mode counts and skips malformed lines; strict mode raises
    MalformedLine with the 1-based line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return _read_lines(handle, strict=strict)
    return _read_lines(source, strict=strict)


def _read_lines(lines: Iterable[str], *, strict: bool) -> ReadResult:
    records: list[GossipRecord] = []
    skipped = 0
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(parse_record_line(line))
        except MalformedField as exc:
            if strict:
                raise MalformedLine(line_no, str(exc)) from None
            skipped += 1
    return ReadResult(records, skipped)


def write_records(records: Iterable[GossipRecord], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(format_record(record) + "\n")


def read_bolt7_hex(path: Union[str, Path], *, strict: bool = False,
                   received_at: int = 0) -> ReadResult:
    """Read a file of hex-encoded binary payloads, one per line."""
    records: list[GossipRecord] = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                data = bytes.fromhex(text)
            except ValueError:
                if strict:
                    raise MalformedLine(line_no, "not valid hex") from None
                skipped += 1
                continue
            try:
                records.append(parse_bolt7(data, received_at=received_at, strict=strict))
            except (UnknownType, Truncated, MalformedField) as exc:
                if strict:
                    raise MalformedLine(line_no, str(exc)) from None
                skipped += 1
    return ReadResult(records, skipped)


def read_bolt7_binary(path: Union[str, Path], *, strict: bool = False,
                      received_at: int = 0) -> ReadResult:
    """Read length-prefixed binary payloads (u16 big-endian length, payload).

    Framing damage is always fatal (resynchronization is impossible); per
    message parse failures are skipped in lenient mode.
    """
    records: list[GossipRecord] = []
    skipped = 0
    with open(path, "rb") as handle:
        while True:
            header = handle.read(2)
            if not header:
                break
            if len(header) < 2:
                raise Truncated("file ends inside a length prefix")
            length = struct.unpack(">H", header)[0]
            data = handle.read(length)
            if len(data) < length:
                raise Truncated("file ends inside a framed payload")
            try:
                records.append(parse_bolt7(data, received_at=received_at, strict=strict))
            except (UnknownType, Truncated, MalformedField) as exc:
                if strict:
                    raise MalformedField(f"framed payload: {exc}") from None
                skipped += 1
    return ReadResult(records, skipped)


# ---------------------------------------------------------------------------
# Deduplication and ordering
# ---------------------------------------------------------------------------

_KIND_RANK = {
    MessageKind.CHANNEL_ANNOUNCEMENT: 0,
    MessageKind.CHANNEL_UPDATE: 1,
    MessageKind.NODE_ANNOUNCEMENT: 2,
}


def _dedup_key(record: GossipRecord):
    p = record.payload
    if isinstance(p, NodeAnnouncement):
        return (record.kind, p.node_id)
    if isinstance(p, ChannelAnnouncement):
        return (record.kind, p.short_channel_id.to_u64())
    return (record.kind, p.short_channel_id.to_u64(), p.direction)


def _sort_key(record: GossipRecord):
    p = record.payload
    if isinstance(p, NodeAnnouncement):
        ident = (0, p.node_id, 0)
    elif isinstance(p, ChannelAnnouncement):
        ident = (p.short_channel_id.to_u64(), "", 0)
    else:
        ident = (p.short_channel_id.to_u64(), "", p.direction)
    return (record.timestamp, _KIND_RANK[record.kind], ident)


def dedup_and_order(records: Sequence[GossipRecord]) -> list[GossipRecord]:
    """Drop retransmissions and sort by (timestamp, kind, key).

    Duplicate keys keep the record with the greatest timestamp; equal
    timestamps keep the last occurrence in input order.  This collapses a
    stream to its final state per key; use normalize_records when the full
    update history must survive (multi-snapshot reconstruction).
    """
    survivors: dict[tuple, tuple[int, GossipRecord]] = {}
    for record in records:
        key = _dedup_key(record)
        kept = survivors.get(key)
        if kept is None or record.timestamp >= kept[0]:
            survivors[key] = (record.timestamp, record)
    return sorted((rec for _, rec in survivors.values()), key=_sort_key)


def normalize_records(records: Sequence[GossipRecord]) -> list[GossipRecord]:
    """Sort by (timestamp, kind, key) dropping only exact duplicates.

    Preserves per-key update history, which snapshot series reconstruction
    depends on.
    """
    seen: set[GossipRecord] = set()
    unique: list[GossipRecord] = []
    for record in records:
        if record in seen:
            continue
        seen.add(record)
        unique.append(record)
    return sorted(unique, key=_sort_key)


def iter_sorted(records: Sequence[GossipRecord]) -> Iterator[GossipRecord]:
    """Yield records while asserting non-decreasing timestamps."""
    last = None
    for record in records:
        if last is not None and record.timestamp < last:
            from .errors import UnsortedInput
            raise UnsortedInput(
                f"record timestamp {record.timestamp} after {last}")
        last = record.timestamp
        yield record
