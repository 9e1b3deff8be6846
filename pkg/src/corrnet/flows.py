"""Bidirectional TCP flow assembly.

Packets sharing a canonical (endpoint-pair, TCP) key form one flow until
it closes: both-direction FIN exchange acknowledged, RST seen, idle gap
above the timeout, or capture end. Any packet arriving on a closed key
opens a new flow (a SYN-without-ACK opens it with reason ``syn``), so
every consumed packet lands in exactly one flow.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from .pcap import RawPacket

Endpoint = tuple[str, int]


class Direction(str, enum.Enum):
    SENT = "sent"          # initiator -> responder
    RECEIVED = "received"  # responder -> initiator


class OpenReason(str, enum.Enum):
    SYN = "syn"
    FIRST_SEEN = "first-seen"


class CloseReason(str, enum.Enum):
    FIN_HANDSHAKE = "fin-handshake"
    RST = "rst"
    IDLE_TIMEOUT = "idle-timeout"
    CAPTURE_END = "capture-end"


@dataclass(frozen=True)
class FlowKey:
    """Direction-insensitive endpoint pair; protocol is always TCP."""

    low: Endpoint
    high: Endpoint

    @classmethod
    def of(cls, src_addr: str, src_port: int, dst_addr: str, dst_port: int) -> "FlowKey":
        a, b = (src_addr, src_port), (dst_addr, dst_port)
        return cls(a, b) if a <= b else cls(b, a)

    @classmethod
    def from_packet(cls, pkt: RawPacket) -> "FlowKey":
        return cls.of(pkt.src_addr, pkt.src_port, pkt.dst_addr, pkt.dst_port)


@dataclass(frozen=True)
class FlowEvent:
    timestamp: float
    direction: Direction
    ip_total_length: int


@dataclass
class FlowRecord:
    key: FlowKey
    initiator: Endpoint
    events: list[FlowEvent]
    open_reason: OpenReason
    close_reason: CloseReason

    @property
    def responder(self) -> Endpoint:
        return self.key.high if self.initiator == self.key.low else self.key.low

    @property
    def first_timestamp(self) -> float:
        return self.events[0].timestamp

    @property
    def last_timestamp(self) -> float:
        return self.events[-1].timestamp


def _is_syn_without_ack(pkt: RawPacket) -> bool:
    return "SYN" in pkt.tcp_flags and "ACK" not in pkt.tcp_flags


@dataclass
class _Builder:
    key: FlowKey
    seq: int
    open_reason: OpenReason
    packets: list[tuple[float, Endpoint, int, bool]] = field(default_factory=list)
    fin_senders: set[Endpoint] = field(default_factory=set)
    last_ts: float = 0.0

    def add(self, pkt: RawPacket) -> None:
        src = (pkt.src_addr, pkt.src_port)
        self.packets.append((pkt.timestamp, src, pkt.ip_total_length,
                             _is_syn_without_ack(pkt)))
        self.last_ts = pkt.timestamp

    def finish(self, reason: CloseReason) -> FlowRecord:
        initiator = self.packets[0][1]
        for _ts, src, _length, syn_only in self.packets:
            if syn_only:
                initiator = src
                break
        events = [FlowEvent(ts, Direction.SENT if src == initiator else Direction.RECEIVED,
                            length)
                  for ts, src, length, _syn in self.packets]
        return FlowRecord(self.key, initiator, events, self.open_reason, reason)


def assemble_flows(packets: Iterable[RawPacket], idle_timeout: float = 600.0) -> list[FlowRecord]:
    """Single-pass stateful flow assembly over a capture.

    Input is stable-sorted by timestamp first, so ties keep capture
    order; output flows are ordered by open time (ties by open order).
    """
    if idle_timeout <= 0:
        raise ValueError(f"idle_timeout must be positive, got {idle_timeout}")
    ordered = sorted(packets, key=lambda p: p.timestamp)
    active: dict[FlowKey, _Builder] = {}
    finished: list[tuple[int, FlowRecord]] = []
    seq = 0

    for pkt in ordered:
        key = FlowKey.from_packet(pkt)
        builder = active.get(key)
        if builder is not None and pkt.timestamp - builder.last_ts > idle_timeout:
            finished.append((builder.seq, builder.finish(CloseReason.IDLE_TIMEOUT)))
            del active[key]
            builder = None
        if builder is None:
            reason = OpenReason.SYN if _is_syn_without_ack(pkt) else OpenReason.FIRST_SEEN
            builder = _Builder(key=key, seq=seq, open_reason=reason)
            seq += 1
            active[key] = builder

        fins_complete = len(builder.fin_senders) == 2
        builder.add(pkt)
        flags = pkt.tcp_flags
        if "RST" in flags:
            finished.append((builder.seq, builder.finish(CloseReason.RST)))
            del active[key]
        elif fins_complete and "ACK" in flags and "FIN" not in flags:
            # the acknowledgement completing the four-way close
            finished.append((builder.seq, builder.finish(CloseReason.FIN_HANDSHAKE)))
            del active[key]
        elif "FIN" in flags:
            builder.fin_senders.add((pkt.src_addr, pkt.src_port))

    for builder in active.values():
        finished.append((builder.seq, builder.finish(CloseReason.CAPTURE_END)))
    finished.sort(key=lambda item: item[0])  # open order == open-time order
    return [record for _seq, record in finished]
