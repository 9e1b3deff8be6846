"""Capture-file readers for classic pcap and pcapng.

``read_pcap`` yields one record per TCP-over-IPv4/IPv6 packet in capture
order; non-TCP packets are counted and skipped, non-first IP fragments
are dropped with a warning (no transport header to read), and a
truncated final record ends the stream cleanly. Supported link layers:
Ethernet (with VLAN tags), raw IP, and Linux cooked v1/v2.
"""

from __future__ import annotations

import logging
import socket
import struct
from dataclasses import dataclass
from typing import Iterator

from .errors import PcapError

logger = logging.getLogger(__name__)

TCP_FLAG_BITS = (
    ("FIN", 0x01), ("SYN", 0x02), ("RST", 0x04),
    ("PSH", 0x08), ("ACK", 0x10), ("URG", 0x20),
)

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
LINKTYPE_LINUX_SLL = 113
LINKTYPE_LINUX_SLL2 = 276
_SUPPORTED_LINKTYPES = {LINKTYPE_ETHERNET, LINKTYPE_RAW,
                        LINKTYPE_LINUX_SLL, LINKTYPE_LINUX_SLL2}

# classic magics as read big-endian: value -> (struct endian, tick seconds)
_PCAP_MAGICS = {
    0xA1B2C3D4: (">", 1e-6),
    0xD4C3B2A1: ("<", 1e-6),
    0xA1B23C4D: (">", 1e-9),
    0x4D3CB2A1: ("<", 1e-9),
}

_PCAPNG_SHB = 0x0A0D0D0A
_PCAPNG_IDB = 0x00000001
_PCAPNG_PB = 0x00000002   # obsolete packet block
_PCAPNG_SPB = 0x00000003
_PCAPNG_EPB = 0x00000006


@dataclass(frozen=True)
class RawPacket:
    """One TCP segment as seen on the wire."""

    timestamp: float          # seconds since epoch
    src_addr: str
    dst_addr: str
    src_port: int
    dst_port: int
    tcp_flags: frozenset[str]
    ip_total_length: int      # network-layer datagram length in bytes
    payload_length: int       # TCP payload bytes


@dataclass
class CaptureStats:
    """Per-file read accounting, populated while the stream is consumed."""

    packets_total: int = 0       # link-layer records seen
    tcp_packets: int = 0
    skipped_non_tcp: int = 0
    dropped_fragments: int = 0
    malformed: int = 0
    truncated_tail: bool = False


def read_pcap(path, stats: CaptureStats | None = None) -> Iterator[RawPacket]:
    """Stream RawPackets from a pcap or pcapng file."""
    if stats is None:
        stats = CaptureStats()
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise PcapError("file too short for a capture magic header", offset=0)
    if data[:4] == b"\x0a\x0d\x0d\x0a":
        yield from _read_pcapng(data, stats)
    else:
        yield from _read_classic(data, stats)


def _read_classic(data: bytes, stats: CaptureStats) -> Iterator[RawPacket]:
    if len(data) < 24:
        raise PcapError("truncated pcap global header", offset=0)
    magic = struct.unpack(">I", data[:4])[0]
    if magic not in _PCAP_MAGICS:
        raise PcapError(f"unrecognized capture magic 0x{magic:08X}", offset=0)
    endian, tick = _PCAP_MAGICS[magic]
    linktype = struct.unpack(endian + "I", data[20:24])[0] & 0x0FFFFFFF
    if linktype not in _SUPPORTED_LINKTYPES:
        raise PcapError(f"unsupported link type {linktype}", offset=20)

    pos, n = 24, len(data)
    while pos < n:
        if pos + 16 > n:
            stats.truncated_tail = True
            logger.warning("truncated record header at offset %d; stopping", pos)
            break
        ts_sec, ts_frac, incl_len, _orig = struct.unpack(endian + "IIII", data[pos:pos + 16])
        if pos + 16 + incl_len > n:
            stats.truncated_tail = True
            logger.warning("truncated final record at offset %d; stopping", pos)
            break
        frame = data[pos + 16:pos + 16 + incl_len]
        pos += 16 + incl_len
        stats.packets_total += 1
        pkt = _decode_frame(frame, linktype, ts_sec + ts_frac * tick, stats)
        if pkt is not None:
            stats.tcp_packets += 1
            yield pkt


def _read_pcapng(data: bytes, stats: CaptureStats) -> Iterator[RawPacket]:
    pos, n = 0, len(data)
    endian = ">"
    interfaces: list[tuple[int, float]] = []  # (linktype, tick)

    while pos + 12 <= n:
        if data[pos:pos + 4] == b"\x0a\x0d\x0d\x0a":
            bom = data[pos + 8:pos + 12]
            if bom == b"\x1a\x2b\x3c\x4d":
                endian = ">"
            elif bom == b"\x4d\x3c\x2b\x1a":
                endian = "<"
            else:
                raise PcapError("bad pcapng byte-order magic", offset=pos + 8)
            interfaces = []
        btype, blen = struct.unpack(endian + "II", data[pos:pos + 8])
        if blen < 12 or blen % 4 != 0 or pos + blen > n:
            stats.truncated_tail = True
            logger.warning("truncated pcapng block at offset %d; stopping", pos)
            break
        body = data[pos + 8:pos + blen - 4]
        pos += blen

        if btype == _PCAPNG_IDB:
            interfaces.append(_parse_idb(body, endian))
        elif btype == _PCAPNG_EPB:
            if len(body) < 20:
                stats.malformed += 1
                continue
            iface, ts_high, ts_low, cap_len, _orig = struct.unpack(endian + "IIIII", body[:20])
            yield from _emit_pcapng(body[20:20 + cap_len], iface, ts_high, ts_low,
                                    interfaces, stats)
        elif btype == _PCAPNG_PB:
            if len(body) < 20:
                stats.malformed += 1
                continue
            iface, _drops, ts_high, ts_low, cap_len, _orig = struct.unpack(
                endian + "HHIIII", body[:20])
            yield from _emit_pcapng(body[20:20 + cap_len], iface, ts_high, ts_low,
                                    interfaces, stats)
        elif btype == _PCAPNG_SPB:
            if not interfaces:
                stats.malformed += 1
                continue
            # simple blocks carry no timestamp; epoch 0 keeps ordering stable
            yield from _emit_pcapng(body[4:], 0, 0, 0, interfaces, stats)
        # other block types (name resolution, statistics, custom) are ignored


def _parse_idb(body: bytes, endian: str) -> tuple[int, float]:
    if len(body) < 8:
        raise PcapError("interface description block too short")
    linktype = struct.unpack(endian + "H", body[0:2])[0]
    if linktype not in _SUPPORTED_LINKTYPES:
        raise PcapError(f"unsupported link type {linktype} in interface description")
    tick = 1e-6  # default resolution
    opt = body[8:]
    while len(opt) >= 4:
        code, olen = struct.unpack(endian + "HH", opt[:4])
        if code == 0:
            break
        value = opt[4:4 + olen]
        if code == 9 and olen == 1:  # if_tsresol
            v = value[0]
            tick = 2.0 ** -(v & 0x7F) if v & 0x80 else 10.0 ** -v
        opt = opt[4 + olen + (-olen % 4):]
    return linktype, tick


def _emit_pcapng(frame: bytes, iface: int, ts_high: int, ts_low: int,
                 interfaces: list[tuple[int, float]],
                 stats: CaptureStats) -> Iterator[RawPacket]:
    if iface >= len(interfaces):
        stats.malformed += 1
        logger.warning("packet references undeclared interface %d; skipped", iface)
        return
    linktype, tick = interfaces[iface]
    stats.packets_total += 1
    ts = ((ts_high << 32) | ts_low) * tick
    pkt = _decode_frame(frame, linktype, ts, stats)
    if pkt is not None:
        stats.tcp_packets += 1
        yield pkt


def _decode_frame(frame: bytes, linktype: int, ts: float,
                  stats: CaptureStats) -> RawPacket | None:
    if linktype == LINKTYPE_ETHERNET:
        if len(frame) < 14:
            stats.malformed += 1
            return None
        ethertype = struct.unpack(">H", frame[12:14])[0]
        off = 14
        while ethertype in (0x8100, 0x88A8, 0x9100):  # VLAN tags
            if len(frame) < off + 4:
                stats.malformed += 1
                return None
            ethertype = struct.unpack(">H", frame[off + 2:off + 4])[0]
            off += 4
        payload = frame[off:]
        if ethertype == 0x0800:
            return _decode_ipv4(payload, ts, stats)
        if ethertype == 0x86DD:
            return _decode_ipv6(payload, ts, stats)
        stats.skipped_non_tcp += 1
        return None
    if linktype == LINKTYPE_RAW:
        if not frame:
            stats.malformed += 1
            return None
        version = frame[0] >> 4
        if version == 4:
            return _decode_ipv4(frame, ts, stats)
        if version == 6:
            return _decode_ipv6(frame, ts, stats)
        stats.skipped_non_tcp += 1
        return None
    if linktype == LINKTYPE_LINUX_SLL:
        if len(frame) < 16:
            stats.malformed += 1
            return None
        proto = struct.unpack(">H", frame[14:16])[0]
        return _dispatch_ethertype(frame[16:], proto, ts, stats)
    if linktype == LINKTYPE_LINUX_SLL2:
        if len(frame) < 20:
            stats.malformed += 1
            return None
        proto = struct.unpack(">H", frame[0:2])[0]
        return _dispatch_ethertype(frame[20:], proto, ts, stats)
    stats.skipped_non_tcp += 1
    return None


def _dispatch_ethertype(payload: bytes, ethertype: int, ts: float,
                        stats: CaptureStats) -> RawPacket | None:
    if ethertype == 0x0800:
        return _decode_ipv4(payload, ts, stats)
    if ethertype == 0x86DD:
        return _decode_ipv6(payload, ts, stats)
    stats.skipped_non_tcp += 1
    return None


def _decode_ipv4(buf: bytes, ts: float, stats: CaptureStats) -> RawPacket | None:
    if len(buf) < 20 or buf[0] >> 4 != 4:
        stats.malformed += 1
        return None
    ihl = (buf[0] & 0x0F) * 4
    total_length = struct.unpack(">H", buf[2:4])[0]
    if ihl < 20 or total_length < ihl:
        stats.malformed += 1
        return None
    if buf[9] != 6:  # not TCP
        stats.skipped_non_tcp += 1
        return None
    frag_offset = struct.unpack(">H", buf[6:8])[0] & 0x1FFF
    if frag_offset:
        stats.dropped_fragments += 1
        logger.warning("dropping non-first IPv4 fragment (no TCP header present)")
        return None
    src = socket.inet_ntop(socket.AF_INET, buf[12:16])
    dst = socket.inet_ntop(socket.AF_INET, buf[16:20])
    return _decode_tcp(buf, ihl, total_length - ihl, total_length, src, dst, ts, stats)


def _decode_ipv6(buf: bytes, ts: float, stats: CaptureStats) -> RawPacket | None:
    if len(buf) < 40 or buf[0] >> 4 != 6:
        stats.malformed += 1
        return None
    payload_len = struct.unpack(">H", buf[4:6])[0]
    next_header = buf[6]
    src = socket.inet_ntop(socket.AF_INET6, buf[8:24])
    dst = socket.inet_ntop(socket.AF_INET6, buf[24:40])
    pos = 40
    # walk just enough of the extension chain to find the TCP header
    while next_header in (0, 43, 60, 44, 51):
        if len(buf) < pos + 8:
            stats.malformed += 1
            return None
        if next_header == 44:  # fragment header
            frag_offset = struct.unpack(">H", buf[pos + 2:pos + 4])[0] >> 3
            if frag_offset:
                stats.dropped_fragments += 1
                logger.warning("dropping non-first IPv6 fragment (no TCP header present)")
                return None
            next_header = buf[pos]
            pos += 8
        elif next_header == 51:  # authentication header
            next_header = buf[pos]
            pos += (buf[pos + 1] + 2) * 4
        else:
            next_header = buf[pos]
            pos += (buf[pos + 1] + 1) * 8
    if next_header != 6:
        stats.skipped_non_tcp += 1
        return None
    ip_total = 40 + payload_len
    return _decode_tcp(buf, pos, ip_total - pos, ip_total, src, dst, ts, stats)


def _decode_tcp(buf: bytes, tcp_at: int, declared_tcp_len: int, ip_total: int,
                src: str, dst: str, ts: float, stats: CaptureStats) -> RawPacket | None:
    if len(buf) < tcp_at + 20:
        stats.malformed += 1
        return None
    src_port, dst_port = struct.unpack(">HH", buf[tcp_at:tcp_at + 4])
    header_len = (buf[tcp_at + 12] >> 4) * 4
    if header_len < 20:
        stats.malformed += 1
        return None
    flags_byte = buf[tcp_at + 13]
    flags = frozenset(name for name, bit in TCP_FLAG_BITS if flags_byte & bit)
    payload_length = max(declared_tcp_len - header_len, 0)
    return RawPacket(
        timestamp=ts,
        src_addr=src,
        dst_addr=dst,
        src_port=src_port,
        dst_port=dst_port,
        tcp_flags=flags,
        ip_total_length=ip_total,
        payload_length=payload_length,
    )
