"""Hand-rolled capture-file builders for the reader tests.

Every byte is constructed explicitly so the tests can assert that
parsed fields equal the construction inputs.
"""

import struct

FLAG_BITS = {"FIN": 0x01, "SYN": 0x02, "RST": 0x04,
             "PSH": 0x08, "ACK": 0x10, "URG": 0x20}


def ipv4(addr: str) -> bytes:
    return bytes(int(p) for p in addr.split("."))


def tcp_segment(src_port: int, dst_port: int, flags: set[str],
                payload: bytes = b"", header_len: int = 20) -> bytes:
    assert header_len % 4 == 0 and header_len >= 20
    flag_byte = 0
    for name in flags:
        flag_byte |= FLAG_BITS[name]
    head = struct.pack(">HHIIBBHHH",
                       src_port, dst_port,
                       0x1000, 0x2000,            # seq, ack
                       (header_len // 4) << 4,    # data offset
                       flag_byte,
                       65535, 0, 0)               # window, checksum, urgent
    head += b"\x01" * (header_len - 20)           # NOP option padding
    return head + payload


def ipv4_packet(src: str, dst: str, segment: bytes, proto: int = 6,
                frag_offset: int = 0, ihl: int = 20) -> bytes:
    total = ihl + len(segment)
    head = struct.pack(">BBHHHBBH",
                       0x40 | (ihl // 4), 0, total,
                       0x1234, frag_offset & 0x1FFF,
                       64, proto, 0)
    head += ipv4(src) + ipv4(dst)
    head += b"\x00" * (ihl - 20)
    return head + segment


def ipv6_packet(src16: bytes, dst16: bytes, segment: bytes, next_header: int = 6) -> bytes:
    head = struct.pack(">IHBB", 0x60000000, len(segment), next_header, 64)
    return head + src16 + dst16 + segment


def udp_packet(src: str, dst: str, src_port: int, dst_port: int,
               payload: bytes = b"") -> bytes:
    seg = struct.pack(">HHHH", src_port, dst_port, 8 + len(payload), 0) + payload
    return ipv4_packet(src, dst, seg, proto=17)


def ethernet(ip_payload: bytes, ethertype: int = 0x0800, vlan: int | None = None) -> bytes:
    frame = b"\xaa" * 6 + b"\xbb" * 6
    if vlan is not None:
        frame += struct.pack(">HH", 0x8100, vlan)
    return frame + struct.pack(">H", ethertype) + ip_payload


def sll_frame(ip_payload: bytes, ethertype: int = 0x0800) -> bytes:
    return struct.pack(">HHH8sH", 0, 1, 6, b"\xaa" * 8, ethertype) + ip_payload


def classic_pcap(frames: list[tuple[float, bytes]], *, nanos: bool = False,
                 little_endian: bool = True, linktype: int = 1,
                 truncate_last: int = 0) -> bytes:
    endian = "<" if little_endian else ">"
    magic = (0xA1B23C4D if nanos else 0xA1B2C3D4)
    out = struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, linktype)
    scale = 1_000_000_000 if nanos else 1_000_000
    for ts, frame in frames:
        ticks = round(ts * scale)
        sec, frac = divmod(ticks, scale)
        out += struct.pack(endian + "IIII", sec, frac, len(frame), len(frame))
        out += frame
    if truncate_last:
        out = out[:-truncate_last]
    return out


def _ng_block(btype: int, body: bytes) -> bytes:
    pad = (-len(body)) % 4
    total = 12 + len(body) + pad
    return struct.pack("<II", btype, total) + body + b"\x00" * pad + struct.pack("<I", total)


def pcapng(frames: list[tuple[float, bytes]], *, linktype: int = 1,
           tsresol: int | None = None) -> bytes:
    shb_body = struct.pack("<IHHq", 0x1A2B3C4D, 1, 0, -1)
    out = _ng_block(0x0A0D0D0A, shb_body)
    idb_body = struct.pack("<HHI", linktype, 0, 65535)
    if tsresol is not None:
        idb_body += struct.pack("<HHB3x", 9, 1, tsresol)
        idb_body += struct.pack("<HH", 0, 0)
    out += _ng_block(0x00000001, idb_body)
    scale = 10 ** (tsresol if tsresol is not None else 6)
    for ts, frame in frames:
        ticks = round(ts * scale)
        epb_body = struct.pack("<IIIII", 0, ticks >> 32, ticks & 0xFFFFFFFF,
                               len(frame), len(frame))
        out += _ng_block(0x00000006, epb_body + frame)
    return out


CLIENT, SERVER, STRAY = "10.0.0.1", "10.0.0.2", "10.0.0.3"
CLIENT_PORT, SERVER_PORT, STRAY_PORT = 40000, 80, 5555


def golden_session_frames() -> list[tuple[float, bytes]]:
    """Six packets: a five-packet client/server session whose feature
    vector is hand-computed in the tests, plus one stray mid-stream ACK
    on a different endpoint pair."""
    def c2s(flags, payload=b"", header_len=20):
        return ipv4_packet(CLIENT, SERVER,
                           tcp_segment(CLIENT_PORT, SERVER_PORT, flags, payload, header_len))

    def s2c(flags, payload=b"", header_len=20):
        return ipv4_packet(SERVER, CLIENT,
                           tcp_segment(SERVER_PORT, CLIENT_PORT, flags, payload, header_len))

    return [
        # ip_total_length: sent 60, 100, 140; received 60, 1000
        (0.0, ethernet(c2s({"SYN"}, header_len=40))),                      # 60
        (0.1, ethernet(s2c({"SYN", "ACK"}, header_len=40))),               # 60
        (0.2, ethernet(c2s({"ACK", "PSH"}, b"q" * 60))),                   # 100
        (0.5, ethernet(s2c({"ACK", "PSH"}, b"r" * 960))),                  # 1000
        (0.6, ethernet(c2s({"FIN", "ACK", "PSH"}, b"s" * 100))),           # 140
        (0.8, ethernet(ipv4_packet(STRAY, SERVER,
                                   tcp_segment(STRAY_PORT, SERVER_PORT, {"ACK"},
                                               header_len=40)))),          # 60
    ]


def golden_pcap_bytes() -> bytes:
    return classic_pcap(golden_session_frames())
