"""IPv4 / UDP / RTP wire formats.

Only the fixed 12-byte RTP header and the CSRC list are interpreted. Header
extensions and padding stay inside ``payload`` as opaque bytes, with the
corresponding flags preserved so that serialization is bit-exact.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, field

RTP_VERSION = 2
RTP_HEADER_SIZE = 12
IPPROTO_UDP = 17
UDP_HEADER_SIZE = 8

SEQ_MOD = 1 << 16
_HALF_SEQ = 1 << 15


class PacketError(ValueError):
    """Base class for wire-format errors."""


class TooShort(PacketError):
    pass


class BadVersion(PacketError):
    pass


class FieldOutOfRange(PacketError):
    pass


class NotIpv4(PacketError):
    pass


class NotUdp(PacketError):
    pass


class TruncatedHeader(PacketError):
    pass


@dataclass(frozen=True)
class RtpPacket:
    sequence_number: int
    timestamp: int = 0
    ssrc: int = 0
    payload_type: int = 96
    marker: bool = False
    payload: bytes = b""
    padding: bool = False
    extension: bool = False
    csrcs: tuple[int, ...] = field(default=())
    version: int = RTP_VERSION

    @property
    def csrc_count(self) -> int:
        return len(self.csrcs)

    @property
    def size(self) -> int:
        """Serialized length in bytes."""
        return RTP_HEADER_SIZE + 4 * len(self.csrcs) + len(self.payload)

    def __bytes__(self) -> bytes:
        return serialize_rtp(self)


@dataclass(frozen=True)
class DatagramEnvelope:
    src_addr: ipaddress.IPv4Address
    dst_addr: ipaddress.IPv4Address
    src_port: int
    dst_port: int
    udp_payload: bytes


def _check(name: str, value: int, bits: int) -> None:
    if not 0 <= value < (1 << bits):
        raise FieldOutOfRange(f"{name}={value} does not fit in {bits} bits")


def serialize_rtp(p: RtpPacket) -> bytes:
    if p.version != RTP_VERSION:
        raise FieldOutOfRange(f"version={p.version}, only 2 is supported")
    _check("csrc_count", len(p.csrcs), 4)
    _check("payload_type", p.payload_type, 7)
    _check("sequence_number", p.sequence_number, 16)
    _check("timestamp", p.timestamp, 32)
    _check("ssrc", p.ssrc, 32)
    for c in p.csrcs:
        _check("csrc", c, 32)
    b0 = (p.version << 6) | (p.padding << 5) | (p.extension << 4) | len(p.csrcs)
    b1 = (p.marker << 7) | p.payload_type
    head = struct.pack("!BBHII", b0, b1, p.sequence_number, p.timestamp, p.ssrc)
    csrc = struct.pack(f"!{len(p.csrcs)}I", *p.csrcs)
    return head + csrc + bytes(p.payload)


def parse_rtp(data: bytes) -> RtpPacket:
    data = bytes(data)
    if len(data) < RTP_HEADER_SIZE:
        raise TooShort(f"RTP header needs 12 bytes, got {len(data)}")
    b0, b1, seq, ts, ssrc = struct.unpack_from("!BBHII", data)
    version = b0 >> 6
    if version != RTP_VERSION:
        raise BadVersion(f"RTP version {version}")
    cc = b0 & 0x0F
    header_len = RTP_HEADER_SIZE + 4 * cc
    if len(data) < header_len:
        raise TooShort(f"header declares {cc} CSRCs ({header_len} bytes), got {len(data)}")
    return RtpPacket(
        sequence_number=seq,
        timestamp=ts,
        ssrc=ssrc,
        payload_type=b1 & 0x7F,
        marker=bool(b1 >> 7),
        payload=data[header_len:],
        padding=bool(b0 & 0x20),
        extension=bool(b0 & 0x10),
        csrcs=struct.unpack_from(f"!{cc}I", data, RTP_HEADER_SIZE),
        version=version,
    )


def parse_udp_ipv4(datagram: bytes) -> tuple[DatagramEnvelope, RtpPacket]:
    datagram = bytes(datagram)
    if not datagram:
        raise TruncatedHeader("empty datagram")
    if datagram[0] >> 4 != 4:
        raise NotIpv4(f"IP version nibble {datagram[0] >> 4}")
    ihl = (datagram[0] & 0x0F) * 4
    if ihl < 20 or len(datagram) < ihl:
        raise TruncatedHeader(f"IPv4 header length {ihl}, datagram {len(datagram)} bytes")
    if datagram[9] != IPPROTO_UDP:
        raise NotUdp(f"IP protocol {datagram[9]}")
    if len(datagram) < ihl + UDP_HEADER_SIZE:
        raise TruncatedHeader("datagram ends inside the UDP header")
    src = ipaddress.IPv4Address(datagram[12:16])
    dst = ipaddress.IPv4Address(datagram[16:20])
    sport, dport, ulen = struct.unpack_from("!HHH", datagram, ihl)
    # Trust the UDP length when it is consistent; captures may carry trailer bytes.
    end = ihl + ulen if UDP_HEADER_SIZE <= ulen <= len(datagram) - ihl else len(datagram)
    payload = datagram[ihl + UDP_HEADER_SIZE:end]
    env = DatagramEnvelope(src, dst, sport, dport, payload)
    return env, parse_rtp(payload)


def build_udp_ipv4(
    packet: RtpPacket,
    src_addr: str = "10.0.0.1",
    dst_addr: str = "10.0.0.2",
    src_port: int = 5004,
    dst_port: int = 5004,
    ttl: int = 64,
) -> bytes:
    """Wrap an RTP packet in minimal IPv4 (IHL=5) and UDP headers, checksums zero."""
    _check("src_port", src_port, 16)
    _check("dst_port", dst_port, 16)
    rtp = serialize_rtp(packet)
    udp = struct.pack("!HHHH", src_port, dst_port, UDP_HEADER_SIZE + len(rtp), 0) + rtp
    ip = struct.pack(
        "!BBHHHBBH4s4s",
        0x45, 0, 20 + len(udp), 0, 0, ttl, IPPROTO_UDP, 0,
        ipaddress.IPv4Address(src_addr).packed,
        ipaddress.IPv4Address(dst_addr).packed,
    )
    return ip + udp


def seq_distance(a: int, b: int) -> int:
    """Signed shortest distance from ``a`` to ``b`` on the 16-bit ring.

    ``seq_distance(65535, 0) == 1``. The result lies in [-32768, 32767].
    """
    d = (b - a) % SEQ_MOD
    return d - SEQ_MOD if d >= _HALF_SEQ else d


def seq_lt(a: int, b: int) -> bool:
    """True if ``a`` precedes ``b`` in wrapping order."""
    return seq_distance(a, b) > 0


def extend_seqs(seqs, start: int | None = None) -> list[int]:
    """Unwrap 16-bit sequence numbers into a monotone-ish extended index.

    Each number is placed at the shortest wrapping distance from the previous
    one. ``start`` anchors the first value (defaults to the first number
    itself), so streams that never wrap keep their raw values.
    """
    out = []
    prev = prev_ext = None
    for s in seqs:
        if prev is None:
            prev_ext = s if start is None else start + seq_distance(start & 0xFFFF, s)
        else:
            prev_ext += seq_distance(prev, s)
        prev = s
        out.append(prev_ext)
    return out
