import ipaddress
import struct

import dpkt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfdup.rtp import (BadVersion, FieldOutOfRange, NotIpv4, NotUdp, RtpPacket, TooShort,
                       TruncatedHeader, build_udp_ipv4, extend_seqs, parse_rtp, parse_udp_ipv4,
                       seq_distance, seq_lt, serialize_rtp)

rtp_packets = st.builds(
    RtpPacket,
    sequence_number=st.integers(0, 0xFFFF),
    timestamp=st.integers(0, 0xFFFFFFFF),
    ssrc=st.integers(0, 0xFFFFFFFF),
    payload_type=st.integers(0, 127),
    marker=st.booleans(),
    payload=st.binary(max_size=1400),
    padding=st.booleans(),
    extension=st.booleans(),
    csrcs=st.lists(st.integers(0, 0xFFFFFFFF), max_size=15).map(tuple),
)


def test_minimal_header():
    data = bytes([0x80, 0x60, 0x00, 0x01]) + bytes(8)
    p = parse_rtp(data)
    assert p.version == 2
    assert p.marker is False
    assert p.payload_type == 96
    assert p.sequence_number == 1
    assert p.timestamp == 0 and p.ssrc == 0
    assert p.payload == b""


def test_bad_version():
    with pytest.raises(BadVersion):
        parse_rtp(bytes([0x40, 0x60]) + bytes(10))


@pytest.mark.parametrize("n", range(12))
def test_short_input(n):
    with pytest.raises(TooShort):
        parse_rtp(bytes([0x80] + [0] * (n - 1)) if n else b"")


def test_serialize_zero_packet():
    out = serialize_rtp(RtpPacket(sequence_number=0, payload_type=0))
    assert len(out) == 12
    assert out[:2] == b"\x80\x00"


def test_serialize_max_seq():
    assert serialize_rtp(RtpPacket(sequence_number=65535))[2:4] == b"\xff\xff"


@pytest.mark.parametrize("field, value", [
    ("sequence_number", 65536), ("payload_type", 128), ("timestamp", 1 << 32),
    ("ssrc", -1), ("csrcs", tuple(range(16))),
])
def test_field_out_of_range(field, value):
    kwargs = {"sequence_number": 0, field: value}
    with pytest.raises(FieldOutOfRange):
        serialize_rtp(RtpPacket(**kwargs))


def test_csrc_layout_against_dpkt():
    # V=2, CC=2, M=1, PT=33, seq 0x1234, ts 0x01020304, ssrc 0xAABBCCDD, two CSRCs
    header = bytes([0x82, 0xA1, 0x12, 0x34, 1, 2, 3, 4, 0xAA, 0xBB, 0xCC, 0xDD])
    csrcs = struct.pack("!II", 0x11111111, 0x22222222)
    p = parse_rtp(header + csrcs)
    ref = dpkt.rtp.RTP(header + csrcs)
    assert p.csrc_count == ref.cc == 2
    assert p.marker == bool(ref.m) and p.payload_type == ref.pt
    assert p.sequence_number == ref.seq and p.timestamp == ref.ts and p.ssrc == ref.ssrc
    assert p.payload == b"" == ref.data
    assert p.csrcs == (0x11111111, 0x22222222)

    with pytest.raises(TooShort):
        parse_rtp(header + csrcs[:-1])
    tail = parse_rtp(header + csrcs + b"abcd")
    assert tail.payload == b"abcd" and len(header + csrcs + b"abcd") == 24


@settings(max_examples=300)
@given(rtp_packets)
def test_round_trip(p):
    data = serialize_rtp(p)
    assert len(data) == 12 + 4 * p.csrc_count + len(p.payload)
    assert parse_rtp(data) == p


@settings(max_examples=200)
@given(rtp_packets)
def test_fields_agree_with_dpkt(p):
    data = serialize_rtp(p)
    ref = dpkt.rtp.RTP(data)
    assert (ref.version, ref.p, ref.x, ref.cc, ref.m, ref.pt, ref.seq, ref.ts, ref.ssrc) == (
        2, p.padding, p.extension, p.csrc_count, p.marker, p.payload_type,
        p.sequence_number, p.timestamp, p.ssrc)


@settings(max_examples=200)
@given(rtp_packets, st.data())
def test_truncation_is_typed(p, data):
    raw = serialize_rtp(p)
    header_len = 12 + 4 * p.csrc_count
    cut = data.draw(st.integers(0, header_len - 1))
    with pytest.raises(TooShort):
        parse_rtp(raw[:cut])


def test_udp_ipv4_against_dpkt():
    pkt = RtpPacket(sequence_number=1, payload_type=96)
    dgram = build_udp_ipv4(pkt, "192.168.1.10", "192.168.1.20", 40000, 5004)
    env, parsed = parse_udp_ipv4(dgram)
    ref = dpkt.ip.IP(dgram)
    assert isinstance(ref.data, dpkt.udp.UDP)
    assert env.src_addr == ipaddress.IPv4Address(ref.src) == ipaddress.IPv4Address("192.168.1.10")
    assert env.dst_addr == ipaddress.IPv4Address("192.168.1.20")
    assert (env.src_port, env.dst_port) == (ref.data.sport, ref.data.dport) == (40000, 5004)
    assert env.udp_payload == bytes(ref.data.data)
    assert parsed == pkt


def test_udp_honours_ihl():
    pkt = RtpPacket(sequence_number=7, payload=b"xyz")
    dgram = bytearray(build_udp_ipv4(pkt))
    options = b"\x01\x01\x01\x00"  # NOP NOP NOP EOL
    dgram[0] = 0x46
    dgram = bytes(dgram[:20]) + options + bytes(dgram[20:])
    dgram = dgram[:2] + struct.pack("!H", len(dgram)) + dgram[4:]
    ref = dpkt.ip.IP(dgram)
    assert ref.hl == 6
    env, parsed = parse_udp_ipv4(dgram)
    assert parsed == pkt
    assert env.udp_payload == bytes(ref.data.data)


def test_not_ipv4():
    dgram = bytearray(build_udp_ipv4(RtpPacket(sequence_number=1)))
    dgram[0] = 0x60
    with pytest.raises(NotIpv4):
        parse_udp_ipv4(bytes(dgram))


def test_not_udp():
    dgram = bytearray(build_udp_ipv4(RtpPacket(sequence_number=1)))
    dgram[9] = 6
    with pytest.raises(NotUdp):
        parse_udp_ipv4(bytes(dgram))


@pytest.mark.parametrize("n", [0, 1, 19, 20, 27])
def test_truncated_datagram(n):
    dgram = build_udp_ipv4(RtpPacket(sequence_number=1))
    with pytest.raises(TruncatedHeader):
        parse_udp_ipv4(dgram[:n])


def test_udp_payload_too_short_for_rtp():
    dgram = build_udp_ipv4(RtpPacket(sequence_number=1))
    with pytest.raises(TooShort):
        parse_udp_ipv4(dgram[:28 + 5])


@pytest.mark.parametrize("a, b, d", [
    (0, 1, 1), (1, 0, -1), (65535, 0, 1), (0, 65535, -1), (100, 100, 0),
    (0, 32767, 32767), (0, 32768, -32768),
])
def test_seq_distance(a, b, d):
    assert seq_distance(a, b) == d


def test_seq_lt_wraps():
    assert seq_lt(65535, 0)
    assert not seq_lt(0, 65535)


def test_extend_seqs():
    assert extend_seqs([65534, 65535, 0, 1, 0]) == [65534, 65535, 65536, 65537, 65536]
    assert extend_seqs([5, 6]) == [5, 6]
    assert extend_seqs([2], start=65535) == [65538]
