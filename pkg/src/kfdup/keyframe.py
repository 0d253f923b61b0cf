"""Key-frame detection in RTP payloads.

MPEG-2 and MPEG-4 Visual are recognised from elementary-stream start codes:

* MPEG-2 picture header ``00 00 01 00`` is followed by a 10-bit temporal
  reference and a 3-bit ``picture_coding_type`` (1 = I, 2 = P, 3 = B, 4 = D).
* MPEG-4 VOP header ``00 00 01 B6`` is followed by a 2-bit ``vop_coding_type``
  (0 = I, 1 = P, 2 = B, 3 = S).

WMV9 has no in-band start code worth scanning for. Its RTP encapsulation
carries a one-byte payload header on every packet whose key-frame flag
(by default the most significant bit) marks data belonging to a key frame.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .rtp import RtpPacket

START_CODE_PREFIX = b"\x00\x00\x01"
MPEG2_PICTURE_START = 0x00
MPEG4_VOP_START = 0xB6
MPEG4_GOV_START = 0xB3
MPEG2_GOP_START = 0xB8


class MediaCodec(enum.Enum):
    MPEG2 = "mpeg2"
    MPEG4_DIVX = "divx"
    WMV9 = "wmv9"

    @classmethod
    def from_name(cls, name: str) -> "MediaCodec":
        key = name.strip().lower().replace("-", "").replace("_", "")
        aliases = {"mpeg2": cls.MPEG2, "divx": cls.MPEG4_DIVX, "mpeg4": cls.MPEG4_DIVX,
                   "mpeg4divx": cls.MPEG4_DIVX, "wmv9": cls.WMV9, "wmv": cls.WMV9}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown codec {name!r}") from None


class FrameKind(enum.Enum):
    KEY = "key"
    DELTA = "delta"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Wmv9Layout:
    """Position of the key-frame flag in the WMV9 payload header."""

    byte_index: int = 0
    bit: int = 7


DEFAULT_WMV9_LAYOUT = Wmv9Layout()


def _iter_start_codes(payload: bytes, code: int):
    """Yield offsets just past each ``00 00 01 <code>`` occurrence."""
    pattern = START_CODE_PREFIX + bytes([code])
    i = payload.find(pattern)
    while i >= 0:
        yield i + 4
        i = payload.find(pattern, i + 1)


def _mpeg2_kinds(payload: bytes):
    for off in _iter_start_codes(payload, MPEG2_PICTURE_START):
        if off + 2 > len(payload):
            continue
        coding_type = (payload[off + 1] >> 3) & 0x07
        if coding_type == 1:
            yield FrameKind.KEY
        elif coding_type in (2, 3, 4):
            yield FrameKind.DELTA
        # 0 is forbidden and 5..7 reserved: not a real picture header


def _mpeg4_kinds(payload: bytes):
    for off in _iter_start_codes(payload, MPEG4_VOP_START):
        if off + 1 > len(payload):
            continue
        yield FrameKind.KEY if payload[off] >> 6 == 0 else FrameKind.DELTA


def classify_payload(
    codec: MediaCodec,
    payload: bytes,
    wmv9_layout: Wmv9Layout = DEFAULT_WMV9_LAYOUT,
) -> FrameKind:
    """Return KEY if any key-frame start is present, DELTA if only non-key
    starts are present, UNKNOWN if there is nothing to go on."""
    if codec is MediaCodec.WMV9:
        if len(payload) <= wmv9_layout.byte_index:
            return FrameKind.UNKNOWN
        flag = payload[wmv9_layout.byte_index] >> wmv9_layout.bit & 1
        return FrameKind.KEY if flag else FrameKind.DELTA

    kinds = _mpeg2_kinds(payload) if codec is MediaCodec.MPEG2 else _mpeg4_kinds(payload)
    result = FrameKind.UNKNOWN
    for kind in kinds:
        if kind is FrameKind.KEY:
            return kind
        result = kind
    return result


class LabeledPacket(NamedTuple):
    packet: RtpPacket
    kind: FrameKind
    starts_frame: bool


class FrameTracker:
    """Carries the open frame's kind across continuation packets of one stream."""

    def __init__(self, codec: MediaCodec, wmv9_layout: Wmv9Layout = DEFAULT_WMV9_LAYOUT):
        self.codec = codec
        self.wmv9_layout = wmv9_layout
        self.current_kind = FrameKind.UNKNOWN
        self.last_seq: int | None = None
        self._frame_open = False

    def reset(self) -> None:
        self.current_kind = FrameKind.UNKNOWN
        self.last_seq = None
        self._frame_open = False

    def label(self, packet: RtpPacket) -> LabeledPacket:
        found = classify_payload(self.codec, packet.payload, self.wmv9_layout)
        if found is FrameKind.UNKNOWN:
            kind, starts = self.current_kind, False
        else:
            # WMV9 flags every packet, so a frame only starts after a boundary.
            starts = self.codec is not MediaCodec.WMV9 or not self._frame_open
            kind = self.current_kind = found
        self._frame_open = True
        if packet.marker:
            self.current_kind = FrameKind.UNKNOWN
            self._frame_open = False
        self.last_seq = packet.sequence_number
        return LabeledPacket(packet, kind, starts)


def annotate_stream(
    codec: MediaCodec,
    packets: Iterable[RtpPacket],
    wmv9_layout: Wmv9Layout = DEFAULT_WMV9_LAYOUT,
) -> list[LabeledPacket]:
    """Label packets given in sender order, one tracker per SSRC."""
    trackers: dict[int, FrameTracker] = {}
    out = []
    for p in packets:
        tracker = trackers.get(p.ssrc)
        if tracker is None:
            tracker = trackers[p.ssrc] = FrameTracker(codec, wmv9_layout)
        out.append(tracker.label(p))
    return out
