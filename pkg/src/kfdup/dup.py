"""Sender-side duplication of RTP packets."""

from __future__ import annotations

import enum
from collections import deque
from typing import Iterable, Sequence

from .keyframe import FrameKind, LabeledPacket
from .rtp import RtpPacket


class DupPolicy(enum.Enum):
    NONE = "none"
    KEY_FRAMES = "key"
    ALL = "all"

    @classmethod
    def from_name(cls, name: str) -> "DupPolicy":
        key = name.strip().lower().replace("-", "_")
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise ValueError(f"unknown duplication policy {name!r}")


class DupScope(enum.Enum):
    START_PACKET = "start-packet"
    WHOLE_FRAME = "whole-frame"


class EmptyStream(ValueError):
    pass


def _wants_copy(item: LabeledPacket, policy: DupPolicy, scope: DupScope) -> bool:
    if policy is DupPolicy.ALL:
        return True
    if policy is DupPolicy.NONE or item.kind is not FrameKind.KEY:
        return False
    return scope is DupScope.WHOLE_FRAME or item.starts_frame


def duplicate_stream(
    labeled: Iterable[LabeledPacket],
    policy: DupPolicy,
    scope: DupScope = DupScope.WHOLE_FRAME,
    gap: int = 0,
) -> list[RtpPacket]:
    """Emit the stream with one verbatim copy of each selected packet.

    A copy keeps the original sequence number. With ``gap == 0`` it follows
    its original directly; otherwise it is held back until ``gap`` further
    originals have been sent. Held copies are flushed at the end.
    """
    if gap < 0:
        raise ValueError("gap must be >= 0")
    out: list[RtpPacket] = []
    pending: deque[tuple[int, RtpPacket]] = deque()
    for index, item in enumerate(labeled):
        while pending and pending[0][0] <= index:
            out.append(pending.popleft()[1])
        out.append(item.packet)
        if _wants_copy(item, policy, scope):
            if gap == 0:
                out.append(item.packet)
            else:
                pending.append((index + gap + 1, item.packet))
    out.extend(p for _, p in pending)
    return out


def stream_bytes(packets: Iterable[RtpPacket]) -> int:
    return sum(p.size for p in packets)


def overhead_ratio(original: Sequence[RtpPacket], duplicated: Sequence[RtpPacket]) -> float:
    """Extra bytes on the wire relative to the original stream."""
    if not original or not duplicated:
        raise EmptyStream("overhead needs two non-empty streams")
    base = stream_bytes(original)
    return (stream_bytes(duplicated) - base) / base
