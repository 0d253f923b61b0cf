"""Loss, jitter and key-frame-loss statistics from sent/delivered traces."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .keyframe import FrameKind, LabeledPacket
from .rtp import RtpPacket, seq_distance

JITTER_GAIN = 1.0 / 16.0
DEFAULT_ERROR_WINDOW = 1.0


class EmptySent(ValueError):
    pass


class TooFewPackets(ValueError):
    pass


@dataclass(frozen=True)
class JitterEstimate:
    smoothed: float
    mean_abs: float


@dataclass(frozen=True)
class StreamStats:
    sent_packets: int
    delivered_packets: int
    duplicate_drops: int
    stale_drops: int
    loss_percent: float
    jitter_mean: float | None
    jitter_mean_abs: float | None
    jitter_at_error: float | None
    key_frame_loss: bool
    key_packets_lost: int
    overhead: float

    def to_dict(self) -> dict:
        return asdict(self)


def packet_ids(packets: Iterable[RtpPacket], anchors: dict[int, int] | None = None
               ) -> tuple[list[tuple[int, int]], dict[int, int]]:
    """(ssrc, unwrapped sequence number) for each packet, unwrapped per SSRC.

    Without ``anchors`` each SSRC starts at its first raw number; the
    anchors used are returned so a second stream can share the numbering.
    """
    anchors = dict(anchors or {})
    prev: dict[int, tuple[int, int]] = {}
    out = []
    for p in packets:
        s = p.sequence_number
        last = prev.get(p.ssrc)
        if last is None:
            base = anchors.setdefault(p.ssrc, s)
            ext = base + seq_distance(base & 0xFFFF, s)
        else:
            ext = last[1] + seq_distance(last[0], s)
        prev[p.ssrc] = (s, ext)
        out.append((p.ssrc, ext))
    return out, anchors


def packet_loss_percent(sent: Sequence[RtpPacket], unique_delivered: Iterable[RtpPacket]) -> float:
    """Percentage of distinct sent sequence numbers with no delivered copy."""
    sent_ids, anchors = packet_ids(sent)
    sent_set = set(sent_ids)
    if not sent_set:
        raise EmptySent("no packets were sent")
    got = set(packet_ids(unique_delivered, anchors)[0]) & sent_set
    return 100.0 * (1.0 - len(got) / len(sent_set))


def interarrival_jitter(delivered: Sequence[tuple[float, float]]) -> JitterEstimate:
    """Smoothed interarrival jitter over (send_time, arrival_time) in arrival order.

    J is updated as J += (|D| - J) / 16 where D is the change in transit time
    between consecutive arrivals. ``mean_abs`` is the plain mean of |D|.
    """
    if len(delivered) < 2:
        raise TooFewPackets("jitter needs at least two delivered packets")
    transit = np.array([a - s for s, a in delivered], dtype=float)
    d = np.abs(np.diff(transit))
    j = 0.0
    for x in d.tolist():
        j += (x - j) * JITTER_GAIN
    return JitterEstimate(j, float(d.mean()))


def jitter_at_error(
    delivered: Sequence[tuple[float, float]],
    loss_event_times: Sequence[float],
    window: float = DEFAULT_ERROR_WINDOW,
) -> float | None:
    """Smoothed jitter over deliveries sent within +-window of some loss event.

    Returns None when there are no loss events or fewer than two deliveries
    fall inside the windows.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    if len(loss_event_times) == 0 or len(delivered) == 0:
        return None
    events = np.sort(np.asarray(loss_event_times, dtype=float))
    send = np.array([s for s, _ in delivered], dtype=float)
    idx = np.searchsorted(events, send)
    left = np.abs(send - events[np.clip(idx - 1, 0, len(events) - 1)])
    right = np.abs(events[np.clip(idx, 0, len(events) - 1)] - send)
    near = np.minimum(left, right) <= window
    picked = [pair for pair, keep in zip(delivered, near.tolist()) if keep]
    if len(picked) < 2:
        return None
    return interarrival_jitter(picked).smoothed


def key_loss_count(sent_labeled: Sequence[LabeledPacket], delivered_seqs: set) -> int:
    """KEY-labeled original sequence numbers with no delivered copy.

    ``delivered_seqs`` holds sequence numbers unwrapped from the first sent
    number (identical to the raw numbers for streams that never wrap), or
    (ssrc, number) pairs for multi-SSRC traces.
    """
    ids, _ = packet_ids(item.packet for item in sent_labeled)
    paired = isinstance(next(iter(delivered_seqs), 0), tuple)
    lost = set()
    for item, ident in zip(sent_labeled, ids):
        if item.kind is FrameKind.KEY and (ident if paired else ident[1]) not in delivered_seqs:
            lost.add(ident)
    return len(lost)
