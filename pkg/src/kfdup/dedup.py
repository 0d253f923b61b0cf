"""Receiver-side duplicate suppression.

A packet is dropped only when its sequence number has already been accepted.
Late (reordered) packets are kept, unlike a "drop everything not newer than
the last seen number" rule, which discards every out-of-order arrival.
"""

from __future__ import annotations

import enum

from .rtp import RtpPacket, seq_distance

DEFAULT_WINDOW = 1024


class Verdict(enum.Enum):
    KEEP = "keep"
    DROP_DUPLICATE = "drop_duplicate"
    DROP_STALE = "drop_stale"


class Deduplicator:
    """Bounded-memory seen-set over a sliding window of sequence numbers.

    Sequence numbers are unwrapped into a running extended index relative to
    the newest accepted packet. The numbers at most ``window_size`` behind the
    newest occupy distinct slots of a ring of ``window_size + 1`` entries, so a
    slot holding the same extended index means "already seen".
    """

    def __init__(self, window_size: int = DEFAULT_WINDOW):
        if not 1 <= window_size < 1 << 15:
            raise ValueError("window_size must be in [1, 32767]")
        self.window_size = window_size
        self._ring: list[int | None] = [None] * (window_size + 1)
        self.newest: int | None = None
        self._newest_ext = 0
        self.kept = 0
        self.duplicate_drops = 0
        self.stale_drops = 0

    def reset(self) -> "Deduplicator":
        self._ring = [None] * (self.window_size + 1)
        self.newest = None
        self._newest_ext = 0
        return self

    @property
    def seen(self) -> set[int]:
        """Sequence numbers currently tracked (for inspection and tests)."""
        lo = self._newest_ext - self.window_size
        return {e & 0xFFFF for e in self._ring if e is not None and e >= lo}

    def accept(self, packet: RtpPacket | int) -> Verdict:
        seq = packet if isinstance(packet, int) else packet.sequence_number
        if self.newest is None:
            ext = self._newest_ext = seq
            self.newest = seq
        else:
            ext = self._newest_ext + seq_distance(self.newest, seq)
            if self._newest_ext - ext > self.window_size:
                self.stale_drops += 1
                return Verdict.DROP_STALE
        slot = ext % len(self._ring)
        if self._ring[slot] == ext:
            self.duplicate_drops += 1
            return Verdict.DROP_DUPLICATE
        self._ring[slot] = ext
        if ext > self._newest_ext:
            self._newest_ext = ext
            self.newest = seq
        self.kept += 1
        return Verdict.KEEP

    def filter(self, packets):
        """Yield the packets that are kept, in arrival order."""
        for p in packets:
            if self.accept(p) is Verdict.KEEP:
                yield p
