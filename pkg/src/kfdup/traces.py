"""Line-delimited packet traces and JSON reports.

Each trace line is one JSON object with a fixed key order, starting with the
format version. Times are seconds rounded to the microsecond.
"""

from __future__ import annotations

import base64
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

from .keyframe import FrameKind
from .rtp import RTP_HEADER_SIZE, RtpPacket

TRACE_VERSION = 1
REPORT_VERSION = 1


class TraceMalformed(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class Direction(enum.Enum):
    SENT = "SENT"
    DELIVERED = "DELIVERED"


def usec(t: float) -> float:
    return round(t, 6)


@dataclass(frozen=True)
class PacketRecord:
    direction: Direction
    time: float
    seq: int
    marker: bool
    payload_type: int
    ssrc: int
    payload_size: int
    frame_kind_truth: FrameKind | None = None
    payload: bytes | None = None

    @property
    def sequence_number(self) -> int:
        return self.seq

    @property
    def size(self) -> int:
        return RTP_HEADER_SIZE + self.payload_size

    @classmethod
    def from_packet(cls, direction: Direction, time: float, packet: RtpPacket,
                    truth: FrameKind | None = None, with_payload: bool = True) -> "PacketRecord":
        return cls(direction, usec(time), packet.sequence_number, packet.marker,
                   packet.payload_type, packet.ssrc, len(packet.payload), truth,
                   packet.payload if with_payload else None)

    def to_packet(self) -> RtpPacket:
        payload = self.payload if self.payload is not None else bytes(self.payload_size)
        return RtpPacket(sequence_number=self.seq, ssrc=self.ssrc, payload_type=self.payload_type,
                         marker=self.marker, payload=payload)

    def to_json(self) -> str:
        obj = {
            "v": TRACE_VERSION,
            "dir": self.direction.value,
            "time": usec(self.time),
            "seq": self.seq,
            "marker": self.marker,
            "pt": self.payload_type,
            "ssrc": self.ssrc,
            "size": self.payload_size,
            "truth": self.frame_kind_truth.value if self.frame_kind_truth else None,
            "payload": base64.b64encode(self.payload).decode("ascii") if self.payload is not None else None,
        }
        return json.dumps(obj, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str, lineno: int | None = None) -> "PacketRecord":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceMalformed(f"not JSON ({exc.msg})", lineno) from None
        if not isinstance(obj, dict):
            raise TraceMalformed("record is not an object", lineno)
        if obj.get("v") != TRACE_VERSION:
            raise TraceMalformed(f"unsupported trace version {obj.get('v')!r}", lineno)
        try:
            payload = obj.get("payload")
            payload = base64.b64decode(payload, validate=True) if payload is not None else None
            truth = obj.get("truth")
            rec = cls(
                direction=Direction(obj["dir"]),
                time=float(obj["time"]),
                seq=int(obj["seq"]),
                marker=bool(obj["marker"]),
                payload_type=int(obj["pt"]),
                ssrc=int(obj["ssrc"]),
                payload_size=int(obj["size"]),
                frame_kind_truth=FrameKind(truth) if truth is not None else None,
                payload=payload,
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise TraceMalformed(f"bad field: {exc}", lineno) from None
        if not 0 <= rec.seq <= 0xFFFF or not 0 <= rec.payload_type <= 0x7F or rec.payload_size < 0:
            raise TraceMalformed("field out of range", lineno)
        if payload is not None and len(payload) != rec.payload_size:
            raise TraceMalformed("payload length does not match size", lineno)
        return rec


def write_trace(records: Iterable[PacketRecord], dest: str | Path | IO[str]) -> None:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            write_trace(records, fh)
        return
    for rec in records:
        dest.write(rec.to_json())
        dest.write("\n")


def iter_trace(src: str | Path | IO[str]) -> Iterator[PacketRecord]:
    if isinstance(src, (str, Path)):
        with open(src, encoding="utf-8") as fh:
            yield from iter_trace(fh)
        return
    for lineno, line in enumerate(src, 1):
        if line.strip():
            yield PacketRecord.from_json(line, lineno)


def read_trace(src: str | Path | IO[str]) -> list[PacketRecord]:
    return list(iter_trace(src))


def _plain(value):
    if isinstance(value, enum.Enum):
        return value.name
    if isinstance(value, float):
        return round(value, 12) if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def dump_report(report: dict) -> str:
    """Serialize a report with its version first and the rest in insertion order."""
    body = {"version": REPORT_VERSION}
    body.update(report)
    return json.dumps(_plain(body), indent=2, allow_nan=False) + "\n"
