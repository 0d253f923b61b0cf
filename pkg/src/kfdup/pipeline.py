"""Synthetic streams, stage wiring and the three-policy comparison.

A run goes generate -> annotate -> duplicate -> channel -> dedup -> metrics ->
quality. The sender and receiver sides are captured as packet traces, and
the statistics are always computed from those traces, so ``analyze`` on a
run's own traces reproduces the run's report exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import quality as q
from .dedup import DEFAULT_WINDOW, Deduplicator
from .dup import DupPolicy, DupScope, duplicate_stream
from .keyframe import (FrameKind, LabeledPacket, MediaCodec, MPEG2_GOP_START,
                       MPEG2_PICTURE_START, MPEG4_GOV_START, MPEG4_VOP_START,
                       START_CODE_PREFIX, annotate_stream)
from .metrics import (DEFAULT_ERROR_WINDOW, StreamStats, TooFewPackets, interarrival_jitter,
                      jitter_at_error, packet_ids)
from .netem import ChannelProfile, transmit
from .rtp import RTP_HEADER_SIZE, RtpPacket
from .traces import Direction, PacketRecord, write_trace

RTP_CLOCK = 90_000


class SpecInvalid(ValueError):
    pass


class SsrcMismatch(ValueError):
    pass


@dataclass(frozen=True)
class StreamSpec:
    codec: MediaCodec = MediaCodec.MPEG4_DIVX
    fps: float = 24.0
    bitrate: float = 256_000.0
    duration: float = 10.0
    gop_size: int = 24
    key_byte_fraction: float = 0.07
    mtu_payload: int = 1400
    ssrc: int = 0x4B465550
    start_seq: int = 1000
    payload_type: int = 96
    size_spread: float = 0.25

    def validate(self) -> None:
        problems = []
        if not 0 < self.key_byte_fraction < 1:
            problems.append("key_byte_fraction must be in (0, 1)")
        if self.gop_size < 1:
            problems.append("gop_size must be >= 1")
        if self.fps <= 0 or self.bitrate <= 0 or self.duration <= 0:
            problems.append("fps, bitrate and duration must be > 0")
        if self.mtu_payload < 16:
            problems.append("mtu_payload must be >= 16")
        if not 0 <= self.start_seq <= 0xFFFF or not 0 <= self.ssrc <= 0xFFFFFFFF:
            problems.append("start_seq or ssrc out of range")
        if not 0 <= self.size_spread < 1:
            problems.append("size_spread must be in [0, 1)")
        if round(self.duration * self.fps) < 1:
            problems.append("duration too short for a single frame")
        if problems:
            raise SpecInvalid("; ".join(problems))


class SourcePacket(NamedTuple):
    packet: RtpPacket
    truth: FrameKind
    send_time: float


def _frame_header(codec: MediaCodec, key: bool, temporal_ref: int, rng) -> bytes:
    if codec is MediaCodec.MPEG2:
        coding_type = 1 if key else 2
        pic = bytes([temporal_ref >> 2 & 0xFF, (temporal_ref & 0x3) << 6 | coding_type << 3])
        head = START_CODE_PREFIX + bytes([MPEG2_PICTURE_START]) + pic
        if key:
            head = START_CODE_PREFIX + bytes([MPEG2_GOP_START, 0x08, 0x00, 0x08, 0x40]) + head
        return head
    if codec is MediaCodec.MPEG4_DIVX:
        coding_type = 0 if key else 1
        vop = bytes([coding_type << 6 | int(rng.integers(0, 64))])
        head = START_CODE_PREFIX + bytes([MPEG4_VOP_START]) + vop
        if key:
            head = START_CODE_PREFIX + bytes([MPEG4_GOV_START, 0x00, 0x00, 0x10]) + head
        return head
    return b""


def _filler(rng, n: int) -> bytes:
    # No zero bytes, so filler can never contain a start code prefix.
    return rng.integers(1, 256, size=n, dtype=np.uint8).tobytes()


def _split_sizes(total: int, weights: np.ndarray) -> list[int]:
    raw = total * weights / weights.sum()
    sizes = np.floor(raw).astype(int)
    short = total - int(sizes.sum())
    order = np.argsort(-(raw - sizes), kind="stable")
    sizes[order[:short]] += 1
    return sizes.tolist()


def _frame_payloads(rtp_bytes: int, mtu: int) -> list[int]:
    """Payload sizes of the packets carrying a frame of ``rtp_bytes`` on the wire."""
    n = max(1, math.ceil(rtp_bytes / (mtu + RTP_HEADER_SIZE)))
    payload = rtp_bytes - RTP_HEADER_SIZE * n
    sizes = [mtu] * (payload // mtu)
    if payload % mtu:
        sizes.append(payload % mtu)
    return sizes or [payload]


def generate(spec: StreamSpec, seed: int) -> list[SourcePacket]:
    """Synthetic constant-bitrate stream with ground-truth frame labels.

    Every GOP carries ``key_byte_fraction`` of its RTP bytes in the key frame;
    delta frames share the rest with seeded size variation. Each frame's
    first packet starts with the codec's genuine picture header.
    """
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6E6]))
    n_frames = round(spec.duration * spec.fps)
    gop_bytes = round(spec.bitrate / 8 * spec.gop_size / spec.fps)
    key_bytes = round(spec.key_byte_fraction * gop_bytes)
    min_frame = RTP_HEADER_SIZE + 16
    if key_bytes < min_frame or (spec.gop_size > 1 and
                                 (gop_bytes - key_bytes) / (spec.gop_size - 1) < 2 * min_frame):
        raise SpecInvalid("bitrate too low for the requested frame structure")

    out: list[SourcePacket] = []
    seq = spec.start_seq
    frame_sizes: list[int] = []
    for frame in range(n_frames):
        pos = frame % spec.gop_size
        if pos == 0:
            deltas = _split_sizes(gop_bytes - key_bytes,
                                  rng.uniform(1 - spec.size_spread, 1 + spec.size_spread,
                                              spec.gop_size - 1)) if spec.gop_size > 1 else []
            frame_sizes = [key_bytes] + deltas
        key = pos == 0
        kind = FrameKind.KEY if key else FrameKind.DELTA
        sizes = _frame_payloads(frame_sizes[pos], spec.mtu_payload)
        head = _frame_header(spec.codec, key, frame % 1024, rng)
        ts = round(frame * RTP_CLOCK / spec.fps) & 0xFFFFFFFF
        t0 = frame / spec.fps
        for k, size in enumerate(sizes):
            if spec.codec is MediaCodec.WMV9:
                payload = bytes([0x80 if key else 0x00]) + _filler(rng, size - 1)
            elif k == 0:
                payload = head + _filler(rng, size - len(head))
            else:
                payload = _filler(rng, size)
            pkt = RtpPacket(sequence_number=seq, timestamp=ts, ssrc=spec.ssrc,
                            payload_type=spec.payload_type, marker=k == len(sizes) - 1,
                            payload=payload)
            out.append(SourcePacket(pkt, kind, t0 + k / (len(sizes) * spec.fps)))
            seq = (seq + 1) & 0xFFFF
    return out


def network_for(profile: ChannelProfile) -> q.Network:
    try:
        return q.Network.from_name(profile.name)
    except ValueError:
        return q.Network.WIFI


@dataclass(frozen=True)
class AnalysisOptions:
    codec: MediaCodec = MediaCodec.MPEG4_DIVX
    network: q.Network = q.Network.WIFI
    window_size: int = DEFAULT_WINDOW
    jitter_source: str = "smoothed"
    error_window: float = DEFAULT_ERROR_WINDOW
    table: q.CoefficientTable = field(default_factory=lambda: q.DEFAULT_TABLE)
    thresholds: q.GapThresholds = field(default_factory=q.GapThresholds)

    def __post_init__(self):
        if self.jitter_source not in ("smoothed", "mean_abs", "at_error"):
            raise ValueError(f"unknown jitter source {self.jitter_source!r}")


US = 1_000_000


def _us(t: float) -> int:
    return round(t * US)


def _originals(sent: Sequence[PacketRecord]):
    """First occurrence of each sequence number on the wire, with its identity."""
    ids, anchors = packet_ids(sent)
    seen = set()
    originals, orig_ids = [], []
    for rec, ident in zip(sent, ids):
        if ident not in seen:
            seen.add(ident)
            originals.append(rec)
            orig_ids.append(ident)
    return originals, orig_ids, anchors


def _labels(originals: Sequence[PacketRecord], codec: MediaCodec) -> list[FrameKind]:
    if all(r.payload is not None for r in originals):
        return [lp.kind for lp in annotate_stream(codec, (r.to_packet() for r in originals))]
    return [r.frame_kind_truth or FrameKind.UNKNOWN for r in originals]


def evaluate(sent: Sequence[PacketRecord], delivered: Sequence[PacketRecord],
             opts: AnalysisOptions) -> tuple[StreamStats, dict]:
    """Statistics and quality report from a sender trace and a receiver trace.

    ``sent`` lists everything put on the wire (copies included) in send order;
    ``delivered`` lists every arrival, in arrival order, before deduplication.
    """
    originals, orig_ids, anchors = _originals(sent)
    if not originals:
        raise ValueError("sent trace is empty")
    stray = {r.ssrc for r in delivered} - set(anchors)
    if stray:
        raise SsrcMismatch(f"delivered trace has SSRCs {sorted(stray)} never sent")

    dedups: dict[int, Deduplicator] = {}
    kept = []
    for rec in delivered:
        d = dedups.get(rec.ssrc)
        if d is None:
            d = dedups[rec.ssrc] = Deduplicator(opts.window_size)
        if d.accept(rec.seq).name == "KEEP":
            kept.append(rec)
    kept_ids = packet_ids(kept, anchors)[0]
    got = set(kept_ids)

    # Trace times are microsecond-exact; integer microseconds keep float residue
    # out of the transit differences.
    send_us = dict(zip(orig_ids, (_us(r.time) for r in originals)))
    pairs = [(send_us[i], _us(r.time)) for i, r in zip(kept_ids, kept) if i in send_us]
    n_orig = len(originals)
    n_got = sum(1 for i in orig_ids if i in got)
    loss_percent = 100.0 * (1.0 - n_got / n_orig)

    try:
        jit = interarrival_jitter(pairs)
        j_smooth, j_abs = jit.smoothed / US, jit.mean_abs / US
    except TooFewPackets:
        j_smooth = j_abs = None
    loss_times = [_us(r.time) for r, i in zip(originals, orig_ids) if i not in got]
    j_err = jitter_at_error(pairs, loss_times, opts.error_window * US)
    j_err = None if j_err is None else j_err / US

    labels = _labels(originals, opts.codec)
    key_lost = sum(1 for k, i in zip(labels, orig_ids) if k is FrameKind.KEY and i not in got)
    wire = sum(r.size for r in sent)
    base = sum(r.size for r in originals)

    stats = StreamStats(
        sent_packets=n_orig,
        delivered_packets=n_got,
        duplicate_drops=sum(d.duplicate_drops for d in dedups.values()),
        stale_drops=sum(d.stale_drops for d in dedups.values()),
        loss_percent=loss_percent,
        jitter_mean=j_smooth,
        jitter_mean_abs=j_abs,
        jitter_at_error=j_err,
        key_frame_loss=key_lost > 0,
        key_packets_lost=key_lost,
        overhead=(wire - base) / base,
    )
    return stats, quality_report(stats, opts)


def quality_report(stats: StreamStats, opts: AnalysisOptions) -> dict:
    j = {"smoothed": stats.jitter_mean, "mean_abs": stats.jitter_mean_abs,
         "at_error": stats.jitter_at_error}[opts.jitter_source]
    j = 0.0 if j is None else j
    p = stats.loss_percent
    report = {
        "network": opts.network,
        "codec": opts.codec,
        "loss_percent": p,
        "jitter": j,
        "jitter_source": opts.jitter_source,
        "key_branch": stats.key_frame_loss,
    }
    try:
        pred = q.predict_mos(opts.network, opts.codec, p, j, stats.key_frame_loss, opts.table)
        report.update(mos=pred.mos, mos_raw=pred.raw, mos_sigma=pred.sigma,
                      delta_q=q.degradation(opts.network, opts.codec, p, j,
                                            stats.key_frame_loss, opts.table))
        try:
            share = q.degradation_split(opts.network, opts.codec, p, j,
                                        stats.key_frame_loss, opts.table)
            report.update(loss_share=share[0], jitter_share=share[1])
        except q.NoDegradation:
            report.update(loss_share=None, jitter_share=None)
    except (q.CoefficientAbsent, q.OutOfRange) as exc:
        report.update(mos=None, mos_raw=None, mos_sigma=None, delta_q=None,
                      error=type(exc).__name__)
    loss_r, jit_r, overall = q.gap_classify(p, j, opts.thresholds)
    report["gap"] = {"loss": loss_r, "jitter": jit_r, "overall": overall}
    return report


class RunResult(NamedTuple):
    stats: StreamStats
    report: dict
    sent: list[PacketRecord]
    delivered: list[PacketRecord]


def send_schedule(source: Sequence[SourcePacket], labeled: Sequence[LabeledPacket],
                  policy: DupPolicy, scope: DupScope = DupScope.WHOLE_FRAME,
                  gap: int = 0) -> list[tuple[RtpPacket, float, FrameKind]]:
    """Duplicated stream with send times; a copy leaves with the packet before it."""
    wire = duplicate_stream(labeled, policy, scope, gap)
    truth_of = {id(s.packet): s.truth for s in source}
    out = []
    i = 0
    t = source[0].send_time if source else 0.0
    for pkt in wire:
        if i < len(source) and pkt is source[i].packet:
            t = source[i].send_time
            i += 1
        out.append((pkt, t, truth_of.get(id(pkt), FrameKind.UNKNOWN)))
    return out


def run_pipeline(
    spec: StreamSpec,
    policy: DupPolicy,
    profile: ChannelProfile,
    gen_seed: int = 0,
    scope: DupScope = DupScope.WHOLE_FRAME,
    dup_gap: int = 0,
    opts: AnalysisOptions | None = None,
) -> RunResult:
    opts = opts or AnalysisOptions(codec=spec.codec, network=network_for(profile))
    source = generate(spec, gen_seed)
    labeled = annotate_stream(spec.codec, [s.packet for s in source])
    schedule = send_schedule(source, labeled, policy, scope, dup_gap)

    base_bytes = sum(s.packet.size for s in source)
    wire_bytes = sum(p.size for p, _, _ in schedule)
    offered = spec.bitrate * wire_bytes / base_bytes

    sent = [PacketRecord.from_packet(Direction.SENT, t, p, truth) for p, t, truth in schedule]
    # Channel sees the microsecond-rounded send times recorded in the trace.
    arrivals = transmit([(p, r.time) for (p, _, _), r in zip(schedule, sent)], profile, offered)
    delivered = [PacketRecord.from_packet(Direction.DELIVERED, t, p) for p, t in arrivals]
    stats, report = evaluate(sent, delivered, opts)
    report = {
        "policy": policy,
        "profile": profile.name,
        "seeds": {"generator": gen_seed, "channel": profile.seed},
        "offered_rate": offered,
        "stats": stats.to_dict(),
        "quality": report,
    }
    return RunResult(stats, report, sent, delivered)


def analyze(sent_path: str | Path, delivered_path: str | Path,
            opts: AnalysisOptions) -> tuple[StreamStats, dict]:
    from .traces import read_trace
    sent = read_trace(sent_path)
    delivered = read_trace(delivered_path)
    for name, recs, want in (("sent", sent, Direction.SENT), ("delivered", delivered, Direction.DELIVERED)):
        for n, r in enumerate(recs, 1):
            if r.direction is not want:
                from .traces import TraceMalformed
                raise TraceMalformed(f"{name} trace holds a {r.direction.value} record", n)
    return evaluate(sent, delivered, opts)


POLICIES = (DupPolicy.NONE, DupPolicy.KEY_FRAMES, DupPolicy.ALL)


def run_seeds(base_seed: int, run: int) -> tuple[int, int]:
    """(generator seed, channel seed) for one run index."""
    state = np.random.SeedSequence([base_seed, run]).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def _mean_se(xs: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(xs, dtype=float)
    se = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else math.nan
    return float(a.mean()), se


def compare(
    spec: StreamSpec,
    profile: ChannelProfile,
    n_runs: int = 100,
    base_seed: int = 0,
    scope: DupScope = DupScope.WHOLE_FRAME,
    dup_gap: int = 0,
    opts: AnalysisOptions | None = None,
    trace_dir: str | Path | None = None,
) -> dict:
    """Run every policy on matched seeds and tabulate mean degradation per policy."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    opts = opts or AnalysisOptions(codec=spec.codec, network=network_for(profile))
    per = {pol: {"delta_q": [], "overhead": [], "loss_percent": [], "jitter": [],
                 "key_frame_loss": []} for pol in POLICIES}
    for run in range(n_runs):
        gen_seed, chan_seed = run_seeds(base_seed, run)
        chan = profile.with_seed(chan_seed)
        for pol in POLICIES:
            res = run_pipeline(spec, pol, chan, gen_seed, scope, dup_gap, opts)
            rq = res.report["quality"]
            if rq.get("delta_q") is None:
                raise q.CoefficientAbsent(rq.get("error", "no prediction"))
            per[pol]["delta_q"].append(rq["delta_q"])
            per[pol]["overhead"].append(res.stats.overhead)
            per[pol]["loss_percent"].append(res.stats.loss_percent)
            per[pol]["jitter"].append(rq["jitter"])
            per[pol]["key_frame_loss"].append(float(res.stats.key_frame_loss))
            if trace_dir is not None:
                d = Path(trace_dir)
                d.mkdir(parents=True, exist_ok=True)
                stem = f"run{run:04d}_{pol.value}"
                write_trace(res.sent, d / f"{stem}_sent.jsonl")
                write_trace(res.delivered, d / f"{stem}_delivered.jsonl")

    rows = {}
    for pol in POLICIES:
        row = {}
        for metric, xs in per[pol].items():
            mean, se = _mean_se(xs)
            row[metric] = {"mean": mean, "se": se}
        rows[pol.value] = row

    def gap(lo: DupPolicy, hi: DupPolicy) -> dict:
        diff = np.asarray(per[hi]["delta_q"]) - np.asarray(per[lo]["delta_q"])
        mean, se = _mean_se(diff)
        if se and se > 0:
            z = mean / se
        else:
            z = 0.0 if mean == 0 else math.copysign(math.inf, mean)
        return {"mean": mean, "se": se, "z": z}

    key_vs_none = gap(DupPolicy.KEY_FRAMES, DupPolicy.NONE)
    none_vs_all = gap(DupPolicy.NONE, DupPolicy.ALL)
    ordered = key_vs_none["z"] > 2 and none_vs_all["z"] > 2
    return {
        "profile": profile.name,
        "codec": spec.codec,
        "network": opts.network,
        "n_runs": n_runs,
        "base_seed": base_seed,
        "scope": scope.value,
        "dup_gap": dup_gap,
        "table": rows,
        "gaps": {"none_minus_key": key_vs_none, "all_minus_none": none_vs_all},
        "ordering": "key < none < all" if ordered else "not resolved",
    }
