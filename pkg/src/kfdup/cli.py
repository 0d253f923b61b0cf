"""Command-line front end.

Stages can run one at a time over trace files::

    kfdup gen -o src.jsonl
    kfdup --policy key send src.jsonl -o sent.jsonl
    kfdup --profile wifi --seed 3 channel sent.jsonl -o delivered.jsonl
    kfdup analyze sent.jsonl delivered.jsonl

or all at once with ``compare``. Errors exit nonzero and print the error
type on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import Config, ConfigError, dump_coefficients, load_config
from .dedup import DEFAULT_WINDOW, Deduplicator, Verdict
from .dup import DupPolicy, DupScope
from .keyframe import FrameKind, MediaCodec, Wmv9Layout, annotate_stream
from .metrics import packet_ids
from .netem import PRESETS, preset, transmit
from .pipeline import (AnalysisOptions, SourcePacket, StreamSpec, analyze, compare, generate,
                       network_for, send_schedule)
from .quality import (CoefficientAbsent, Network, OutOfRange, degradation, degradation_split,
                      gap_classify, predict_mos)
from .rtp import PacketError, parse_udp_ipv4
from .traces import Direction, PacketRecord, TraceMalformed, dump_report, read_trace, write_trace


def _common(defaults: bool) -> argparse.ArgumentParser:
    """Global flags, accepted before or after the subcommand."""
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=d(0), help="channel seed (default 0)")
    p.add_argument("--profile", default=d("wifi"), choices=sorted(PRESETS), help="channel preset")
    p.add_argument("--codec", default=d("divx"), help="mpeg2, divx or wmv9")
    p.add_argument("--policy", default=d("key"), choices=[x.value for x in DupPolicy],
                   help="duplication policy")
    p.add_argument("--config", default=d(None), help="key-value config file")
    p.add_argument("--dup-scope", default=d("whole-frame"), choices=[x.value for x in DupScope])
    p.add_argument("--dup-gap", type=int, default=d(0), help="packets between original and copy")
    return p


def _output(text: str, dest: str | None) -> None:
    if dest in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


def _write_records(records, dest: str | None) -> None:
    if dest in (None, "-"):
        write_trace(records, sys.stdout)
    else:
        write_trace(records, dest)


class Context:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config(args.config) if args.config else Config()
        self.codec = MediaCodec.from_name(args.codec)
        self.policy = DupPolicy(args.policy)
        self.scope = DupScope(args.dup_scope)
        base = self.config.profile or preset(args.profile)
        self.profile = base.with_seed(args.seed)

    def spec(self, **overrides) -> StreamSpec:
        kw = {"codec": self.codec}
        kw.update(self.config.stream or {})
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return StreamSpec(**kw)

    def options(self, network: str | None = None, jitter: str = "smoothed",
                window: int = DEFAULT_WINDOW, error_window: float = 1.0) -> AnalysisOptions:
        net = Network.from_name(network) if network else network_for(self.profile)
        kw = dict(codec=self.codec, network=net, jitter_source=jitter, window_size=window,
                  error_window=error_window)
        if self.config.table is not None:
            kw["table"] = self.config.table
        if self.config.thresholds is not None:
            kw["thresholds"] = self.config.thresholds
        return AnalysisOptions(**kw)


def _spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--duration", type=float)
    p.add_argument("--fps", type=float)
    p.add_argument("--bitrate", type=float)
    p.add_argument("--gop-size", type=int)
    p.add_argument("--key-byte-fraction", type=float)
    p.add_argument("--mtu-payload", type=int)
    p.add_argument("--gen-seed", type=int, default=0, help="stream generator seed")


def _spec_from(ctx: Context, a) -> StreamSpec:
    return ctx.spec(duration=a.duration, fps=a.fps, bitrate=a.bitrate, gop_size=a.gop_size,
                    key_byte_fraction=a.key_byte_fraction, mtu_payload=a.mtu_payload)


def _analysis_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", help="coefficient set: wifi, threeg or wimax (default from profile)")
    p.add_argument("--jitter", default="smoothed", choices=["smoothed", "mean_abs", "at_error"])
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW, help="dedup window")
    p.add_argument("--error-window", type=float, default=1.0, help="seconds around loss events")


def cmd_gen(ctx: Context, a) -> None:
    spec = _spec_from(ctx, a)
    recs = [PacketRecord.from_packet(Direction.SENT, s.send_time, s.packet, s.truth)
            for s in generate(spec, a.gen_seed)]
    _write_records(recs, a.output)


def cmd_detect(ctx: Context, a) -> None:
    layout = Wmv9Layout(a.wmv9_byte, a.wmv9_bit)
    truth = []
    if a.hex:
        packets = []
        for n, line in enumerate(Path(a.input).read_text().splitlines(), 1):
            if line.strip():
                try:
                    packets.append(parse_udp_ipv4(bytes.fromhex(line.strip()))[1])
                except ValueError as exc:
                    raise type(exc)(f"line {n}: {exc}") from None
    else:
        recs = read_trace(a.input)
        if any(r.payload is None for r in recs):
            raise TraceMalformed("detect needs payloads; trace is size-only")
        packets = [r.to_packet() for r in recs]
        truth = [r.frame_kind_truth for r in recs]
    labels = annotate_stream(ctx.codec, packets, layout)
    rows = [{"seq": lp.packet.sequence_number, "ssrc": lp.packet.ssrc, "kind": lp.kind,
             "starts_frame": lp.starts_frame} for lp in labels]
    report = {"codec": ctx.codec, "packets": len(rows),
              "counts": {k.name: sum(1 for lp in labels if lp.kind is k) for k in FrameKind}}
    if truth and all(t is not None for t in truth):
        report["matches_truth"] = sum(lp.kind is t for lp, t in zip(labels, truth))
    if a.verbose:
        report["labels"] = rows
    _output(dump_report(report), a.output)


def cmd_send(ctx: Context, a) -> None:
    recs = read_trace(a.input)
    if any(r.payload is None for r in recs):
        raise TraceMalformed("send needs payloads; trace is size-only")
    source = [SourcePacket(r.to_packet(), r.frame_kind_truth or FrameKind.UNKNOWN, r.time) for r in recs]
    labeled = annotate_stream(ctx.codec, [s.packet for s in source])
    schedule = send_schedule(source, labeled, ctx.policy, ctx.scope, ctx.args.dup_gap)
    _write_records([PacketRecord.from_packet(Direction.SENT, t, p, truth) for p, t, truth in schedule],
                   a.output)


def cmd_channel(ctx: Context, a) -> None:
    recs = read_trace(a.input)
    if not recs:
        raise TraceMalformed("sent trace is empty")
    packets = [r.to_packet() for r in recs]
    seen, base = set(), 0
    for r, ident in zip(recs, packet_ids(recs)[0]):
        if ident not in seen:
            seen.add(ident)
            base += r.size
    offered = a.bitrate * sum(r.size for r in recs) / base
    arrivals = transmit([(p, r.time) for p, r in zip(packets, recs)], ctx.profile, offered)
    _write_records([PacketRecord.from_packet(Direction.DELIVERED, t, p) for p, t in arrivals], a.output)


def cmd_recv(ctx: Context, a) -> None:
    recs = read_trace(a.input)
    dedups: dict[int, Deduplicator] = {}
    kept = []
    for r in recs:
        d = dedups.setdefault(r.ssrc, Deduplicator(a.window))
        if d.accept(r.seq) is Verdict.KEEP:
            kept.append(r)
    _write_records(kept, a.output)
    summary = {"received": len(recs), "kept": len(kept),
               "duplicate_drops": sum(d.duplicate_drops for d in dedups.values()),
               "stale_drops": sum(d.stale_drops for d in dedups.values())}
    sys.stderr.write(json.dumps(summary) + "\n")


def cmd_analyze(ctx: Context, a) -> None:
    opts = ctx.options(a.network, a.jitter, a.window, a.error_window)
    stats, quality = analyze(a.sent, a.delivered, opts)
    _output(dump_report({"stats": stats.to_dict(), "quality": quality}), a.output)


def cmd_compare(ctx: Context, a) -> None:
    spec = _spec_from(ctx, a)
    opts = ctx.options(a.network, a.jitter, a.window, a.error_window)
    out = compare(spec, ctx.profile, a.runs, ctx.args.seed, ctx.scope, ctx.args.dup_gap, opts,
                  a.trace_dir)
    _output(dump_report(out), a.output)


def cmd_classify(ctx: Context, a) -> None:
    net = Network.from_name(a.network) if a.network else network_for(ctx.profile)
    table = ctx.options().table
    thresholds = ctx.options().thresholds
    pred = predict_mos(net, ctx.codec, a.loss, a.jitter_s, a.key_loss, table)
    loss_r, jit_r, overall = gap_classify(a.loss, a.jitter_s, thresholds)
    report = {"network": net, "codec": ctx.codec, "loss_percent": a.loss, "jitter": a.jitter_s,
              "key_branch": a.key_loss, "mos": pred.mos, "mos_raw": pred.raw, "mos_sigma": pred.sigma,
              "delta_q": degradation(net, ctx.codec, a.loss, a.jitter_s, a.key_loss, table),
              "gap": {"loss": loss_r, "jitter": jit_r, "overall": overall}}
    if a.loss or a.jitter_s:
        report["loss_share"], report["jitter_share"] = degradation_split(
            net, ctx.codec, a.loss, a.jitter_s, a.key_loss, table)
    _output(dump_report(report), a.output)


def cmd_coefficients(ctx: Context, a) -> None:
    _output(dump_coefficients(ctx.options().table), a.output)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="kfdup", parents=[_common(True)],
                                  description="Key-frame duplication experiments over RTP traces.")
    top.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = top.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _common(False)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.add_argument("-o", "--output", help="output file (default stdout)")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate a synthetic labeled stream as a trace")
    _spec_args(p)

    p = add("detect", cmd_detect, "classify packets in a trace or in hex IPv4 datagrams")
    p.add_argument("input")
    p.add_argument("--hex", action="store_true", help="input holds one hex IPv4/UDP datagram per line")
    p.add_argument("--wmv9-byte", type=int, default=0)
    p.add_argument("--wmv9-bit", type=int, default=7)
    p.add_argument("-v", "--verbose", action="store_true", help="list every packet")

    p = add("send", cmd_send, "apply the duplication policy to a generated trace")
    p.add_argument("input")

    p = add("channel", cmd_channel, "pass a sent trace through the emulated channel")
    p.add_argument("input")
    p.add_argument("--bitrate", type=float, default=StreamSpec.bitrate,
                   help="nominal stream bitrate before duplication (bits/s)")

    p = add("recv", cmd_recv, "deduplicate a delivered trace")
    p.add_argument("input")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)

    p = add("analyze", cmd_analyze, "statistics and quality report from sent and delivered traces")
    p.add_argument("sent")
    p.add_argument("delivered")
    _analysis_args(p)

    p = add("compare", cmd_compare, "run all three policies on paired seeds")
    _spec_args(p)
    _analysis_args(p)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--trace-dir", help="write every run's traces here")

    p = add("classify", cmd_classify, "predict MOS and GAP ratings for a loss/jitter point")
    p.add_argument("--loss", type=float, required=True, help="packet loss in percent")
    p.add_argument("--jitter", dest="jitter_s", type=float, required=True, help="jitter in seconds")
    p.add_argument("--key-loss", action="store_true", help="use the key-frame-loss coefficients")
    p.add_argument("--network")

    add("coefficients", cmd_coefficients, "print the coefficient table as a config file")
    return top


EXPECTED_ERRORS = (PacketError, TraceMalformed, ConfigError, CoefficientAbsent, OutOfRange,
                   ValueError, LookupError, OSError)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ctx = Context(args)
        args.func(ctx, args)
    except EXPECTED_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
