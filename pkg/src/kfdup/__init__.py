"""Key-frame-aware RTP duplication and its effect on predicted video quality."""

from .dedup import Deduplicator, Verdict
from .dup import DupPolicy, DupScope, duplicate_stream, overhead_ratio
from .keyframe import FrameKind, MediaCodec, Wmv9Layout, annotate_stream, classify_payload
from .metrics import StreamStats, interarrival_jitter, jitter_at_error, packet_loss_percent
from .netem import (PRESETS, Bernoulli, ChannelProfile, DelayModel, GilbertElliott, preset,
                    transmit)
from .pipeline import AnalysisOptions, StreamSpec, analyze, compare, generate, run_pipeline
from .quality import Gap, GapThresholds, Network, degradation, degradation_split, gap_classify, predict_mos
from .rtp import RtpPacket, parse_rtp, parse_udp_ipv4, serialize_rtp

__version__ = "0.1.0"

__all__ = [
    "AnalysisOptions", "Bernoulli", "ChannelProfile", "Deduplicator", "DelayModel", "DupPolicy",
    "DupScope", "FrameKind", "Gap", "GapThresholds", "GilbertElliott", "MediaCodec", "Network",
    "PRESETS", "RtpPacket", "StreamSpec", "StreamStats", "Verdict", "Wmv9Layout", "analyze",
    "annotate_stream", "classify_payload", "compare", "degradation", "degradation_split",
    "duplicate_stream", "gap_classify", "generate", "interarrival_jitter", "jitter_at_error",
    "overhead_ratio", "packet_loss_percent", "parse_rtp", "parse_udp_ipv4", "predict_mos",
    "preset", "run_pipeline", "serialize_rtp", "transmit",
]
