"""Finding key frames in RTP payloads.

A synthetic stream is generated for each codec, wrapped in IPv4/UDP
datagrams, parsed back and classified. The classifier only sees bytes; the
generator's ground truth is used to score it.
"""

from kfdup.keyframe import FrameKind, MediaCodec, annotate_stream
from kfdup.pipeline import StreamSpec, generate
from kfdup.rtp import build_udp_ipv4, parse_udp_ipv4

for codec in MediaCodec:
    spec = StreamSpec(codec=codec, duration=5.0, gop_size=12)
    source = generate(spec, seed=1)

    # Round-trip every packet through a datagram, as a capture would see it.
    packets = [parse_udp_ipv4(build_udp_ipv4(s.packet))[1] for s in source]
    labels = annotate_stream(codec, packets)

    correct = sum(lp.kind is s.truth for lp, s in zip(labels, source))
    key_frames = sum(lp.kind is FrameKind.KEY and lp.starts_frame for lp in labels)
    print(f"{codec.value:>6}: {len(packets)} packets, {key_frames} key frames found, "
          f"{correct}/{len(packets)} labels match ground truth")

first = generate(StreamSpec(codec=MediaCodec.MPEG2, duration=0.1), seed=0)[0].packet
print("\nFirst MPEG-2 payload bytes:", first.payload[:14].hex(" "))
print("  00 00 01 b8 ... is the GOP header; 00 00 01 00 is the picture header,")
print("  whose picture_coding_type bits (= 1) mark an intra-coded frame.")
