"""Why the receiver must not drop 'old' sequence numbers.

Jitter reorders packets. A receiver that discards anything not newer than
the last number it accepted throws away every late packet. A windowed
duplicate filter drops only true repeats.
"""

from kfdup.dedup import Deduplicator, Verdict
from kfdup.netem import Bernoulli, ChannelProfile, DelayModel, transmit
from kfdup.rtp import RtpPacket, seq_lt

sends = []
for i in range(5000):
    pkt = RtpPacket(sequence_number=(65000 + i) & 0xFFFF)
    sends.append((pkt, i * 0.004))
    if i % 10 == 0:                      # every tenth packet goes out twice
        sends.append((pkt, i * 0.004))

channel = ChannelProfile("jittery", Bernoulli(0.0), DelayModel(0.05, 0.012), seed=9)
arrivals = [p.sequence_number for p, _ in transmit(sends, channel)]

window = Deduplicator()
kept = sum(window.accept(s) is Verdict.KEEP for s in arrivals)

newest, last_seen_kept = None, 0
for s in arrivals:
    if newest is None or seq_lt(newest, s):
        newest = s
        last_seen_kept += 1

print(f"{len(arrivals)} arrivals of 5000 distinct packets (numbers wrap past 65535)")
print(f"windowed filter kept {kept}, dropped {window.duplicate_drops} duplicates")
print(f"last-seen rule kept {last_seen_kept}, losing {5000 - last_seen_kept} reordered packets")
