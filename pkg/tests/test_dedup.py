import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfdup.dedup import Deduplicator, Verdict

K, D, S = Verdict.KEEP, Verdict.DROP_DUPLICATE, Verdict.DROP_STALE


def run(seqs, d=None):
    d = d or Deduplicator()
    return [d.accept(s) for s in seqs]


def oracle(seqs):
    """Unbounded seen-set over raw 16-bit numbers."""
    seen, out = set(), []
    for s in seqs:
        out.append(D if s in seen else K)
        seen.add(s)
    return out


def last_seen_rule(seqs):
    """Drop anything not newer than the last accepted number."""
    newest, out = None, []
    for s in seqs:
        if newest is not None and s <= newest:
            out.append(D)
        else:
            newest = s
            out.append(K)
    return out


def test_simple_duplicate():
    assert run([1, 1, 2, 3]) == [K, D, K, K]


def test_reordering_is_kept():
    assert run([1, 3, 2]) == [K, K, K]
    assert last_seen_rule([1, 3, 2]) == [K, K, D]


def test_wraparound():
    seqs = [65534, 65535, 0, 65534]
    assert run(seqs) == oracle(seqs) == [K, K, K, D]


def test_stale_is_counted_separately():
    d = Deduplicator(window_size=4)
    assert run([10, 11, 16, 11, 12, 16], d) == [K, K, K, S, K, D]
    assert (d.kept, d.duplicate_drops, d.stale_drops) == (4, 1, 1)


def test_window_edge():
    d = Deduplicator(window_size=4)
    assert run([10, 14, 10, 9], d) == [K, K, D, S]


def test_seen_bounded_by_window():
    d = Deduplicator(window_size=8)
    for s in range(1000):
        d.accept(s % 65536)
        assert len(d.seen) <= 9
        assert all(0 <= (d.newest - x) % 65536 <= 8 for x in d.seen)


def test_reset():
    d = Deduplicator()
    assert run([1, 1], d.reset()) == [K, D]
    d = Deduplicator()
    d.accept(1)
    d.reset()
    assert d.accept(1) is K
    d.reset().reset()
    assert d.newest is None and d.seen == set()


def test_rejects_silly_windows():
    with pytest.raises(ValueError):
        Deduplicator(0)
    with pytest.raises(ValueError):
        Deduplicator(40000)


def shuffled_with_dups(rng, n, start, span, dup_rate):
    """Consecutive numbers plus random repeats, each displaced by < span positions."""
    base = [(start + i) % 65536 for i in range(n)]
    keyed = [(i + rng.random() * span, s) for i, s in enumerate(base)]
    keyed += [(i + rng.random() * span, s) for i, s in enumerate(base) if rng.random() < dup_rate]
    return [s for _, s in sorted(keyed)]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 65535), st.integers(1, 300), st.floats(0, 0.5))
def test_agrees_with_unbounded_oracle(seed, start, span, dup_rate):
    rng = random.Random(seed)
    seqs = shuffled_with_dups(rng, 10_000, start, span, dup_rate)
    assert run(seqs) == oracle(seqs)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 65535), st.integers(1, 500))
def test_reordering_alone_never_drops(seed, start, span):
    rng = random.Random(seed)
    seqs = shuffled_with_dups(rng, 5000, start, span, 0.0)
    assert all(v is K for v in run(seqs))
