"""Linear MOS model Q = Q_ideal - alpha*p - beta*j with per-network coefficients.

``p`` is packet loss in percent and ``j`` is jitter in seconds. Two
coefficient pairs exist per (network, codec): one for segments where a
key-frame packet was lost and one for segments without key-frame loss.
Uncertainties are carried exactly as supplied with each coefficient.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

from .keyframe import MediaCodec

MOS_MIN = 1.0
MOS_MAX = 5.0


class CoefficientAbsent(LookupError):
    pass


class OutOfRange(ValueError):
    pass


class NoDegradation(ValueError):
    pass


class Network(enum.Enum):
    WIFI = "wifi"
    THREEG = "threeg"
    WIMAX = "wimax"

    @classmethod
    def from_name(cls, name: str) -> "Network":
        key = name.strip().lower().replace("-", "").replace("_", "")
        if key.startswith("wimax"):
            return cls.WIMAX
        aliases = {"wifi": cls.WIFI, "3g": cls.THREEG, "threeg": cls.THREEG}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown network {name!r}") from None


@dataclass(frozen=True)
class Measured:
    value: float
    sigma: float

    def __iter__(self):
        return iter((self.value, self.sigma))


@dataclass(frozen=True)
class CoefficientEntry:
    q_ideal: Measured
    alpha_key: Measured | None
    beta_key: Measured | None
    alpha_nokey: Measured | None
    beta_nokey: Measured | None

    def __post_init__(self):
        if not 0 < self.q_ideal.value <= 5:
            raise ValueError("q_ideal must lie in (0, 5]")
        for m in (self.alpha_key, self.beta_key, self.alpha_nokey, self.beta_nokey):
            if m is not None and m.value < 0:
                raise ValueError("model coefficients must be >= 0")

    def branch(self, key_loss: bool) -> tuple[Measured, Measured]:
        alpha, beta = (self.alpha_key, self.beta_key) if key_loss else (self.alpha_nokey, self.beta_nokey)
        if alpha is None or beta is None:
            which = "key-loss" if key_loss else "no-key-loss"
            raise CoefficientAbsent(f"no {which} coefficients for this network/codec")
        return alpha, beta


def _e(q, a_k, b_k, a_w, b_w) -> CoefficientEntry:
    m = lambda t: None if t is None else Measured(*t)  # noqa: E731
    return CoefficientEntry(m(q), m(a_k), m(b_k), m(a_w), m(b_w))


_M2, _DX, _WM = MediaCodec.MPEG2, MediaCodec.MPEG4_DIVX, MediaCodec.WMV9

DEFAULT_COEFFICIENTS: dict[tuple[Network, MediaCodec], CoefficientEntry] = {
    (Network.WIFI, _M2): _e((4.2, 0.2), (0.11, 0.03), (15, 4), (0.06, 0.02), (10, 4)),
    (Network.WIFI, _DX): _e((4.7, 0.2), (0.25, 0.05), (15, 5), (0.17, 0.02), (10, 3)),
    (Network.WIFI, _WM): _e((4.7, 0.2), (0.25, 0.11), (20, 8), (0.16, 0.6), (10, 3)),
    (Network.THREEG, _M2): _e((4.2, 0.2), (0.12, 0.02), (10, 2), (0.06, 0.01), (5, 1)),
    (Network.THREEG, _DX): _e((4.7, 0.2), (0.22, 0.05), (13, 5), (0.12, 0.05), (8, 3)),
    (Network.THREEG, _WM): _e((4.7, 0.2), (0.32, 0.1), (15, 5), (0.22, 0.08), (10, 3)),
    (Network.WIMAX, _M2): _e((4.2, 0.2), None, None, (0.2, 0.1), (15, 0.5)),
    (Network.WIMAX, _DX): _e((4.7, 0.2), (0.5, 0.3), (30, 1), (0.3, 0.1), (15, 0.5)),
    (Network.WIMAX, _WM): _e((4.7, 0.2), None, None, (0.3, 0.1), (15, 0.5)),
}


@dataclass(frozen=True)
class CoefficientTable:
    entries: Mapping[tuple[Network, MediaCodec], CoefficientEntry] = field(
        default_factory=lambda: dict(DEFAULT_COEFFICIENTS))

    def __post_init__(self):
        missing = [(n, c) for n in Network for c in MediaCodec if (n, c) not in self.entries]
        if missing:
            raise ValueError(f"coefficient table lacks {missing}")

    def __getitem__(self, key: tuple[Network, MediaCodec]) -> CoefficientEntry:
        return self.entries[key]

    def override(self, network: Network, codec: MediaCodec, **fields) -> "CoefficientTable":
        entries = dict(self.entries)
        entries[(network, codec)] = replace(entries[(network, codec)], **fields)
        return CoefficientTable(entries)


DEFAULT_TABLE = CoefficientTable()


@dataclass(frozen=True)
class MosPrediction:
    mos: float
    raw: float
    sigma: float
    key_branch: bool


def predict_mos(
    network: Network,
    codec: MediaCodec,
    p: float,
    j: float,
    key_loss: bool,
    table: CoefficientTable = DEFAULT_TABLE,
) -> MosPrediction:
    if not 0.0 <= p <= 100.0:
        raise OutOfRange(f"loss {p}% outside [0, 100]")
    if not j >= 0.0:
        raise OutOfRange(f"jitter {j} s is negative")
    entry = table[(network, codec)]
    alpha, beta = entry.branch(key_loss)
    raw = entry.q_ideal.value - alpha.value * p - beta.value * j
    sigma = math.sqrt(entry.q_ideal.sigma ** 2 + (p * alpha.sigma) ** 2 + (j * beta.sigma) ** 2)
    return MosPrediction(min(max(raw, MOS_MIN), MOS_MAX), raw, sigma, key_loss)


def degradation_split(
    network: Network,
    codec: MediaCodec,
    p: float,
    j: float,
    key_loss: bool,
    table: CoefficientTable = DEFAULT_TABLE,
) -> tuple[float, float]:
    """Shares of the MOS drop caused by loss and by jitter."""
    alpha, beta = table[(network, codec)].branch(key_loss)
    from_loss = alpha.value * p
    from_jitter = beta.value * j
    total = from_loss + from_jitter
    if not total > 0:
        raise NoDegradation("nothing to split: alpha*p + beta*j is zero")
    return from_loss / total, from_jitter / total


def degradation(
    network: Network,
    codec: MediaCodec,
    p: float,
    j: float,
    key_loss: bool,
    table: CoefficientTable = DEFAULT_TABLE,
) -> float:
    """Drop in clamped MOS from the unimpaired stream to the measured one."""
    entry = table[(network, codec)]
    ideal = min(max(entry.q_ideal.value, MOS_MIN), MOS_MAX)
    if p == 0 and j == 0:
        return 0.0
    return ideal - predict_mos(network, codec, p, j, key_loss, table).mos


class Gap(enum.IntEnum):
    GOOD = 0
    ACCEPTABLE = 1
    POOR = 2


@dataclass(frozen=True)
class GapThresholds:
    loss_good_max: float = 0.5
    loss_acceptable_max: float = 5.0
    jitter_good_max: float = 0.015
    jitter_acceptable_max: float = 0.040

    def __post_init__(self):
        if not (self.loss_good_max < self.loss_acceptable_max
                and self.jitter_good_max < self.jitter_acceptable_max):
            raise ValueError("each good threshold must be below its acceptable threshold")


def _band(x: float, good: float, acceptable: float) -> Gap:
    if x <= good:
        return Gap.GOOD
    if x <= acceptable:
        return Gap.ACCEPTABLE
    return Gap.POOR


def gap_classify(p: float, j: float, t: GapThresholds = GapThresholds()) -> tuple[Gap, Gap, Gap]:
    """(loss rating, jitter rating, overall); overall is the worse of the two."""
    loss = _band(p, t.loss_good_max, t.loss_acceptable_max)
    jitter = _band(j, t.jitter_good_max, t.jitter_acceptable_max)
    return loss, jitter, max(loss, jitter)
