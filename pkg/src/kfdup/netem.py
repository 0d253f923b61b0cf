"""Seeded wireless-channel emulation: loss, delay jitter and load-dependent loss.

Randomness is drawn per stream position so that runs with different
duplication policies share their channel draws when given the same seed.
Each original packet occupies one step of the loss chain and draws its own
loss and delay variates. A verbatim copy (same SSRC and sequence number as a
recent original) takes one side step of the chain from the state of the most
recent original sent before it, using a separate variate stream. Copies are
therefore exposed to the same burst as their neighbours without shifting
the draws seen by later originals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import special

from .rtp import RtpPacket

REFERENCE_RATE = 256_000.0
_RECENT = 1 << 15


class DegenerateChain(ValueError):
    pass


def _fraction(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name}={value} outside [0, 1]")


@dataclass(frozen=True)
class Bernoulli:
    p_loss: float

    def __post_init__(self):
        _fraction("p_loss", self.p_loss)

    @property
    def stationary_loss(self) -> float:
        return self.p_loss

    def with_stationary_loss(self, target: float) -> "Bernoulli":
        return Bernoulli(min(max(target, 0.0), 1.0))

    def mean_loss_run(self) -> float:
        return math.inf if self.p_loss == 1.0 else 1.0 / (1.0 - self.p_loss)


@dataclass(frozen=True)
class GilbertElliott:
    p_good_to_bad: float
    p_bad_to_good: float
    loss_in_good: float = 0.0
    loss_in_bad: float = 0.5

    def __post_init__(self):
        for name in ("p_good_to_bad", "p_bad_to_good", "loss_in_good", "loss_in_bad"):
            _fraction(name, getattr(self, name))

    @property
    def bad_fraction(self) -> float:
        return self.p_good_to_bad / (self.p_good_to_bad + self.p_bad_to_good)

    @property
    def stationary_loss(self) -> float:
        return gilbert_elliott_stationary_loss(self)

    @classmethod
    def for_target_loss(
        cls, target: float, p_bad_to_good: float = 0.25,
        loss_in_good: float = 0.0, loss_in_bad: float = 0.5,
    ) -> "GilbertElliott":
        """Solve the good-to-bad probability that gives ``target`` stationary loss."""
        if not loss_in_good < target < loss_in_bad:
            raise ValueError("target must lie strictly between the two state loss rates")
        p_gb = (target - loss_in_good) * p_bad_to_good / (loss_in_bad - target)
        if p_gb >= 1.0:
            raise ValueError(f"target {target} unreachable with p_bad_to_good={p_bad_to_good}")
        return cls(p_gb, p_bad_to_good, loss_in_good, loss_in_bad)

    def with_stationary_loss(self, target: float) -> "GilbertElliott":
        """Same burst shape, more or fewer bursts; flat loss once bursts cannot reach ``target``."""
        target = min(max(target, 0.0), 1.0)
        if target == self.stationary_loss:
            return self
        try:
            return GilbertElliott.for_target_loss(
                target, self.p_bad_to_good, self.loss_in_good, self.loss_in_bad)
        except ValueError:
            return GilbertElliott(self.p_good_to_bad, self.p_bad_to_good, target, target)

    def mean_loss_run(self) -> float:
        """Expected length of a run of consecutive losses at stationarity."""
        pi_b = self.bad_fraction
        pi = np.array([1.0 - pi_b, pi_b])
        h = np.array([self.loss_in_good, self.loss_in_bad])
        P = np.array([[1 - self.p_good_to_bad, self.p_good_to_bad],
                      [self.p_bad_to_good, 1 - self.p_bad_to_good]])
        run_starts = float((pi * (1 - h)) @ P @ h)
        if run_starts == 0.0:
            return math.inf
        return float(pi @ h) / run_starts


LossModel = Bernoulli | GilbertElliott


def gilbert_elliott_stationary_loss(model: GilbertElliott) -> float:
    for name in ("p_good_to_bad", "p_bad_to_good"):
        v = getattr(model, name)
        if not 0.0 < v < 1.0:
            raise DegenerateChain(f"{name}={v} must lie strictly inside (0, 1)")
    pi_b = model.bad_fraction
    return (1.0 - pi_b) * model.loss_in_good + pi_b * model.loss_in_bad


@dataclass(frozen=True)
class DelayModel:
    base_delay: float = 0.05
    jitter_std: float = 0.0

    def __post_init__(self):
        if self.base_delay < 0 or self.jitter_std < 0:
            raise ValueError("delay parameters must be >= 0")

    def perturbation(self, u: np.ndarray) -> np.ndarray:
        """Gaussian perturbation truncated below at -base_delay, by inverse CDF."""
        if self.jitter_std == 0.0:
            return np.zeros_like(u)
        lo = special.ndtr(-self.base_delay / self.jitter_std)
        z = special.ndtri(lo + u * (1.0 - lo))
        return np.maximum(z * self.jitter_std, -self.base_delay)


@dataclass(frozen=True)
class ChannelProfile:
    name: str
    loss: LossModel = field(default_factory=lambda: Bernoulli(0.0))
    delay: DelayModel = field(default_factory=DelayModel)
    capacity: float = 54e6
    load_exponent: float = 2.0
    seed: int = 0
    reference_rate: float = REFERENCE_RATE
    load_inflation: bool = True

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("capacity must be > 0")
        if self.load_exponent < 1:
            raise ValueError("load_exponent must be >= 1")
        if self.reference_rate <= 0:
            raise ValueError("reference_rate must be > 0")

    def with_seed(self, seed: int) -> "ChannelProfile":
        return replace(self, seed=seed)


def _wifi_loss() -> GilbertElliott:
    return GilbertElliott.for_target_loss(0.06, p_bad_to_good=0.25, loss_in_good=0.0, loss_in_bad=0.5)


PRESETS: dict[str, ChannelProfile] = {
    "lossless": ChannelProfile("lossless", Bernoulli(0.0), DelayModel(0.05, 0.0)),
    "wifi": ChannelProfile("wifi", _wifi_loss(), DelayModel(0.05, 0.020), capacity=54e6),
    "threeg": ChannelProfile("threeg", Bernoulli(0.10), DelayModel(0.10, 0.035), capacity=2e6),
    "wimax_mobile": ChannelProfile("wimax_mobile", Bernoulli(0.002), DelayModel(0.05, 0.015),
                                   capacity=5e6),
    "wimax_strong_signal": ChannelProfile("wimax_strong_signal", Bernoulli(0.002),
                                          DelayModel(0.05, 0.004), capacity=5e6),
    "wimax_weak_signal": ChannelProfile("wimax_weak_signal", Bernoulli(0.002),
                                        DelayModel(0.05, 0.031), capacity=5e5),
}


def preset(name: str, seed: int = 0) -> ChannelProfile:
    try:
        return PRESETS[name].with_seed(seed)
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PRESETS)}") from None


def effective_loss(profile: ChannelProfile, offered_rate: float) -> float:
    """Stationary loss scaled by (offered_rate / reference_rate) ** load_exponent."""
    if offered_rate <= 0:
        raise ValueError("offered_rate must be > 0")
    factor = (offered_rate / profile.reference_rate) ** profile.load_exponent
    return min(max(profile.loss.stationary_loss * factor, 0.0), 1.0)


def loaded_model(profile: ChannelProfile, offered_rate: float | None) -> LossModel:
    if not profile.load_inflation or offered_rate is None:
        return profile.loss
    return profile.loss.with_stationary_loss(effective_loss(profile, offered_rate))


class _Streams:
    """Per-position variates: column 0 chain transition, 1 loss, 2 delay."""

    def __init__(self, seed: int):
        orig, copy, extra = np.random.SeedSequence(seed).spawn(3)
        self._gens = [np.random.default_rng(orig), np.random.default_rng(copy)]
        self._extra = np.random.default_rng(extra)

    def block(self, which: int, n: int) -> np.ndarray:
        return self._gens[which].random((n, 3))

    def extra(self, n: int) -> np.ndarray:
        return self._extra.random((n, 3))


def _step(model: GilbertElliott, bad: bool, u: float) -> bool:
    if bad:
        return u >= model.p_bad_to_good
    return u < model.p_good_to_bad


def loss_pattern(model: LossModel, draws: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Loss decisions and chain states for consecutive chain steps.

    ``draws`` is an (n, 3) array of uniforms as produced by the channel.
    Returns (lost, bad) boolean arrays; ``bad`` is all-False for Bernoulli.
    """
    n = len(draws)
    if isinstance(model, Bernoulli):
        return draws[:, 1] < model.p_loss, np.zeros(n, dtype=bool)
    bad = np.empty(n, dtype=bool)
    trans = draws[:, 0].tolist()
    state = False
    p_gb, p_bg, pi_b = model.p_good_to_bad, model.p_bad_to_good, model.bad_fraction
    for i in range(n):
        if i == 0:
            state = trans[0] < pi_b
        elif state:
            state = trans[i] >= p_bg
        else:
            state = trans[i] < p_gb
        bad[i] = state
    h = np.where(bad, model.loss_in_bad, model.loss_in_good)
    return draws[:, 1] < h, bad


def simulate_losses(profile: ChannelProfile, n: int, offered_rate: float | None = None) -> np.ndarray:
    """Loss indicators for ``n`` back-to-back originals, same draws as ``transmit``."""
    model = loaded_model(profile, offered_rate)
    return loss_pattern(model, _Streams(profile.seed).block(0, n))[0]


def transmit(
    sends: Sequence[tuple[RtpPacket, float]],
    profile: ChannelProfile,
    offered_rate: float | None = None,
) -> list[tuple[RtpPacket, float]]:
    """Push (packet, send_time) pairs through the channel.

    Survivors come back as (packet, arrival_time) sorted by arrival time,
    ties kept in send order. ``offered_rate`` (bits/s) drives load inflation
    when the profile enables it; pass ``None`` to use the base loss model.
    """
    model = loaded_model(profile, offered_rate)
    streams = _Streams(profile.seed)

    # Originals advance the chain. A copy reads the state of the most recent
    # original sent before it and draws from its own original's copy slot.
    last_orig: dict[tuple[int, int], int] = {}
    copies_of: dict[int, int] = {}
    plan = []          # (original position, copy rank, anchor position)
    n_orig = 0
    for pkt, _ in sends:
        key = (pkt.ssrc, pkt.sequence_number)
        pos = last_orig.get(key)
        if pos is not None and n_orig - pos <= _RECENT:
            copies_of[pos] += 1
            plan.append((pos, copies_of[pos], n_orig - 1))
        else:
            last_orig[key] = n_orig
            copies_of[n_orig] = 0
            plan.append((n_orig, 0, n_orig))
            n_orig += 1

    orig_draws = streams.block(0, n_orig)
    first_copy = streams.block(1, n_orig)
    lost_orig, bad_orig = loss_pattern(model, orig_draws)
    extra = streams.extra(sum(1 for _, k, _ in plan if k > 1))

    lost = np.empty(len(plan), dtype=bool)
    u_delay = np.empty(len(plan))
    extra_i = 0
    for i, (pos, k, anchor) in enumerate(plan):
        if k == 0:
            lost[i] = lost_orig[pos]
            u_delay[i] = orig_draws[pos, 2]
            continue
        if k == 1:
            u = first_copy[pos]
        else:
            u = extra[extra_i]
            extra_i += 1
        if isinstance(model, GilbertElliott):
            bad = _step(model, bool(bad_orig[anchor]), u[0])
            lost[i] = u[1] < (model.loss_in_bad if bad else model.loss_in_good)
        else:
            lost[i] = u[1] < model.p_loss
        u_delay[i] = u[2]

    delays = profile.delay.base_delay + profile.delay.perturbation(u_delay)
    out = [
        (t_send + float(delays[i]), i, pkt)
        for i, (pkt, t_send) in enumerate(sends)
        if not lost[i]
    ]
    out.sort(key=lambda r: (r[0], r[1]))
    return [(pkt, t) for t, _, pkt in out]
