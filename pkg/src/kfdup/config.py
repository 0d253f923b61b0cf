"""Key-value configuration files for channel profiles, streams and model tables.

Files are INI-style and must start with a ``[kfdup]`` section carrying
``version = 1``. Every other section is optional::

    [kfdup]
    version = 1

    [profile]
    base = wifi              ; start from a preset, then override fields
    target_loss = 0.08       ; re-solve the burst chain for this loss
    jitter_std = 0.025

    [stream]
    duration = 20

    [gap]
    loss_good_max = 1.0

    [coefficients wimax mpeg2]
    alpha_key = 0.4 +- 0.1
    beta_key = 20 +- 1

Measured values are written ``value +- sigma`` (or a bare value with zero
uncertainty); ``absent`` marks a missing coefficient.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .keyframe import MediaCodec
from .netem import Bernoulli, ChannelProfile, DelayModel, GilbertElliott, PRESETS
from .pipeline import StreamSpec
from .quality import DEFAULT_TABLE, CoefficientTable, GapThresholds, Measured, Network

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    profile: ChannelProfile | None = None
    stream: dict | None = None
    thresholds: GapThresholds | None = None
    table: CoefficientTable | None = None


def _measured(text: str) -> Measured | None:
    text = text.strip()
    if text.lower() == "absent":
        return None
    value, _, sigma = text.partition("+-")
    try:
        return Measured(float(value), float(sigma) if sigma.strip() else 0.0)
    except ValueError:
        raise ConfigError(f"cannot read measured value {text!r}") from None


def _format_measured(m: Measured | None) -> str:
    return "absent" if m is None else f"{m.value!r} +- {m.sigma!r}"


_PROFILE_FLOATS = ("capacity", "load_exponent", "reference_rate")
_DELAY_FLOATS = ("base_delay", "jitter_std")
_GE_FIELDS = ("p_good_to_bad", "p_bad_to_good", "loss_in_good", "loss_in_bad")


def _profile(sec: configparser.SectionProxy) -> ChannelProfile:
    base_name = sec.get("base", "lossless")
    if base_name not in PRESETS:
        raise ConfigError(f"unknown base profile {base_name!r}")
    prof = PRESETS[base_name]
    loss = prof.loss
    kind = sec.get("loss_model")
    if kind is not None:
        kind = kind.strip().lower().replace("_", "-")
        if kind == "bernoulli":
            loss = Bernoulli(loss.stationary_loss)
        elif kind == "gilbert-elliott":
            loss = loss if isinstance(loss, GilbertElliott) else GilbertElliott.for_target_loss(
                max(loss.stationary_loss, 1e-6))
        else:
            raise ConfigError(f"unknown loss_model {kind!r}")
    if "p_loss" in sec:
        if not isinstance(loss, Bernoulli):
            raise ConfigError("p_loss applies to the bernoulli loss model")
        loss = Bernoulli(sec.getfloat("p_loss"))
    ge = {k: sec.getfloat(k) for k in _GE_FIELDS if k in sec}
    if ge:
        if not isinstance(loss, GilbertElliott):
            raise ConfigError("chain parameters apply to the gilbert-elliott loss model")
        loss = replace(loss, **ge)
    if "target_loss" in sec:
        loss = loss.with_stationary_loss(sec.getfloat("target_loss"))
    delay = replace(prof.delay, **{k: sec.getfloat(k) for k in _DELAY_FLOATS if k in sec})
    kw = {k: sec.getfloat(k) for k in _PROFILE_FLOATS if k in sec}
    if "load_inflation" in sec:
        kw["load_inflation"] = sec.getboolean("load_inflation")
    if "seed" in sec:
        kw["seed"] = sec.getint("seed")
    return replace(prof, name=sec.get("name", prof.name), loss=loss, delay=delay, **kw)


def _stream(sec: configparser.SectionProxy) -> dict:
    types = {f.name: f.type for f in fields(StreamSpec)}
    out = {}
    for key, raw in sec.items():
        if key not in types:
            raise ConfigError(f"unknown stream field {key!r}")
        if key == "codec":
            out[key] = MediaCodec.from_name(raw)
        elif types[key] in ("int", int):
            out[key] = int(raw, 0)
        else:
            out[key] = float(raw)
    return out


def _coefficients(parser: configparser.ConfigParser) -> CoefficientTable | None:
    table = None
    for name in parser.sections():
        parts = name.split()
        if parts[0] != "coefficients":
            continue
        if len(parts) != 3:
            raise ConfigError(f"section [{name}] needs a network and a codec")
        network, codec = Network.from_name(parts[1]), MediaCodec.from_name(parts[2])
        known = {"q_ideal", "alpha_key", "beta_key", "alpha_nokey", "beta_nokey"}
        sec = parser[name]
        bad = set(sec) - known
        if bad:
            raise ConfigError(f"unknown coefficient(s) {sorted(bad)} in [{name}]")
        updates = {k: _measured(v) for k, v in sec.items()}
        if updates.get("q_ideal", 0) is None:
            raise ConfigError("q_ideal cannot be absent")
        table = (table or DEFAULT_TABLE).override(network, codec, **updates)
    return table


def load_config(path: str | Path) -> Config:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if not parser.has_section("kfdup") or parser["kfdup"].get("version") != str(CONFIG_VERSION):
        raise ConfigError(f"config must begin with [kfdup] version = {CONFIG_VERSION}")
    known = {"kfdup", "profile", "stream", "gap"}
    for name in parser.sections():
        if name not in known and not name.startswith("coefficients"):
            raise ConfigError(f"unknown section [{name}]")
    try:
        return Config(
            profile=_profile(parser["profile"]) if parser.has_section("profile") else None,
            stream=_stream(parser["stream"]) if parser.has_section("stream") else None,
            thresholds=GapThresholds(**{k: float(v) for k, v in parser["gap"].items()})
            if parser.has_section("gap") else None,
            table=_coefficients(parser),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def dump_coefficients(table: CoefficientTable = DEFAULT_TABLE) -> str:
    """Every table entry as a loadable config file."""
    lines = ["[kfdup]", f"version = {CONFIG_VERSION}", ""]
    for network in Network:
        for codec in MediaCodec:
            e = table[(network, codec)]
            lines.append(f"[coefficients {network.value} {codec.value}]")
            for name in ("q_ideal", "alpha_key", "beta_key", "alpha_nokey", "beta_nokey"):
                lines.append(f"{name} = {_format_measured(getattr(e, name))}")
            lines.append("")
    return "\n".join(lines)
