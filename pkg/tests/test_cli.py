import json

import pytest

from kfdup.cli import main
from kfdup.config import ConfigError, dump_coefficients, load_config
from kfdup.dup import DupPolicy
from kfdup.keyframe import MediaCodec
from kfdup.netem import GilbertElliott, preset
from kfdup.pipeline import StreamSpec, generate, run_pipeline
from kfdup.quality import DEFAULT_TABLE, Network
from kfdup.rtp import build_udp_ipv4
from kfdup.traces import dump_report, read_trace


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_staged_chain_equals_pipeline(tmp_path, capsys):
    src, sent, dlv = (tmp_path / n for n in ("src.jsonl", "sent.jsonl", "dlv.jsonl"))
    assert run(capsys, "gen", "--duration", 5, "--gen-seed", 4, "-o", src)[0] == 0
    assert run(capsys, "--policy", "all", "send", src, "-o", sent)[0] == 0
    assert run(capsys, "--seed", 6, "--profile", "threeg", "channel", sent, "-o", dlv)[0] == 0
    res = run_pipeline(StreamSpec(duration=5), DupPolicy.ALL, preset("threeg", seed=6), 4)
    assert read_trace(sent) == res.sent
    assert read_trace(dlv) == res.delivered

    code, out, _ = run(capsys, "--profile", "threeg", "analyze", sent, dlv)
    assert code == 0
    report = json.loads(out)
    assert report["stats"] == json.loads(dump_report(res.report))["stats"]


def test_recv_dedups(tmp_path, capsys):
    src, sent, dlv, kept = (tmp_path / n for n in ("s", "t", "d", "k"))
    run(capsys, "gen", "--duration", 2, "-o", src)
    run(capsys, "send", "--policy", "all", src, "-o", sent)
    run(capsys, "--profile", "lossless", "channel", sent, "-o", dlv)
    code, _, err = run(capsys, "recv", dlv, "-o", kept)
    summary = json.loads(err)
    assert code == 0 and summary["duplicate_drops"] == summary["kept"] == len(read_trace(src))
    assert [r.payload for r in read_trace(kept)] == [r.payload for r in read_trace(src)]


def test_detect_trace_and_hex(tmp_path, capsys):
    src = tmp_path / "src.jsonl"
    run(capsys, "--codec", "mpeg2", "gen", "--duration", 2, "-o", src)
    code, out, _ = run(capsys, "--codec", "mpeg2", "detect", src)
    rep = json.loads(out)
    assert code == 0 and rep["matches_truth"] == rep["packets"]

    stream = generate(StreamSpec(codec=MediaCodec.WMV9, duration=1.0), 0)
    hexfile = tmp_path / "dgrams.hex"
    hexfile.write_text("\n".join(build_udp_ipv4(s.packet).hex() for s in stream) + "\n")
    code, out, _ = run(capsys, "--codec", "wmv9", "detect", "--hex", "-v", hexfile)
    rep = json.loads(out)
    assert rep["counts"]["KEY"] == sum(s.truth.name == "KEY" for s in stream)
    assert [r["kind"] for r in rep["labels"]] == [s.truth.name for s in stream]

    hexfile.write_text("4500\n")
    code, _, err = run(capsys, "detect", "--hex", hexfile)
    assert code == 1 and err.startswith("TruncatedHeader: line 1")


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", "--loss", 6, "--jitter", 0.02, "--key-loss")
    rep = json.loads(out)
    assert code == 0 and rep["mos"] == 2.9 and rep["gap"]["overall"] == "POOR"
    assert rep["loss_share"] == pytest.approx(0.833333333333)
    code, _, err = run(capsys, "--codec", "mpeg2", "classify", "--network", "wimax",
                       "--loss", 1, "--jitter", 0, "--key-loss")
    assert code == 1 and err.startswith("CoefficientAbsent")
    code, _, err = run(capsys, "classify", "--loss", 120, "--jitter", 0)
    assert code == 1 and err.startswith("OutOfRange")


def test_errors_are_typed(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"v": 1}\n')
    code, _, err = run(capsys, "analyze", bad, bad)
    assert code == 1 and err.startswith("TraceMalformed: line 1")
    code, _, err = run(capsys, "analyze", tmp_path / "missing", bad)
    assert code == 1 and err.startswith("FileNotFoundError")
    code, _, err = run(capsys, "--codec", "h264", "gen")
    assert code == 1 and err.startswith("ValueError")
    code, _, err = run(capsys, "gen", "--gop-size", 0)
    assert code == 1 and err.startswith("SpecInvalid")
    with pytest.raises(SystemExit):
        main(["nosuch"])


def test_compare_cli_deterministic(tmp_path, capsys):
    args = ["--seed", 2, "compare", "--runs", 2, "--duration", 2]
    a = run(capsys, *args, "--trace-dir", tmp_path / "a")[1]
    b = run(capsys, *args, "--trace-dir", tmp_path / "b")[1]
    assert a == b and json.loads(a)["n_runs"] == 2
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("""
[kfdup]
version = 1

[profile]
base = wifi
name = wifi-busy
target_loss = 0.08
jitter_std = 0.03
load_inflation = no

[stream]
duration = 3
gop_size = 12

[gap]
loss_good_max = 1.0

[coefficients wimax mpeg2]
alpha_key = 0.4 +- 0.1  ; guessed
beta_key = 20
""")
    c = load_config(cfg)
    assert isinstance(c.profile.loss, GilbertElliott)
    assert c.profile.loss.stationary_loss == pytest.approx(0.08)
    assert c.profile.delay.jitter_std == 0.03 and not c.profile.load_inflation
    assert c.stream == {"duration": 3.0, "gop_size": 12}
    assert c.thresholds.loss_good_max == 1.0
    entry = c.table[(Network.WIMAX, MediaCodec.MPEG2)]
    assert entry.alpha_key.value == 0.4 and entry.beta_key.sigma == 0.0

    code, out, _ = run(capsys, "--config", cfg, "--codec", "mpeg2", "classify", "--network", "wimax",
                       "--loss", 0.8, "--jitter", 0, "--key-loss")
    rep = json.loads(out)
    assert code == 0 and rep["mos_raw"] == pytest.approx(4.2 - 0.32)
    assert rep["gap"]["loss"] == "GOOD"


def test_coefficient_dump_round_trips(tmp_path, capsys):
    path = tmp_path / "coef.ini"
    path.write_text(dump_coefficients())
    assert dict(load_config(path).table.entries) == dict(DEFAULT_TABLE.entries)
    code, out, _ = run(capsys, "coefficients")
    assert code == 0 and out == dump_coefficients()


@pytest.mark.parametrize("body", [
    "[profile]\nbase = wifi\n",
    "[kfdup]\nversion = 2\n",
    "[kfdup]\nversion = 1\n[bogus]\n",
    "[kfdup]\nversion = 1\n[profile]\nbase = mars\n",
    "[kfdup]\nversion = 1\n[profile]\nbase = wifi\np_loss = 0.1\n",
    "[kfdup]\nversion = 1\n[stream]\ncolour = red\n",
    "[kfdup]\nversion = 1\n[coefficients wifi]\n",
    "[kfdup]\nversion = 1\n[coefficients wifi divx]\nq_ideal = absent\n",
    "[kfdup]\nversion = 1\n[coefficients wifi divx]\nalpha_key = lots\n",
    "[kfdup]\nversion = 1\n[gap]\nloss_good_max = 9\n",
    "not an ini file",
])
def test_config_errors(tmp_path, body):
    path = tmp_path / "c.ini"
    path.write_text(body)
    with pytest.raises(ConfigError):
        load_config(path)
