import csv
import json

import pytest

from mpqsim import cli
from mpqsim.core import ConfigError, SpaceMode
from mpqsim.harness import (
    compare_modes,
    export_range_count_cdf,
    export_report,
    load_report,
    parse_config_file,
    run_scenario,
    sweep_default_limits,
)
from mpqsim.netsim import LinkModel
from mpqsim.scenario import MetricsReport, ScenarioConfig

CONFIG_TEXT = """\
[scenario]
mode = spns
scheduler = minrtt
cc = cubic
transfer_bytes = 200000
seed = 5
duration_cap_s = 30

[receiver]
ack_eliciting_threshold = 2
max_ack_delay_ms = 25
suppression = false
default_limit = 4
maximum_limit = 64

[path.0]
rate_mbps = 40
delay_down_ms = 15
delay_up_ms = 15
loss_rate = 0
queue_packets = 64

[path.1]
rate_mbps = 15
delay_down_ms = 60
delay_up_ms = 60
loss_rate = 0
queue_packets = 64
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "scenario.ini"
    path.write_text(CONFIG_TEXT)
    return path


def small_config(mode=SpaceMode.SPNS, transfer=200_000, seed=5):
    paths = [
        LinkModel(delay_down_ms=15, delay_up_ms=15, rate_mbps=40),
        LinkModel(delay_down_ms=60, delay_up_ms=60, rate_mbps=15),
    ]
    return ScenarioConfig(mode=mode, paths=paths, transfer_size=transfer, seed=seed)


# -- config parsing ------------------------------------------------------------


def test_parse_config_file(config_file):
    config = parse_config_file(config_file)
    assert config.mode is SpaceMode.SPNS
    assert config.transfer_size == 200_000
    assert config.seed == 5
    assert len(config.paths) == 2
    assert config.paths[1].rate_mbps == 15
    assert config.recv.max_ack_delay == 25_000


def test_parse_rejects_unknown_mode(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text(CONFIG_TEXT.replace("mode = spns", "mode = qqq"))
    with pytest.raises(ConfigError):
        parse_config_file(path)


def test_parse_rejects_missing_paths(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[scenario]\nmode = spns\ntransfer_bytes = 10\n")
    with pytest.raises(ConfigError):
        parse_config_file(path)


def test_parse_rejects_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config_file(tmp_path / "nope.ini")


def test_parse_trace_path(tmp_path):
    trace = tmp_path / "cell.trace"
    trace.write_text("0\n1\n2\n")
    text = CONFIG_TEXT.replace("rate_mbps = 15\n", "trace = cell.trace\n")
    path = tmp_path / "scenario.ini"
    path.write_text(text)
    config = parse_config_file(path)
    assert config.paths[1].trace is not None
    assert config.paths[1].rate_mbps is None


def test_validation_errors_are_config_errors():
    config = small_config()
    config.transfer_size = 0
    with pytest.raises(ConfigError):
        run_scenario(config)


# -- comparisons and sweeps -------------------------------------------------------


def test_compare_modes_uses_same_seed_and_signs_deltas():
    comparison = compare_modes(small_config())
    assert comparison.spns.seed == comparison.mpns.seed
    expected = (
        (comparison.spns.goodput_kBps - comparison.mpns.goodput_kBps)
        / comparison.mpns.goodput_kBps
        * 100
    )
    assert comparison.speed_delta_pct == pytest.approx(expected)
    assert comparison.ack_size_delta_pct > 0  # shared space always inflates ACKs


def test_sweep_runs_each_limit():
    results = sweep_default_limits(small_config(), [2, 8])
    assert [limit for limit, _ in results] == [2, 8]
    for limit, report in results:
        assert report.complete
        assert max(report.ack_range_count_histogram) <= 64


# -- export ----------------------------------------------------------------------


def test_json_roundtrip_is_identity(tmp_path):
    report = run_scenario(small_config())
    out = tmp_path / "report.json"
    export_report(report, "json", out)
    assert load_report(out) == report


def test_csv_export_is_tidy(tmp_path):
    report = run_scenario(small_config())
    out = tmp_path / "report.csv"
    export_report(report, "csv", out)
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["series", "key", "value"]
    series = {row[0] for row in rows[1:]}
    assert {"goodput_kBps", "hole_count", "srtt_ms_path0"} <= series


def test_cdf_export(tmp_path):
    report = run_scenario(small_config())
    out = tmp_path / "cdf.csv"
    export_range_count_cdf(report, out)
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["range_count", "cumulative_fraction"]
    assert float(rows[-1][1]) == pytest.approx(1.0)


def test_cdf_export_empty_histogram_is_header_only(tmp_path):
    report = run_scenario(small_config())
    report.ack_range_count_histogram = {}
    out = tmp_path / "cdf.csv"
    export_range_count_cdf(report, out)
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows == [["range_count", "cumulative_fraction"]]


def test_unknown_format_rejected(tmp_path):
    report = run_scenario(small_config())
    with pytest.raises(ValueError):
        export_report(report, "xml", tmp_path / "r.xml")


# -- CLI ----------------------------------------------------------------------


def test_cli_run_ok(config_file, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = cli.main(["run", "--config", str(config_file), "--out", str(out)])
    assert code == 0
    assert "goodput" in capsys.readouterr().out
    assert json.loads(out.read_text())["complete"] is True


def test_cli_run_mode_and_seed_override(config_file, tmp_path):
    out = tmp_path / "report.json"
    code = cli.main(
        ["run", "--config", str(config_file), "--mode", "mpns", "--seed", "9", "--out", str(out)]
    )
    assert code == 0
    data = json.loads(out.read_text())
    assert data["mode"] == "mpns"
    assert data["seed"] == 9


def test_cli_run_config_error_exits_2(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nmode = nope\ntransfer_bytes = 1\n")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.ini")]) == 2


def test_cli_run_incomplete_exits_3(config_file, tmp_path):
    text = CONFIG_TEXT.replace("transfer_bytes = 200000", "transfer_bytes = 80000000")
    text = text.replace("duration_cap_s = 30", "duration_cap_s = 0.2")
    slow = tmp_path / "slow.ini"
    slow.write_text(text)
    assert cli.main(["run", "--config", str(slow)]) == 3


def test_cli_compare_with_sweep(config_file, tmp_path, capsys):
    out = tmp_path / "cmp.json"
    code = cli.main(
        ["compare", "--config", str(config_file), "--sweep-default-limit", "2,64", "--out", str(out)]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "MPNS" in stdout and "SPNS" in stdout and "Rate" in stdout
    data = json.loads(out.read_text())
    assert {entry["default_limit"] for entry in data["sweep"]} == {2, 64}
    assert "speed_delta_pct" in data


def test_report_from_dict_restores_types():
    report = run_scenario(small_config(transfer=100_000))
    clone = MetricsReport.from_dict(json.loads(json.dumps(report.to_dict())))
    assert clone == report
    assert isinstance(next(iter(clone.ack_range_count_histogram)), int)
