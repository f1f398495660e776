import pytest
from hypothesis import given, strategies as st

from fogsim.config import (TRACE_DIR_ENV, OutOfRange, ParseError, ScenarioConfig, UnknownKey, dump_config,
                           load_config, parse_config)
from fogsim.domain import Policy


def test_empty_gives_table_defaults():
    c = parse_config("")
    assert (c.device_mips_min, c.device_mips_max) == (2000.0, 6000.0)
    assert (c.task_length_mi, c.subtask_length_mi, c.tasks_per_app) == (3000.0, 500.0, 10)
    assert (c.server_mips, c.server_bandwidth_bps, c.server_ram_mb) == (10_000.0, 1_000_000.0, 302_768.0)
    assert (c.device_bandwidth_bps, c.device_ram_mb, c.data_size_min_b) == (100_000.0, 2048.0, 5120.0)
    assert (c.distance_min_m, c.distance_max_m, c.battery_min, c.battery_max) == (5.0, 40.0, 0.2, 0.9)
    assert (c.cpu_avail_min, c.cpu_avail_max, c.util_var_min, c.util_var_max) == (0.5, 1.3, 0.1, 0.4)
    assert (c.deadline_slack_min, c.deadline_slack_max, c.min_deadline_slack_s) == (0.1, 0.8, 4.0)
    assert c == ScenarioConfig()


def test_single_override():
    c = parse_config("n_apps = 140\n")
    assert c.n_apps == 140 and c.replace(n_apps=280) == ScenarioConfig()


def test_comments_and_lists():
    c = parse_config("# header\nseeds = 3, 4  # two seeds\npolicies = Hybrid,EnergyAware\n\n")
    assert c.seeds == (3, 4)
    assert c.policies == (Policy.HYBRID, Policy.ENERGY_AWARE)


def test_malformed_value():
    with pytest.raises(ParseError) as exc:
        parse_config("n_devices = 5\nn_apps = banana\n")
    assert exc.value.line_no == 2


def test_missing_equals():
    with pytest.raises(ParseError):
        parse_config("n_apps 70")


def test_unknown_key():
    with pytest.raises(UnknownKey) as exc:
        parse_config("n_app = 70")
    assert exc.value.name == "n_app"


@pytest.mark.parametrize("text,key", [("battery_max = 1.5", "battery_max"), ("n_devices = 0", "n_devices"),
                                      ("power_idle_w = 9", "power_idle_w"),
                                      ("device_mips_min = 7000", "device_mips_min")])
def test_out_of_range(text, key):
    with pytest.raises(OutOfRange) as exc:
        parse_config(text)
    assert exc.value.key == key


def test_defaults_roundtrip():
    assert parse_config(dump_config(ScenarioConfig())) == ScenarioConfig()


@given(st.integers(1, 500), st.integers(0, 2000), st.floats(0, 1), st.lists(st.integers(0, 99), min_size=1,
                                                                               max_size=5))
def test_roundtrip_property(n_dev, n_apps, w, seeds):
    c = ScenarioConfig(n_devices=n_dev, n_apps=n_apps, hybrid_weight=w, seeds=tuple(seeds))
    assert parse_config(dump_config(c)) == c


def test_load_config(tmp_path):
    p = tmp_path / "x.cfg"
    p.write_text("n_apps = 70\n", encoding="utf-8")
    assert load_config(p).n_apps == 70
    assert load_config(None) == ScenarioConfig()


def test_trace_dir_env(monkeypatch):
    monkeypatch.setenv(TRACE_DIR_ENV, "/data/planetlab")
    assert ScenarioConfig(trace_dir="/elsewhere").resolved_trace_dir() == "/data/planetlab"
    monkeypatch.delenv(TRACE_DIR_ENV)
    assert ScenarioConfig(trace_dir="/elsewhere").resolved_trace_dir() == "/elsewhere"
