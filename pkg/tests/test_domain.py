import math

import pytest

from fogsim.domain import (ApplicationRequest, FogDevice, FogServer, Policy, Task, TelemetryRecord,
                           validate_device, validate_server)


def dev(**kw):
    base = dict(id=0, mips_capacity=4000.0, distance_m=20.0, battery_pct=0.5)
    base.update(kw)
    return FogDevice(**base)


def test_valid_device_ok():
    res = validate_device(dev())
    assert res.ok and not res.violations


def test_battery_out_of_range():
    res = validate_device(dev(battery_pct=0.95))
    assert not res.ok
    assert "battery initial range" in res.violations


def test_power_ordering():
    res = validate_device(dev(power_idle_w=100.0, power_max_w=50.0))
    assert "power ordering" in res.violations


@pytest.mark.parametrize("field,value,name", [
    ("mips_capacity", 1999.0, "mips range"),
    ("mips_capacity", 6001.0, "mips range"),
    ("distance_m", 41.0, "distance range"),
    ("distance_m", 4.0, "distance range"),
    ("battery_pct", 0.1, "battery initial range"),
])
def test_table_ranges(field, value, name):
    assert name in validate_device(dev(**{field: value})).violations


def test_server_defaults():
    srv = FogServer(id=3)
    assert (srv.mips_capacity, srv.bandwidth_bps, srv.ram_mb) == (10_000.0, 1_000_000.0, 302_768.0)
    assert srv.mains_powered and math.isinf(srv.remaining_j)
    assert validate_server(srv).ok


def test_remaining_energy_in_joules():
    d = dev(battery_pct=0.25, battery_capacity_j=1000.0)
    assert d.remaining_j == 250.0
    assert not d.depleted


def test_task_split_default_shape():
    t = Task.split(0, 3000.0, 500.0, 5120.0)
    assert t.subtasks == (500.0,) * 6
    assert math.fsum(t.subtasks) == t.length_mi


def test_task_split_remainder_and_zero():
    assert Task.split(0, 1200.0, 500.0, 1.0).subtasks == (500.0, 500.0, 200.0)
    assert Task.split(0, 0.0, 500.0, 1.0).subtasks == ()


def test_agreed_response():
    app = ApplicationRequest(0, 10.0, (), 14.5)
    assert app.agreed_response_s == 4.5


def test_policy_parse():
    assert Policy.parse("energyaware") is Policy.ENERGY_AWARE
    assert Policy.parse(" Hybrid ") is Policy.HYBRID
    with pytest.raises(ValueError):
        Policy.parse("fastest")


def test_telemetry_validity():
    good = TelemetryRecord(0, 0.5, 10.0, 0.4, 0.0, 1, 2.0, 1.0, 3.0)
    assert good.is_valid()
    assert not TelemetryRecord(0, 1.5, 10.0, 0.4, 0.0, 1, 2.0, 1.0, 3.0).is_valid()
    assert not TelemetryRecord(0, 0.5, 10.0, 0.4, 0.0, 2, 2.0, 1.0, 3.0).is_valid()
    assert not TelemetryRecord(0, 0.5, 10.0, math.nan, 0.0, 1, 2.0, 1.0, 3.0).is_valid()
