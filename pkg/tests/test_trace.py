import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fogsim.trace import (EmptyTrace, EmptyTraceSet, InvalidParameter, MalformedLine, UtilizationTrace,
                          assign_traces, load_trace_dir, parse_trace, sample_utilization, serialize_trace,
                          synth_trace, synth_trace_set)
from oracles import binomial_tail_at_least, full_coverage_probability


def test_parse_scales_percentages():
    tr = parse_trace("0\n50\n100")
    assert list(tr.samples) == [0.0, 0.5, 1.0]
    assert tr.sample_interval_s == 300.0


def test_parse_constant():
    assert list(parse_trace("30\n30\n30").samples) == [0.3, 0.3, 0.3]


@pytest.mark.parametrize("text,line", [("150", 1), ("10\n-1", 2), ("10\n\n4.5", 3), ("abc", 1)])
def test_parse_rejects(text, line):
    with pytest.raises(MalformedLine) as exc:
        parse_trace(text)
    assert exc.value.line_no == line


def test_parse_empty():
    with pytest.raises(EmptyTrace):
        parse_trace("\n \n")


def test_trace_rejects_bad_samples():
    with pytest.raises(InvalidParameter):
        UtilizationTrace(0, np.array([0.2, 1.2]))
    with pytest.raises(InvalidParameter):
        UtilizationTrace(0, np.array([0.2]), 0.0)


@pytest.mark.parametrize("t,expected", [(0.0, 0.2), (299.9, 0.2), (300.0, 0.8), (600.0, 0.2), (1199.0, 0.8)])
def test_sample_zero_order_hold(t, expected):
    tr = UtilizationTrace(0, np.array([0.2, 0.8]), 300.0)
    assert sample_utilization(tr, t) == expected


@given(st.lists(st.integers(0, 100), min_size=1, max_size=50))
def test_serialize_roundtrip(values):
    text = "".join(f"{v}\n" for v in values)
    tr = parse_trace(text)
    assert serialize_trace(tr) == text
    assert np.array_equal(parse_trace(serialize_trace(tr)).samples, tr.samples)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.floats(0, 1e6), st.integers(1, 5))
def test_sample_periodic(samples, t, wraps):
    tr = UtilizationTrace(0, np.array(samples), 300.0)
    k = math.floor(t / 300.0)
    shifted = (k + wraps * len(samples)) * 300.0
    assert sample_utilization(tr, shifted) == sample_utilization(tr, k * 300.0)
    assert sample_utilization(tr, t) in tr.samples


def test_assign_single():
    tr = [UtilizationTrace(0, np.array([0.5]))]
    assert assign_traces([0], tr, 123) == {0: 0}


def test_assign_deterministic():
    trs = [UtilizationTrace(i, np.array([0.1 * (i + 1)])) for i in range(2)]
    assert assign_traces(range(4), trs, 42) == assign_traces(range(4), trs, 42)


def test_assign_empty():
    with pytest.raises(EmptyTraceSet):
        assign_traces([0], [], 1)


def test_assign_coverage_against_multinomial_oracle():
    trs = [UtilizationTrace(i, np.array([0.5])) for i in range(10)]
    covered = sum(len(set(assign_traces(range(100), trs, s).values())) == 10 for s in range(100))
    p = full_coverage_probability(100, 10)
    # oracle: the >=95 bar is essentially certain for a uniform assignment
    assert p > 0.999
    assert binomial_tail_at_least(100, p, 95) > 1 - 1e-9
    assert covered >= 95


def test_coverage_oracle_small_cases():
    assert full_coverage_probability(1, 1) == 1.0
    assert full_coverage_probability(1, 2) == 0.0
    assert full_coverage_probability(2, 2) == 0.5
    assert math.isclose(full_coverage_probability(3, 2), 0.75)


def test_synth_zero_jitter():
    assert list(synth_trace(5, 5, 0.4, 0.0).samples) == [0.4] * 5


def test_synth_clamped():
    tr = synth_trace(3, 500, 1.0, 0.5)
    assert tr.samples.max() <= 1.0 and tr.samples.min() >= 0.5


def test_synth_deterministic():
    assert np.array_equal(synth_trace(7, 50, 0.3, 0.1).samples, synth_trace(7, 50, 0.3, 0.1).samples)


@pytest.mark.parametrize("kw", [dict(length=0), dict(mean=1.5), dict(jitter=-0.1)])
def test_synth_invalid(kw):
    args = dict(seed=1, length=5, mean=0.5, jitter=0.1)
    args.update(kw)
    with pytest.raises(InvalidParameter):
        synth_trace(**args)


@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 2))
def test_synth_samples_in_unit_interval(seed, mean, jitter):
    s = synth_trace(seed, 30, mean, jitter).samples
    assert s.min() >= 0.0 and s.max() <= 1.0


def test_synth_set_ids_and_means():
    trs = synth_trace_set(0, 8, 288, 0.05, 0.5, 0.0)
    assert [t.trace_id for t in trs] == list(range(8))
    assert all(0.05 <= t.samples[0] <= 0.5 for t in trs)


def test_load_trace_dir(tmp_path):
    (tmp_path / "b").write_text("10\n20\n")
    (tmp_path / "a").write_text("90\n")
    (tmp_path / ".hidden").write_text("x\n")
    trs = load_trace_dir(tmp_path)
    assert [list(t.samples) for t in trs] == [[0.9], [0.1, 0.2]]
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(EmptyTraceSet):
        load_trace_dir(empty)
