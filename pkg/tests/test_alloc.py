import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from fogsim.alloc import (AllocParams, AllocationDecision, FleetView, ModelSet, NoDevices, Scores, allocate,
                          baseline_power_min, decisions_from_csv, decisions_to_csv, score_all, select_deadline,
                          select_energy, select_hybrid)
from fogsim.domain import ApplicationRequest, Policy
from fogsim.regression import RegressionModel, Schema
from oracles import argmin_lowest_id

# ETP = resptime column, EEC = mobility column: lets a test dictate both scores.
EXEC = RegressionModel(Schema.EXEC_TIME_FULL, 0.0, (0.0, 0.0, 0.0, 1.0, 0.0, 0.0))
ENER = RegressionModel(Schema.ENERGY_FULL, 0.0, (0.0, 1.0, 0.0, 0.0, 0.0, 0.0))
MODELS = ModelSet(EXEC, ENER)


def view(etp, eec=None, remaining=None, ids=None, cpu=None):
    n = len(etp)
    rows = []
    for i in range(n):
        rows.append(dict(device_id=ids[i] if ids else i, resptime_s=etp[i],
                         mobility_m=(eec or etp)[i], cpu_util=(cpu or [0.0] * n)[i],
                         remaining_j=(remaining or [math.inf] * n)[i]))
    return FleetView.from_rows(rows, time_s=7.0)


def app(req=Policy.DEADLINE_AWARE):
    return ApplicationRequest(3, 0.0, (), 5.0, req)


def test_fleet_view_shape_checked():
    with pytest.raises(ValueError):
        FleetView(np.arange(2), *(np.zeros(2),) * 5, np.zeros(3), np.zeros(2, bool), np.ones(2), np.ones(2))


def test_score_single_device():
    s = score_all(view([2.0]), app(), MODELS)
    assert len(s) == 1 and s.etp[0] == 2.0 and s.eec[0] == 2.0


def test_score_identical_devices():
    v = FleetView.from_rows([dict(device_id=i, cpu_util=0.3, mobility_m=9.0, netcomm_s=0.5, resptime_s=1.0,
                                  energy_usage_j=2.0, remaining_j=500.0) for i in range(3)])
    s = score_all(v, app(), ModelSet(RegressionModel(Schema.EXEC_TIME_FULL, 0.1, (1, 2, 3, 4, 5, 6)),
                                     RegressionModel(Schema.ENERGY_FULL, 0.2, (6, 5, 4, 3, 2, 1))))
    assert len(set(s.etp)) == 1 and len(set(s.eec)) == 1


def test_score_affine_oracle():
    beta = (0.5, 0.01, 2.0, 0.9, 0.3, 0.05)
    gamma = (1.5, 0.02, 0.7, 0.1, 0.4, 1.1)
    models = ModelSet(RegressionModel(Schema.EXEC_TIME_FULL, 0.2, beta),
                      RegressionModel(Schema.ENERGY_FULL, 0.1, gamma))
    rows = [dict(device_id=0, cpu_util=0.4, mobility_m=20.0, netcomm_s=0.5, resptime_s=1.0, energy_usage_j=3.0),
            dict(device_id=1, cpu_util=0.1, mobility_m=35.0, netcomm_s=0.7, resptime_s=0.0, energy_usage_j=1.0)]
    s = score_all(FleetView.from_rows(rows), app(), models)
    for r, etp, eec in zip(rows, s.etp, s.eec):
        x = [r["cpu_util"], r["mobility_m"], r["netcomm_s"], r["resptime_s"]]
        want_etp = 0.2 + sum(b * v for b, v in zip(beta, x + [1, r["energy_usage_j"]]))
        want_eec = 0.1 + sum(g * v for g, v in zip(gamma, x + [1, want_etp]))
        assert math.isclose(etp, want_etp, rel_tol=1e-12)
        assert math.isclose(eec, want_eec, rel_tol=1e-12)


def test_score_empty():
    with pytest.raises(NoDevices):
        score_all(view([]), app(), MODELS)


def test_select_deadline():
    assert select_deadline(Scores([0, 1, 2], [5.0, 3.0, 7.0], [0, 0, 0])) == 1
    assert select_deadline(Scores([4, 9], [3.0, 3.0], [0, 0])) == 4


def test_select_energy():
    assert select_energy(Scores([0, 1, 2], [0, 0, 0], [10.0, 2.0, 8.0])) == 1
    assert select_energy(Scores([5], [1.0], [1.0])) == 5
    assert select_energy(Scores([7, 2, 5], [0, 0, 0], [4.0, 4.0, 4.0])) == 2


def test_select_empty():
    empty = Scores([], [], [])
    for f in (select_deadline, select_energy, select_hybrid):
        with pytest.raises(NoDevices):
            f(empty)


def test_hybrid_tie_midpoint():
    assert select_hybrid(Scores([0, 1], [1.0, 2.0], [2.0, 1.0]), 0.5) == 0


def test_hybrid_weight_range():
    with pytest.raises(ValueError):
        select_hybrid(Scores([0], [1.0], [1.0]), 1.5)


scores_st = st.integers(1, 12).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 999), min_size=n, max_size=n, unique=True),
    st.lists(st.floats(0.001, 1e4), min_size=n, max_size=n),
    st.lists(st.floats(0.001, 1e4), min_size=n, max_size=n)))


@given(scores_st)
def test_hybrid_endpoints(data):
    ids, etp, eec = data
    s = Scores(ids, etp, eec)
    assert select_hybrid(s, 1.0) == select_deadline(s) == argmin_lowest_id(ids, etp)
    assert select_hybrid(s, 0.0) == select_energy(s) == argmin_lowest_id(ids, eec)


@given(scores_st, st.floats(0.1, 100))
def test_argmin_invariant_under_monotone_transform(data, k):
    ids, etp, eec = data
    f_etp = [math.log(v) * k for v in etp]
    f_eec = [v ** 3 for v in eec]
    for raw, mapped in ((etp, f_etp), (eec, f_eec)):
        # keep only draws where float rounding left the map strictly increasing
        assume(all((a < b) == (fa < fb) and (a == b) == (fa == fb)
                   for a, fa in zip(raw, mapped) for b, fb in zip(raw, mapped)))
    s = Scores(ids, etp, eec)
    t = Scores(ids, f_etp, f_eec)
    assert select_deadline(s) == select_deadline(t)
    assert select_energy(s) == select_energy(t)


def test_allocate_deadline():
    d = allocate(view([5.0, 3.0, 7.0]), app(), MODELS)
    assert (d.chosen_device_id, d.predicted_exec_s, d.policy) == (1, 3.0, Policy.DEADLINE_AWARE)
    assert d.decided_at_s == 7.0 and not d.filtered_fallback


def test_allocate_dispatch_by_requirement():
    v = view([5.0, 3.0, 7.0], eec=[1.0, 9.0, 4.0])
    assert allocate(v, app(Policy.ENERGY_AWARE), MODELS).chosen_device_id == 0
    assert allocate(v, app(Policy.HYBRID), MODELS).chosen_device_id == 0


def test_allocate_unknown_requirement():
    d = allocate(view([1.0]), app("Fastest"), MODELS)
    assert d == AllocationDecision(3, None, None, decided_at_s=7.0)


def test_allocate_empty():
    with pytest.raises(NoDevices):
        allocate(view([]), app(), MODELS)


def test_allocate_filters_unpowered():
    # need = ETP * 5 W * 1.2; only device 2 can cover its run
    v = view([1.0, 2.0, 9.0], eec=[1.0, 1.0, 50.0], remaining=[5.0, 11.0, 100.0])
    for req in (Policy.DEADLINE_AWARE, Policy.ENERGY_AWARE, Policy.HYBRID):
        d = allocate(v, app(req), MODELS)
        assert d.chosen_device_id == 2 and not d.filtered_fallback


def test_allocate_fallback_when_none_powered():
    d = allocate(view([1.0, 2.0], remaining=[0.0, 0.0]), app(), MODELS)
    assert d.chosen_device_id == 0 and d.filtered_fallback


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(0, 1000)), min_size=1, max_size=10),
       st.sampled_from([Policy.DEADLINE_AWARE, Policy.ENERGY_AWARE, Policy.HYBRID]))
def test_allocate_chooses_member(rows, req):
    ids = [10 + 3 * i for i in range(len(rows))]
    v = view([r[0] for r in rows], eec=[r[1] for r in rows], remaining=[r[2] for r in rows], ids=ids)
    assert allocate(v, app(req), MODELS).chosen_device_id in ids


def test_baseline_examples():
    assert baseline_power_min(view([0, 0], cpu=[0.9, 0.1]), app()).chosen_device_id == 1
    assert baseline_power_min(view([0], ids=[6]), app()).chosen_device_id == 6
    d = baseline_power_min(view([0, 0, 0], cpu=[0.5] * 3, ids=[8, 3, 5]), app())
    assert d.chosen_device_id == 3 and d.policy is Policy.BASELINE_POWER_MIN
    with pytest.raises(NoDevices):
        baseline_power_min(view([]), app())


def test_params_validation():
    with pytest.raises(ValueError):
        AllocParams(hybrid_weight=-0.1)


def test_model_set_schema_checks():
    with pytest.raises(ValueError):
        ModelSet(ENER, ENER)
    with pytest.raises(ValueError):
        ModelSet(EXEC, EXEC)


def test_decision_log_roundtrip():
    ds = [AllocationDecision(1, 4, Policy.HYBRID, 0.1 + 0.2, 3.5, 12.25, True),
          AllocationDecision(2, None, None, decided_at_s=13.0),
          AllocationDecision(3, 0, Policy.BASELINE_POWER_MIN, decided_at_s=14.0)]
    back = decisions_from_csv(decisions_to_csv(ds))
    assert back[0] == ds[0] and back[2].chosen_device_id == 0
    assert back[1].chosen_device_id is None and math.isnan(back[1].predicted_exec_s)
