import numpy as np
import pytest
from hypothesis import given, strategies as st

from idnc_d2d.metrics import (
    DeviceMetrics,
    RoundView,
    anticipated_completion,
    critical_set,
    initial_metrics,
    layer_index,
    record_round,
)
from idnc_d2d.net_model import ModelError, NetworkState, Transmission, TransmissionPlan


def plan(*entries):
    return TransmissionPlan(tuple(Transmission(a, frozenset(f)) for a, f in entries))


def test_anticipated_examples():
    assert anticipated_completion(DeviceMetrics(5), 0.0) == 5
    assert anticipated_completion(DeviceMetrics(5, 2), 0.0) == 7
    assert anticipated_completion(DeviceMetrics(5, 2), 0.08) == pytest.approx(6.92 / 0.92)
    assert anticipated_completion(DeviceMetrics(5, 2), 0.08) == pytest.approx(7.5217, abs=1e-4)
    with pytest.raises(ModelError):
        anticipated_completion(DeviceMetrics(1), 1.0)


def test_layer_examples():
    assert layer_index(DeviceMetrics(5), 0.0, 5.0) == 1
    assert layer_index(DeviceMetrics(1), 0.0, 5.0) == 5
    # 2.5 steps below the maximum
    eps = 0.2
    m = DeviceMetrics(3)
    top = anticipated_completion(m, eps) + 2.5 / (1 - eps)
    assert layer_index(m, eps, top) == 3


@given(st.integers(1, 30), st.integers(0, 10), st.floats(0, 0.9), st.floats(0, 60))
def test_layer_bracket(demand, delay, eps, top):
    m = DeviceMetrics(demand, delay)
    t = anticipated_completion(m, eps)
    n = layer_index(m, eps, top)
    assert n >= 1
    assert t + n / (1 - eps) > top - 1e-9
    if n > 1:
        assert t + (n - 1) / (1 - eps) <= top + 1e-9


def _zero_state(has, num_files, U=None, full=True):
    U = len(has)
    conn = np.ones((U, U), dtype=bool)
    return NetworkState(conn, np.zeros((U, U)), has, num_files)


def test_critical_set_examples():
    s = _zero_state([set(), set(range(4)), {0, 1, 2, 3, 4}], 5)
    # demands 5 and 1: 1 + 1 < 5
    assert critical_set(initial_metrics(s), s) == {0}
    same = _zero_state([{0}, {0}, {1}], 2)
    assert critical_set(initial_metrics(same), same) == {0, 1, 2}
    done = _zero_state([{0}, {0}], 1)
    assert critical_set(initial_metrics(done), done) == frozenset()


def test_boundary_is_critical():
    # demands 2 and 1 with eps 0: 1 + 1 == 2 sits on the boundary
    s = _zero_state([set(), {0}, {0, 1}], 2)
    view = RoundView(s, initial_metrics(s))
    assert view.critical == {0, 1}
    assert view.layers == {0: 1, 1: 1}


def test_record_round_first_slot(seven_devices):
    m0 = initial_metrics(seven_devices)
    p = plan((0, {1}), (2, {2}))
    m1 = record_round(m0, seven_devices, p, {5: False, 6: False})
    assert [m.decoding_delay for m in m1] == [1, 1, 0, 0, 1, 0, 0]
    assert [m.erasure_count for m in m1] == [0] * 7
    assert m1[5].completion_round == 1 and m1[6].completion_round == 1
    with pytest.raises(ModelError):
        record_round(m0, seven_devices, p, {5: False})


def test_record_round_events():
    s = _zero_state([{0, 1}, {0}, {1}], 2)
    m0 = initial_metrics(s)
    # device 1 receives a file it holds, device 2 receives one it wants
    m1 = record_round(m0, s, plan((0, {0})), {1: False, 2: False})
    assert m1[1] == DeviceMetrics(1, 1, 0, None)
    assert m1[2] == DeviceMetrics(1, 0, 0, 1)
    m2 = record_round(m0, s, plan((0, {0})), {1: True, 2: True})
    assert m2[1].erasure_count == 1 and m2[2].erasure_count == 1
    assert m2[1].decoding_delay == 0
