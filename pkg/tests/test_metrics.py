import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conoma import metrics
from conoma.orchestrator import init_state
from conoma.phy import ResourceState


def _rates_state(r):
    K = len(r)
    return ResourceState(np.zeros((K, 1), complex), np.zeros((K, 1), complex), np.zeros(K),
                         np.asarray(r, float), np.ones(K))


def test_jain_equal_rates():
    assert metrics.jain_index(np.full(7, 3.2e6)) == pytest.approx(1.0, rel=1e-15)


def test_jain_single_dominant_device():
    r = np.full(30, 1e-12)
    r[0] = 1.0
    assert metrics.jain_index(r) == pytest.approx(1 / 30, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(r=st.lists(st.floats(0, 1e9), min_size=1, max_size=30).filter(lambda v: max(v) > 0))
def test_jain_bounds(r):
    j = metrics.jain_index(np.array(r))
    assert 1 / len(r) - 1e-12 <= j <= 1 + 1e-12


def test_jain_needs_a_positive_rate():
    with pytest.raises(ValueError):
        metrics.jain_index(np.zeros(3))


def test_log_rate_units():
    st0 = _rates_state([1e6, np.e * 1e6, 1e7])
    assert metrics.log_rate(st0) == pytest.approx(1.0 + np.log(10.0), rel=1e-14)
    with pytest.raises(ValueError):
        metrics.log_rate(_rates_state([1e6, 0.0]))


def test_delay_report(desk):
    st0 = init_state(desk, 0.7, np.random.default_rng(0))
    rep = metrics.delay_report(st0, desk)
    assert rep["worst_total"] >= rep["avg_total"]
    assert rep["avg_total"] == pytest.approx(rep["avg_computation"] + rep["avg_fronthaul"]
                                             + rep["avg_transmission"], rel=1e-12)
    assert rep["worst_total"] == pytest.approx(rep["breakdown"].total[rep["worst_device"]])
    # cloud devices: task_cycles / f with the capacity split equally
    cc = desk.topology.cc_set
    np.testing.assert_allclose(rep["breakdown"].computation[cc],
                               desk.params.task_cycles * len(cc) / desk.params.f_cc_max)


def test_direct_served_counts_weak_devices(desk):
    st0 = init_state(desk, 0.7, np.random.default_rng(0))
    weak = ~desk.topology.is_strong
    st0.relay_selected = None
    assert metrics.direct_served(st0, desk) == weak.sum()
    st0.relay_selected = weak.copy()
    st0.relay_selected[np.flatnonzero(weak)[0]] = False
    assert metrics.direct_served(st0, desk) == 1
