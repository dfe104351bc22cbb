import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conoma.scenario import (NetworkParams, Scenario, ScenarioError, build_topology, draw_channels,
                             load_params, los_probability, make_scenario, noise_power, pathloss_bs,
                             pathloss_uav)


# -- pathloss and noise ---------------------------------------------------------

def test_pathloss_bs_reference_points():
    assert pathloss_bs(1.0) == pytest.approx(128.1, abs=1e-12)
    assert pathloss_bs(0.1) == pytest.approx(90.5, abs=1e-12)
    # frozen from a standalone evaluation of 128.1 + 37.6 log10(0.5)
    assert pathloss_bs(0.5) == pytest.approx(116.7812721630343, rel=1e-14)


def test_pathloss_bs_rejects_nonpositive():
    with pytest.raises(ValueError):
        pathloss_bs(0.0)


def test_los_probability():
    assert los_probability(9.61) == pytest.approx(1 / 10.61, rel=1e-14)
    # frozen scalar evaluation of the logistic expression at 90 degrees
    assert los_probability(90.0) == pytest.approx(0.999975074537903, rel=1e-12)
    assert abs(los_probability(90.0) - 1) < 1e-4


def test_uav_pathloss_prefers_high_elevation():
    assert pathloss_uav(300.0, 90.0, 5e9) < pathloss_uav(300.0, 10.0, 5e9)
    with pytest.raises(ValueError):
        pathloss_uav(300.0, 95.0, 5e9)


def test_noise_power():
    # frozen dBm -> W conversion
    assert noise_power(NetworkParams()) == pytest.approx(1.258925411794166e-12, rel=1e-12)
    assert noise_power(NetworkParams(noise_psd=-30.0, bandwidth=1.0)) == pytest.approx(1e-6, rel=1e-12)
    p1 = NetworkParams(bandwidth=5e6)
    p2 = NetworkParams(bandwidth=10e6)
    assert noise_power(p2) == pytest.approx(2 * noise_power(p1), rel=1e-12)


# -- parameters -----------------------------------------------------------------

@pytest.mark.parametrize("bad", [dict(num_devices=0), dict(cpu_exp=0.5), dict(l1_delta=1.0),
                                 dict(nu_grid=(0.0, 1.0)), dict(nu_grid=(1.2,)), dict(f_ec_max=0.0)])
def test_params_validation(bad):
    with pytest.raises(ScenarioError):
        NetworkParams(**bad)


def test_load_params_nested_yaml(tmp_path):
    f = tmp_path / "p.yaml"
    f.write_text("network:\n  num_devices: 6\nalgorithm:\n  conv_threshold: 0.2\n")
    p = load_params(f)
    assert p.num_devices == 6 and p.conv_threshold == 0.2 and p.num_bs == 2
    f.write_text("network:\n  bogus: 1\n")
    with pytest.raises(ScenarioError):
        load_params(f)


def test_desk_config_matches_defaults():
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / "desk.yaml"
    assert load_params(path) == NetworkParams()


# -- topology ---------------------------------------------------------------------

def test_paper_scale_topology_counts():
    p = NetworkParams.paper_scale()
    topo = build_topology(p, 5)
    assert topo.num_devices == 30
    assert len(topo.strong_set) == len(topo.weak_set) == 15
    assert len(topo.cc_set) + sum(len(s) for s in topo.ec_sets) == 30


def test_edge_free_two_devices():
    p = NetworkParams(num_bs=1, num_ec=0, num_devices=2)
    topo = build_topology(p, 0)
    assert list(topo.platform) == [0, 0]
    assert topo.is_strong.sum() == 1


def test_odd_device_count_rejected():
    with pytest.raises(ScenarioError):
        build_topology(NetworkParams(num_devices=7), 0)


def test_geometry_rules():
    p = NetworkParams()
    topo = build_topology(p, 11)
    pos = topo.device_positions
    dist = np.linalg.norm(pos - pos[topo.partner], axis=1)
    assert np.all(dist <= p.pair_radius + 1e-9)
    for e in range(p.num_ec):
        s = [k for k in topo.ec_sets[e] if topo.is_strong[k]][0]
        np.testing.assert_allclose(topo.uav_positions[e], [*pos[s], p.uav_altitude])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), pairs=st.integers(2, 6), ec=st.integers(0, 2))
def test_topology_invariants(seed, pairs, ec):
    ec = min(ec, pairs)
    sc = make_scenario(NetworkParams(num_devices=2 * pairs, num_ec=ec), seed)
    t = sc.topology
    k = np.arange(sc.K)
    assert np.array_equal(t.partner[t.partner], k)
    assert np.all(t.is_strong != t.is_strong[t.partner])
    assert np.all(t.platform == t.platform[t.partner])
    # platform partition
    sets = [set(t.cc_set)] + [set(s) for s in t.ec_sets]
    assert sum(len(s) for s in sets) == sc.K
    assert set().union(*sets) == set(range(sc.K))
    assert sc.h.shape == (sc.K, sc.params.agg_dim)
    assert np.all(np.isfinite(sc.h))


def test_reproducible():
    a = make_scenario(NetworkParams(), 42)
    b = make_scenario(NetworkParams(), 42)
    np.testing.assert_array_equal(a.topology.device_positions, b.topology.device_positions)
    np.testing.assert_array_equal(a.channels.h_bs, b.channels.h_bs)
    np.testing.assert_array_equal(a.channels.g_d2d, b.channels.g_d2d)


# -- channels -----------------------------------------------------------------------

def test_zero_fading_is_label_symmetric():
    p = NetworkParams()
    topo = build_topology(p, 2)
    c1 = draw_channels(topo, p, 9)
    c2 = draw_channels(topo.with_labels(~topo.is_strong), p, 9)
    np.testing.assert_array_equal(c1.h_bs, c2.h_bs)
    np.testing.assert_array_equal(c1.h_uav, c2.h_uav)


def test_additional_fading_paired_scaling():
    base = make_scenario(NetworkParams(), 4)
    faded = make_scenario(NetworkParams(additional_fading=12.0), 4)
    weak = ~base.topology.is_strong
    ratio = np.abs(faded.channels.h_bs[:, weak]) ** 2 / np.abs(base.channels.h_bs[:, weak]) ** 2
    np.testing.assert_allclose(ratio, 10 ** -1.2, rtol=1e-12)
    np.testing.assert_array_equal(faded.channels.h_bs[:, ~weak], base.channels.h_bs[:, ~weak])
    np.testing.assert_array_equal(faded.channels.g_d2d, base.channels.g_d2d)


def test_additional_fading_monte_carlo():
    p0 = NetworkParams(shadowing_bs_db=0.0)
    p12 = p0.replace(additional_fading=12.0)
    topo = build_topology(p0, 1)
    weak = ~topo.is_strong
    n = 10_000
    m0 = np.mean([np.abs(draw_channels(topo, p0, s).h_bs[:, weak]) ** 2 for s in range(n)], axis=0)
    m12 = np.mean([np.abs(draw_channels(topo, p12, n + s).h_bs[:, weak]) ** 2 for s in range(n)], axis=0)
    ratio = m12.mean(axis=-1) / m0.mean(axis=-1)
    # Rayleigh power sample means over 4 antennas x 1e4 draws: relative std about 0.7%
    np.testing.assert_allclose(ratio, 10 ** -1.2, rtol=0.04)


def test_with_fading_equals_regeneration():
    a = make_scenario(NetworkParams(additional_fading=3.0), 7).with_fading(9.0)
    b = make_scenario(NetworkParams(additional_fading=9.0), 7)
    np.testing.assert_allclose(a.h, b.h, rtol=1e-12, atol=0)
    assert a.params == b.params


def test_json_round_trip(tmp_path, desk):
    f = tmp_path / "s.json"
    desk.save(f)
    doc = json.loads(f.read_text())
    assert doc["format"] == "conoma-scenario"
    assert set(doc["channels"]["h_bs"]) == {"shape", "re", "im"}
    back = Scenario.load(f)
    np.testing.assert_array_equal(back.h, desk.h)
    np.testing.assert_array_equal(back.topology.partner, desk.topology.partner)
    assert back.params == desk.params and back.seed == desk.seed
    assert math.isclose(back.sigma2, desk.sigma2)
