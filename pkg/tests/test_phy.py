import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conoma.phy import (ResourceState, active_bs_links, delay, fronthaul_delay, fronthaul_load,
                        interference, power_cc, power_ec, rates, selection_combining_bound, sinr_all)
from conoma.scenario import NetworkParams, make_scenario

from helpers import manual_scenario, random_state


def _zero_state(sc, **kw):
    K, N = sc.K, sc.N
    base = dict(q_direct=np.zeros((K, N), complex), q_relay=np.zeros((K, N), complex), p=np.zeros(K),
                r=np.ones(K), f=np.ones(K))
    base.update(kw)
    return ResourceState(**base)


def _scalar_pair(sigma2=1.0, g=1.0):
    # device 0 strong, device 1 weak, one BS with one antenna, unit channels
    return manual_scenario(np.ones((1, 2, 1)), [[0, g], [g, 0]], [True, False], [1, 0], sigma2=sigma2)


# -- interference -------------------------------------------------------------

def test_interference_empty_and_zero(desk):
    st0 = _zero_state(desk)
    assert interference(0, [], [], st0, desk) == desk.sigma2
    assert interference(3, desk.topology.strong_set, desk.topology.weak_set, st0, desk) == desk.sigma2


def test_interference_scalar_case():
    sc = _scalar_pair()
    st0 = _zero_state(sc, q_direct=np.array([[2.0], [0.0]], complex))
    assert interference(1, [0], [], st0, sc) == pytest.approx(1 + 4)


def test_interference_dimension_check(desk):
    st0 = _zero_state(desk)
    st0.q_direct = st0.q_direct[:, :3]
    with pytest.raises(ValueError):
        interference(0, [1], [], st0, desk)


# -- SINR -----------------------------------------------------------------------

def test_single_pair_d2d_sinr():
    sc = _scalar_pair(sigma2=0.5, g=0.3)
    st0 = _zero_state(sc, p=np.array([2.0, 0.0]))
    out = sinr_all(st0, sc, [False, False])
    assert out["d2d"][1] == pytest.approx(0.09 * 2.0 / 0.5, rel=1e-14)


def test_zero_beams_zero_slot1_sinr(desk):
    out = sinr_all(_zero_state(desk, p=np.ones(desk.K)), desk, np.ones(desk.K, bool))
    for fam in ("strong", "relay", "direct"):
        assert np.all(out[fam] == 0)


def _oracle_sinr(sc, st0, decode):
    """Second evaluator written directly from the received-signal equations."""
    h = sc.h
    strong = [k for k in range(sc.K) if sc.topology.is_strong[k]]
    weak = [k for k in range(sc.K) if not sc.topology.is_strong[k]]
    d = sc.topology.partner

    def I(i, X, Y):
        tot = sc.sigma2
        for s in X:
            tot += abs(np.vdot(h[i], st0.q_direct[s])) ** 2
        for j in Y:
            tot += abs(np.vdot(h[i], st0.q_direct[j] + st0.q_relay[j])) ** 2
        return tot

    out = {f: np.zeros(sc.K) for f in ("strong", "relay", "direct", "d2d")}
    for s in strong:
        X = [x for x in strong if x != s]
        Y = [y for y in weak if not (decode[s] and y == d[s])]
        out["strong"][s] = abs(np.vdot(h[s], st0.q_direct[s])) ** 2 / I(s, X, Y)
    for w in weak:
        Y = [y for y in weak if y != w]
        out["relay"][w] = abs(np.vdot(h[d[w]], st0.q_relay[w])) ** 2 / I(d[w], strong, Y)
        out["direct"][w] = abs(np.vdot(h[w], st0.q_direct[w])) ** 2 / I(w, strong, Y)
        g = sc.channels.g_d2d
        den = sc.sigma2 + sum(abs(g[s, w]) ** 2 * st0.p[s] for s in strong if s != d[w])
        out["d2d"][w] = abs(g[d[w], w]) ** 2 * st0.p[d[w]] / den
    return out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sinr_matches_oracle_two_pairs(seed):
    sc = make_scenario(NetworkParams(num_bs=1, num_ec=0, num_devices=4, antennas_bs=2), seed)
    rng = np.random.default_rng(seed)
    st0 = random_state(sc, rng)
    for decode in ([True, True, True, True], [False] * 4, [True, False, True, False]):
        got = sinr_all(st0, sc, np.array(decode))
        want = _oracle_sinr(sc, st0, decode)
        for fam in want:
            np.testing.assert_allclose(got[fam], want[fam], rtol=1e-12, atol=0)


def test_sinr_matches_oracle_with_edge(desk, rng):
    st0 = random_state(desk, rng)
    dec = rng.random(desk.K) < 0.5
    got = sinr_all(st0, desk, dec)
    want = _oracle_sinr(desk, st0, dec)
    for fam in want:
        np.testing.assert_allclose(got[fam], want[fam], rtol=1e-12, atol=0)


FROZEN_TWO_PAIR = {  # standalone evaluator output, seed 0, decode flags (T, F, T, F)
    "strong": [0.0, 0.06352656187674842, 5.330594703461879, 0.0],
    "relay": [0.0896662688765773, 0.0, 0.0, 0.2195579779372593],
    "direct": [0.2233256779178003, 0.0, 0.0, 0.465772218668429],
    "d2d": [1.8366061624834384, 0.0, 0.0, 6.538286857886282],
}


def test_frozen_two_pair_values():
    sc = make_scenario(NetworkParams(num_bs=1, num_ec=0, num_devices=4, antennas_bs=2), 0)
    st0 = random_state(sc, np.random.default_rng(0))
    got = sinr_all(st0, sc, np.array([True, False, True, False]))
    for fam, want in FROZEN_TWO_PAIR.items():
        np.testing.assert_allclose(got[fam], want, rtol=1e-12, atol=0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(0.1, 10.0))
def test_sinr_scale_invariance_without_noise(seed, c):
    sc = make_scenario(NetworkParams(num_bs=1, num_ec=1, num_devices=4), seed)
    st0 = random_state(sc, np.random.default_rng(seed))
    from dataclasses import replace
    from conoma.scenario import ChannelSet

    quiet = replace(sc, sigma2=1e-300)
    ch = sc.channels
    scaled = replace(quiet, channels=ChannelSet(c * ch.h_bs, c * ch.h_uav, c * ch.g_d2d))
    dec = np.ones(sc.K, bool)
    a = sinr_all(st0, quiet, dec)
    b = sinr_all(st0, scaled, dec)
    for fam in ("strong", "relay", "direct"):
        np.testing.assert_allclose(b[fam], a[fam], rtol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_decode_gating_helps_strong_device(seed):
    sc = make_scenario(NetworkParams(num_bs=1, num_ec=1, num_devices=4), seed)
    st0 = random_state(sc, np.random.default_rng(seed))
    on = sinr_all(st0, sc, np.ones(sc.K, bool))["strong"]
    off = sinr_all(st0, sc, np.zeros(sc.K, bool))["strong"]
    assert np.all(on >= off)


def test_association_zeroing_is_neutral(desk, rng):
    st0 = random_state(desk, rng)
    st1 = st0.copy()
    st1.q_direct = st1.q_direct * desk.association_mask()
    a, b = sinr_all(st0, desk, np.ones(desk.K, bool)), sinr_all(st1, desk, np.ones(desk.K, bool))
    for fam in a:
        np.testing.assert_array_equal(a[fam], b[fam])


# -- rates ------------------------------------------------------------------------

def test_rates_reference_values():
    one = {f: np.array([1.0]) for f in ("strong", "relay", "direct", "d2d")}
    r = rates(one, 0.5, 10e6)
    assert r["strong"][0] == pytest.approx(5e6)
    assert r["d2d"][0] == pytest.approx(5e6)
    r1 = rates({f: np.array([3.0]) for f in one}, 1.0, 10e6)
    assert r1["direct"][0] == pytest.approx(20e6)
    assert r1["d2d"][0] == 0.0
    with pytest.raises(ValueError):
        rates(one, 0.0, 10e6)


@settings(max_examples=50, deadline=None)
@given(g1=st.floats(0, 1e3), g2=st.floats(0, 1e3), nu1=st.floats(0.05, 1.0), nu2=st.floats(0.05, 1.0))
def test_rate_monotonicity(g1, g2, nu1, nu2):
    lo, hi = sorted((g1, g2))
    n_lo, n_hi = sorted((nu1, nu2))
    fam = lambda v: {f: np.array([v]) for f in ("strong", "relay", "direct", "d2d")}
    a, b = rates(fam(lo), n_lo, 1e7), rates(fam(hi), n_lo, 1e7)
    assert all(b[f][0] >= a[f][0] for f in a)
    c = rates(fam(hi), n_hi, 1e7)
    assert c["direct"][0] >= b["direct"][0] and c["d2d"][0] <= b["d2d"][0]


def test_selection_combining():
    assert selection_combining_bound(5, 9, 3) == 5
    assert selection_combining_bound(2, 9, 3) == 3
    assert selection_combining_bound(0, 0, 0) == 0


# -- power, delay, fronthaul ----------------------------------------------------------

def test_power_ec_reference(desk):
    st0 = _zero_state(desk)
    f = np.zeros(desk.K)
    ec0 = desk.topology.ec_sets[0]
    f[ec0] = 1e9 / len(ec0)
    st0.f = f
    pe = power_ec(st0, desk)
    assert pe[0] == pytest.approx(100.1, rel=1e-12)
    assert pe[1] == pytest.approx(100.0, rel=1e-12)
    assert np.all(power_cc(st0, desk) == 0)


def test_power_quadratic_in_beams(desk, rng):
    from conoma.phy import power_ec_tx

    st0 = random_state(desk, rng)
    st2 = st0.copy()
    st2.q_direct *= 2
    st2.q_relay *= 2
    np.testing.assert_allclose(power_ec_tx(st2, desk), 4 * power_ec_tx(st0, desk), rtol=1e-12)
    np.testing.assert_allclose(power_cc(st2, desk), 4 * power_cc(st0, desk), rtol=1e-12)


def test_delay_reference_values(desk):
    st0 = _zero_state(desk, f=np.full(desk.K, 1e9), r=np.full(desk.K, 1e6))
    br = delay(st0, desk, np.zeros((desk.B, desk.K), bool))
    edge = desk.topology.platform > 0
    np.testing.assert_allclose(br.total[edge], 0.02, rtol=1e-12)
    assert np.all(br.fronthaul[edge] == 0)


def test_delay_infinite_on_zero_rate(desk):
    st0 = _zero_state(desk, f=np.zeros(desk.K), r=np.zeros(desk.K))
    br = delay(st0, desk, np.zeros((desk.B, desk.K), bool))
    assert np.all(np.isinf(br.computation)) and np.all(np.isinf(br.transmission))


def test_fronthaul_delay_two_devices(desk):
    links = np.zeros((desk.B, desk.K), bool)
    cc = desk.topology.cc_set
    links[0, cc[:2]] = True
    fh = fronthaul_delay(desk, links)
    np.testing.assert_allclose(fh[cc[:2]], 2e-4, rtol=1e-12)
    assert np.all(fh[desk.topology.platform > 0] == 0)


def test_fronthaul_load_flags(desk):
    st0 = _zero_state(desk, r=np.zeros(desk.K))
    links = np.zeros((desk.B, desk.K), bool)
    load, ok = fronthaul_load(st0, links, desk)
    assert np.all(load == 0) and np.all(ok)
    cc = desk.topology.cc_set
    st0.r[cc[0]] = 100e6
    links[0, cc[0]] = True
    load, ok = fronthaul_load(st0, links, desk)
    assert load[0] == 100e6 and ok[0]
    st0.r[cc[:2]] = 60e6
    links[0, cc[:2]] = True
    _, ok = fronthaul_load(st0, links, desk)
    assert not ok[0]


def test_active_links_threshold(desk):
    st0 = _zero_state(desk)
    k = desk.topology.cc_set[0]
    thr = 1e-6 * desk.params.p_bs_max_w
    st0.q_direct[k, desk.bs_slice(0)][0] = np.sqrt(2 * thr)
    st0.q_direct[k, desk.bs_slice(1)][0] = np.sqrt(0.5 * thr)
    act = active_bs_links(st0, desk)
    assert act[0, k] and not act[1, k]
