import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conoma.phy import ResourceState
from conoma.sparsity import (bilinear_weight, fronthaul_sca_residual, hard_selection, lemma1_exact,
                             lemma1_surrogate, lemma1_surrogate_grad, update_bs_weights,
                             update_link_weights, worst_case_fronthaul_delay)

from helpers import random_state


def _state_with_norms(sc, nd, nr):
    K, N = sc.K, sc.N
    qd = np.zeros((K, N), complex)
    qr = np.zeros((K, N), complex)
    qd[:, 0] = np.sqrt(nd)
    qr[:, 0] = np.sqrt(nr)
    return ResourceState(qd, qr, np.zeros(K), np.ones(K), np.ones(K))


# -- l1 weights -------------------------------------------------------------------

def test_link_weights(desk):
    bd, br = update_link_weights(_state_with_norms(desk, 0.0, 8.0), 2.0)
    np.testing.assert_allclose(bd, 0.5)
    np.testing.assert_allclose(br, 0.1)
    with pytest.raises(ValueError):
        update_link_weights(_state_with_norms(desk, 0.0, 0.0), 1.0)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0, 1e4), b=st.floats(0, 1e4))
def test_weights_decrease_with_norm(a, b):
    lo, hi = sorted((a, b))
    if hi > lo:
        assert bilinear_weight(hi, 2.0) < bilinear_weight(lo, 2.0)


def test_bs_weights(desk):
    K, N = desk.K, desk.N
    qd = np.zeros((K, N), complex)
    qr = np.zeros((K, N), complex)
    w = update_bs_weights(ResourceState(qd, qr, np.zeros(K), np.ones(K), np.ones(K)), desk, 2.0)
    np.testing.assert_allclose(w, 0.5)
    sl = desk.bs_slice(0)
    qd[0, sl.start] = np.sqrt(3.0)
    qr[0, sl.start + 1] = np.sqrt(5.0)
    w = update_bs_weights(ResourceState(qd, qr, np.zeros(K), np.ones(K), np.ones(K)), desk, 2.0)
    assert w[0, 0] == pytest.approx(0.1)
    # symmetry: the same norm on the relay beam only gives the same weight
    qd2 = np.zeros((K, N), complex)
    qr2 = np.zeros((K, N), complex)
    qd2[1, sl.start] = 2.0
    qr2[2, sl.start] = 2.0
    w2 = update_bs_weights(ResourceState(qd2, qr2, np.zeros(K), np.ones(K), np.ones(K)), desk, 2.0)
    assert w2[0, 1] == w2[0, 2]


def test_weight_times_norm_vanishes():
    norms = np.logspace(0, -12, 13)
    prod = bilinear_weight(norms, 2.0) * norms
    assert np.all(np.diff(prod) < 0) and prod[-1] < 1e-12


# -- bilinear surrogate --------------------------------------------------------------

def test_bilinear_identity():
    z, r = 3.0, 5.0
    assert 0.25 * ((z + r) ** 2 - (z - r) ** 2) == 15 == z * r


def test_surrogate_tight_at_operating_point():
    zt_d, rt_d, zt_r, rt_a, rw = 0.4, 3.0, 0.6, 2.0, 1.5
    val = lemma1_surrogate(zt_d, rt_d, zt_r, rt_a, rw, zt_d, rt_d, zt_r, rt_a)
    assert val == pytest.approx(4 * (rw - zt_d * rt_d - zt_r * rt_a), rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(x=st.lists(st.floats(-50, 50), min_size=9, max_size=9))
def test_surrogate_upper_bounds_exact(x):
    z_d, r_d, z_r, r_a, r_w, zt_d, rt_d, zt_r, rt_a = x
    s = lemma1_surrogate(z_d, r_d, z_r, r_a, r_w, zt_d, rt_d, zt_r, rt_a)
    e = 4 * lemma1_exact(z_d, r_d, z_r, r_a, r_w)
    assert s >= e - 1e-9 * max(1.0, abs(e))


def test_surrogate_gradient_matches_exact(rng):
    for _ in range(20):
        op = rng.uniform(0.1, 10, 5)
        zt_d, rt_d, zt_r, rt_a, rw = op
        g = lemma1_surrogate_grad(zt_d, rt_d, zt_r, rt_a, rw, zt_d, rt_d, zt_r, rt_a)
        np.testing.assert_allclose(g, [-4 * rt_d, -4 * zt_d, -4 * rt_a, -4 * zt_r, 4.0], rtol=1e-14)


# -- fronthaul surrogate -------------------------------------------------------------

def test_fronthaul_surrogate_at_operating_point(rng):
    zt = rng.uniform(0, 1, (2, 4))
    rt = rng.uniform(0, 50, 4)
    val = fronthaul_sca_residual(zt, rt, zt, rt, 100.0)
    np.testing.assert_allclose(val, 4 * (zt @ rt) - 400.0, rtol=1e-12)


def test_fronthaul_surrogate_frozen_value():
    # expanded with a computer-algebra system: -331/50
    val = fronthaul_sca_residual([[0.3, 0.0, 0.9]], [2.0, 1.5, 0.2], [[0.5, 0.1, 1.0]], [1.0, 2.5, 0.4], 3.0)
    assert val[0] == pytest.approx(-331 / 50, rel=1e-13)


def test_fronthaul_surrogate_zero_clusters(rng):
    zt = rng.uniform(0, 1, (1, 5))
    rt = rng.uniform(0, 5, 5)
    r = rng.uniform(0, 5, 5)
    d = (zt - rt)[0]
    want = np.sum(r ** 2) + np.sum(2 * d * r) + np.sum(d ** 2) - 4 * 7.0
    assert fronthaul_sca_residual(np.zeros((1, 5)), r, zt, rt, 7.0)[0] == pytest.approx(want, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_fronthaul_surrogate_upper_bound(seed):
    g = np.random.default_rng(seed)
    z, zt = g.uniform(0, 1, (2, 2, 6))
    r, rt = g.uniform(0, 40, (2, 6))
    val = fronthaul_sca_residual(z, r, zt, rt, 60.0)
    assert np.all(val >= 4 * (z @ r - 60.0) - 1e-9)


# -- worst-case fronthaul delay --------------------------------------------------------

def _links(sc, pairs):
    L = np.zeros((sc.B, sc.K), bool)
    for b, k in pairs:
        L[b, k] = True
    return L


def test_worst_case_fronthaul_three_devices(desk):
    cc = desk.topology.cc_set
    lam = worst_case_fronthaul_delay(None, desk, _links(desk, [(0, cc[0]), (0, cc[1]), (0, cc[2])]))
    np.testing.assert_allclose(lam[cc[:3]], 3e-4, rtol=1e-12)


def test_worst_case_fronthaul_max_over_serving(desk):
    cc = desk.topology.cc_set
    L = _links(desk, [(0, cc[0]), (0, cc[1]), (1, cc[0]), (1, cc[2]), (1, cc[3])])
    lam = worst_case_fronthaul_delay(None, desk, L)
    assert lam[cc[1]] == pytest.approx(2e-4) and lam[cc[0]] == pytest.approx(3e-4)
    # deactivating a link never increases anyone's bound
    L2 = L.copy()
    L2[1, cc[3]] = False
    assert np.all(worst_case_fronthaul_delay(None, desk, L2) <= lam + 1e-15)


def test_worst_case_fronthaul_unserved_uses_full_set(desk):
    cc = desk.topology.cc_set
    lam = worst_case_fronthaul_delay(None, desk, _links(desk, [(0, cc[0]), (0, cc[1])]))
    assert lam[cc[3]] == pytest.approx(2e-4)


# -- hard selection ------------------------------------------------------------------

def test_hard_selection_rule(desk, rng):
    st0 = random_state(desk, rng)
    weak = desk.topology.weak_set
    st0.z_direct[:] = 0.5
    st0.z_relay[:] = 0.5
    st0.z_relay[weak[0]] = 0.9
    relay, clusters = hard_selection(st0, desk)
    assert relay[weak[0]] and not relay[weak[1:]].any()  # ties go to direct
    assert not relay[desk.topology.strong_set].any()
    relay2, _ = hard_selection(st0, desk, allow_relay=False)
    assert not relay2.any()
    cc = desk.topology.platform == 0
    assert np.all(clusters[:, cc].sum(axis=0) >= 1)
    assert not clusters[:, ~cc].any()


def test_hard_selection_keeps_strongest_bs(desk):
    st0 = _state_with_norms(desk, 0.0, 0.0)
    _, clusters = hard_selection(st0, desk)
    gains = np.linalg.norm(desk.channels.h_bs, axis=2)
    for k in desk.topology.cc_set:
        assert clusters[:, k].sum() == 1 and clusters[np.argmax(gains[:, k]), k]
