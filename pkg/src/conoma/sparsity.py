"""Sparse link selection and BS clustering.

On/off decisions (which link serves a weak device, which BSs serve a CC
device) are relaxed with reweighted l1 penalties.  The bilinear rate and
fronthaul terms ``z * r`` are convexified around an operating point with the
identity ``z r = ((z + r)^2 - (z - r)^2) / 4`` and a first-order expansion of
the concave part.
"""

from __future__ import annotations

import numpy as np

from .phy import ACTIVITY_THRESHOLD, ResourceState, bs_link_power, fronthaul_delay
from .scenario import Scenario


def update_link_weights(prev_state: ResourceState, delta: float):
    """l1 weights of the direct and relay beams of every device."""
    if not delta > 1:
        raise ValueError("delta must exceed 1")
    nd = np.sum(np.abs(prev_state.q_direct) ** 2, axis=1)
    nr = np.sum(np.abs(prev_state.q_relay) ** 2, axis=1)
    return 1.0 / (delta + nd), 1.0 / (delta + nr)


def update_bs_weights(prev_state: ResourceState, scenario: Scenario, delta: float) -> np.ndarray:
    """(B, K) l1 weights of the BS-device clusters."""
    if not delta > 1:
        raise ValueError("delta must exceed 1")
    return 1.0 / (delta + bs_link_power(prev_state, scenario))


def bilinear_weight(norm_sq, delta: float):
    return 1.0 / (delta + np.asarray(norm_sq, dtype=float))


def lemma1_exact(z_d, r_d, z_r, r_aux, r_w):
    """The nonconvex selection-combining function ``r_w - z_d r_d - z_r r_aux``."""
    return r_w - z_d * r_d - z_r * r_aux


def lemma1_surrogate(z_d, r_d, z_r, r_aux, r_w, zt_d, rt_d, zt_r, rt_aux):
    """Convex upper bound of ``4 * lemma1_exact``, tight at the operating point
    ``(zt_d, rt_d, zt_r, rt_aux)``.  The constraint is ``value <= 0``."""
    sd = zt_d + rt_d
    sr = zt_r + rt_aux
    return (4 * r_w + (z_d - r_d) ** 2 + (z_r - r_aux) ** 2 - sd ** 2 - sr ** 2
            - 2 * sd * ((z_d - zt_d) + (r_d - rt_d))
            - 2 * sr * ((z_r - zt_r) + (r_aux - rt_aux)))


def lemma1_surrogate_grad(z_d, r_d, z_r, r_aux, r_w, zt_d, rt_d, zt_r, rt_aux):
    """Gradient with respect to ``(z_d, r_d, z_r, r_aux, r_w)``."""
    sd = zt_d + rt_d
    sr = zt_r + rt_aux
    return np.array([
        2 * (z_d - r_d) - 2 * sd,
        -2 * (z_d - r_d) - 2 * sd,
        2 * (z_r - r_aux) - 2 * sr,
        -2 * (z_r - r_aux) - 2 * sr,
        4.0 + 0 * z_d,
    ])


def fronthaul_sca_residual(z_bs, r, zt_bs, rt, capacity: float):
    """Convex fronthaul surrogate per BS; ``z_bs`` has shape (B, K) and ``r`` (K,).

    The constraint is ``value <= 0`` and the value upper-bounds
    ``4 * (sum_k z_bk r_k - capacity)``.
    """
    z_bs = np.atleast_2d(z_bs)
    zt_bs = np.atleast_2d(zt_bs)
    r = np.asarray(r, dtype=float)[None, :]
    rt = np.asarray(rt, dtype=float)[None, :]
    diff_t = zt_bs - rt
    terms = (z_bs + r) ** 2 - 2 * diff_t * (z_bs - r) + diff_t ** 2
    return terms.sum(axis=1) - 4 * capacity


def worst_case_fronthaul_delay(prev_state: ResourceState, scenario: Scenario,
                               hard_links_prev: np.ndarray | None = None) -> np.ndarray:
    """Per-device fronthaul delay bound (s) using the previous iterate's links.

    Devices without a serving BS in the previous iterate are charged against
    the full candidate set.
    """
    if hard_links_prev is None:
        thr = ACTIVITY_THRESHOLD * scenario.params.p_bs_max_w
        hard_links_prev = bs_link_power(prev_state, scenario) > thr
    return fronthaul_delay(scenario, hard_links_prev)


def hard_selection(state: ResourceState, scenario: Scenario, allow_relay: bool = True):
    """Turn a relaxed iterate into hard link and cluster decisions.

    A weak device uses the relay link iff its relay selection variable beats
    the direct one (ties go to direct).  A BS keeps a CC device when the
    selected beam has non-negligible power on that BS; each CC device keeps at
    least the BS with the strongest channel.

    Returns ``(relay_selected (K,), clusters (B, K))``.
    """
    topo = scenario.topology
    K, B = scenario.K, scenario.B
    relay = np.zeros(K, dtype=bool)
    if allow_relay:
        weak = topo.weak_set
        relay[weak] = state.z_relay[weak] > state.z_direct[weak]
    beams = np.where(relay[:, None], state.q_relay, state.q_direct)
    q2 = np.abs(beams) ** 2
    power = np.stack([q2[:, scenario.bs_slice(b)].sum(axis=1) for b in range(B)])
    clusters = power > ACTIVITY_THRESHOLD * scenario.params.p_bs_max_w
    if state.clusters is not None:
        clusters &= state.clusters
    h_bs = scenario.channels.h_bs
    for k in range(K):
        if topo.platform[k] != 0:
            clusters[:, k] = False
            continue
        if not clusters[:, k].any():
            allowed = np.ones(B, dtype=bool) if state.clusters is None else state.clusters[:, k]
            gains = np.linalg.norm(h_bs[:, k, :], axis=1)
            gains[~allowed] = -1.0
            clusters[int(np.argmax(gains)), k] = True
    return relay, clusters
