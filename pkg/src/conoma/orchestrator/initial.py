"""Initial iterate of the outer loop."""

from __future__ import annotations

import numpy as np

from ..fp import update_aux
from ..phy import ResourceState, decode_flags_relaxed, rates, sinr_all
from ..scenario import Scenario
from ..sparsity import update_bs_weights, update_link_weights


def _cn(rng: np.random.Generator, n: int) -> np.ndarray:
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def init_state(scenario: Scenario, nu: float, rng: np.random.Generator,
               scheme: str = "conoma") -> ResourceState:
    """Random feasible-power starting point.

    Beamformers are i.i.d. circular Gaussian, scaled per transmitter so that
    the power budget is met with equality across the served devices (the EC
    keeps half of its residual budget free for computation).  Computation
    capacity is split equally, strong devices transmit at full D2D power and
    the selection variables start at one.
    """
    prm = scenario.params
    topo = scenario.topology
    K, N, B, E = scenario.K, scenario.N, scenario.B, scenario.E
    relay_beams = scheme == "conoma" and nu < 1
    qd = np.zeros((K, N), dtype=complex)
    qr = np.zeros((K, N), dtype=complex)
    f = np.zeros(K)
    cc = np.flatnonzero(topo.platform == 0)
    if len(cc):
        f[cc] = prm.f_cc_max / len(cc)
    for b in range(B):
        sl = scenario.bs_slice(b)
        n = sl.stop - sl.start
        for k in cc:
            qd[k, sl] = _cn(rng, n)
            if relay_beams and not topo.is_strong[k]:
                qr[k, sl] = _cn(rng, n)
        tot = float((np.abs(qd[:, sl]) ** 2 + np.abs(qr[:, sl]) ** 2).sum())
        if tot > 0:
            scale = np.sqrt(prm.p_bs_max_w / tot)
            qd[:, sl] *= scale
            qr[:, sl] *= scale
    for e in range(E):
        sl = scenario.uav_slice(e)
        n = sl.stop - sl.start
        mem = np.flatnonzero(topo.platform == e + 1)
        if not len(mem):
            continue
        f[mem] = prm.f_ec_max / len(mem)
        comp = prm.cpu_coeff * f[mem].sum() ** prm.cpu_exp
        if comp >= prm.p_ec_max_w:  # shrink computation until half the budget is left
            f[mem] *= (0.5 * prm.p_ec_max_w / comp) ** (1.0 / prm.cpu_exp)
            comp = prm.cpu_coeff * f[mem].sum() ** prm.cpu_exp
        for k in mem:
            qd[k, sl] = _cn(rng, n)
            if relay_beams and not topo.is_strong[k]:
                qr[k, sl] = _cn(rng, n)
        budget = 0.5 * (prm.p_ec_max_w - comp)
        tot = float((np.abs(qd[mem][:, sl]) ** 2 + np.abs(qr[mem][:, sl]) ** 2).sum())
        scale = np.sqrt(budget / tot)
        qd[mem, sl] *= scale
        qr[mem, sl] *= scale
    p = np.where(topo.is_strong, prm.p_dev_max_w, 0.0) if relay_beams else np.zeros(K)
    st = ResourceState(qd, qr, p, np.zeros(K), f, nu=nu)
    weak = ~topo.is_strong
    st.z_direct = np.where(weak, 1.0, 0.0)
    st.z_relay = np.where(weak, 1.0, 0.0) if relay_beams else np.zeros(K)
    st.z_bs = np.ones((B, K))
    st.clusters = np.ones((B, K), dtype=bool)
    st.clusters[:, topo.platform != 0] = False
    if scheme == "noma":
        dec = topo.is_strong.copy()
    elif scheme == "sdma":
        dec = np.zeros(K, dtype=bool)
    else:
        dec = decode_flags_relaxed(st, scenario)
    sic = "direct" if scheme == "noma" else "relay"
    sn = sinr_all(st, scenario, dec, sic)
    rt = rates(sn, nu, prm.bandwidth)
    st.r_direct = np.where(weak, rt["direct"], 0.0)
    st.r_relay1 = np.where(weak, rt["relay"], 0.0) if scheme != "sdma" else np.zeros(K)
    st.r_relay2 = np.where(weak, rt["d2d"], 0.0) if relay_beams and nu < 1 else np.zeros(K)
    st.r_aux = np.minimum(st.r_relay1, st.r_relay2)
    if scheme == "conoma":
        r_weak = np.maximum(st.r_direct, st.r_aux)
    elif scheme == "noma":
        r_weak = np.minimum(st.r_direct, st.r_relay1)
    else:
        r_weak = st.r_direct
    st.r = np.where(topo.is_strong, rt["strong"], r_weak)
    st.beta_direct, st.beta_relay = update_link_weights(st, prm.l1_delta)
    st.beta_bs = update_bs_weights(st, scenario, prm.l1_delta)
    st.a = update_aux(st, scenario, dec, sic)
    return st
