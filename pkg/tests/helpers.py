"""Builders shared by the test modules."""

import numpy as np

from conoma.phy import ResourceState
from conoma.scenario import ChannelSet, NetworkParams, Scenario, Topology


def manual_scenario(h_bs, g_d2d, is_strong, partner, sigma2=1.0, h_uav=None, platform=None,
                    params=None):
    """Scenario with hand-written channels (positions are irrelevant here)."""
    h_bs = np.asarray(h_bs, dtype=complex)
    B, K, Lb = h_bs.shape
    if h_uav is None:
        h_uav = np.zeros((0, K, 1), dtype=complex)
    h_uav = np.asarray(h_uav, dtype=complex)
    E = h_uav.shape[0]
    platform = np.zeros(K, dtype=int) if platform is None else np.asarray(platform)
    params = params or NetworkParams(num_bs=B, num_ec=E, num_devices=K, antennas_bs=Lb,
                                     antennas_ec=h_uav.shape[2])
    topo = Topology(np.zeros((B, 2)), np.zeros((E, 3)), np.zeros((K, 2)), np.asarray(partner),
                    np.asarray(is_strong, dtype=bool), platform)
    topo.check()
    return Scenario(params, topo, ChannelSet(h_bs, h_uav, np.asarray(g_d2d, dtype=complex)), sigma2=sigma2)


def random_state(sc: Scenario, rng: np.random.Generator, nu: float = 0.7, scale: float = 1.0) -> ResourceState:
    """Random beams respecting the association pattern, scaled to the budgets."""
    K, N = sc.K, sc.N
    mask = sc.association_mask()
    cn = lambda *s: (rng.standard_normal(s) + 1j * rng.standard_normal(s)) / np.sqrt(2)
    qd = cn(K, N) * mask
    qr = cn(K, N) * mask
    qr[sc.topology.is_strong] = 0.0
    prm = sc.params
    # put a total BS power of about P_bs and an EC power of about P_ec on each transmitter
    for b in range(sc.B):
        sl = sc.bs_slice(b)
        tot = np.sum(np.abs(qd[:, sl]) ** 2) + np.sum(np.abs(qr[:, sl]) ** 2)
        if tot > 0:
            f = np.sqrt(scale * prm.p_bs_max_w / tot)
            qd[:, sl] *= f
            qr[:, sl] *= f
    for e in range(sc.E):
        sl = sc.uav_slice(e)
        tot = np.sum(np.abs(qd[:, sl]) ** 2) + np.sum(np.abs(qr[:, sl]) ** 2)
        if tot > 0:
            f = np.sqrt(0.5 * scale * prm.p_ec_max_w / tot)
            qd[:, sl] *= f
            qr[:, sl] *= f
    p = np.where(sc.topology.is_strong, rng.uniform(0.1, 1.0, K) * prm.p_dev_max_w, 0.0)
    r = rng.uniform(1e6, 5e7, K)
    f = rng.uniform(0.3e9, 1e9, K)
    return ResourceState(qd, qr, p, r, f, nu=nu)
