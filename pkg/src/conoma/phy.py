"""Physical-layer and computation model.

Everything here is a pure function of a :class:`ResourceState` and a
:class:`~conoma.scenario.Scenario`.  Quantities are in SI units: beamformers
in sqrt(W), powers in W, rates in bit/s, computation in cycles/s.

SINR families are stored as length-``K`` arrays indexed by device; entries of
devices outside a family (for example the direct-link SINR of a strong
device) are zero.

* ``"strong"``  SINR of a strong device decoding its own message,
* ``"relay"``   SINR at the strong partner of the weak device's slot-1 relay
  stream (for the NOMA baseline: of its direct stream, used for SIC),
* ``"direct"``  SINR of the weak device's direct stream at the weak device,
* ``"d2d"``     SINR of the slot-2 device-to-device hop at the weak device.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .scenario import Scenario

FAMILIES = ("strong", "relay", "direct", "d2d")
ACTIVITY_THRESHOLD = 1e-6  # fraction of the transmitter budget


@dataclass
class ResourceState:
    """One iterate of all decision variables (SI units)."""

    q_direct: np.ndarray  # (K, N) complex
    q_relay: np.ndarray  # (K, N) complex, weak devices only
    p: np.ndarray  # (K,) W, strong devices only
    r: np.ndarray  # (K,) bit/s
    f: np.ndarray  # (K,) cycles/s
    nu: float = 1.0
    r_direct: np.ndarray | None = None  # (K,) weak devices
    r_relay1: np.ndarray | None = None
    r_relay2: np.ndarray | None = None
    r_aux: np.ndarray | None = None
    z_direct: np.ndarray | None = None  # (K,) in [0, 1]
    z_relay: np.ndarray | None = None
    z_bs: np.ndarray | None = None  # (B, K)
    gamma: dict = field(default_factory=dict)
    a: dict = field(default_factory=dict)
    beta_direct: np.ndarray | None = None
    beta_relay: np.ndarray | None = None
    beta_bs: np.ndarray | None = None
    relay_selected: np.ndarray | None = None  # (K,) bool, hard phase only
    clusters: np.ndarray | None = None  # (B, K) bool candidate BS links

    def __post_init__(self) -> None:
        K = self.q_direct.shape[0]
        for name in ("r_direct", "r_relay1", "r_relay2", "r_aux", "z_direct", "z_relay"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(K))

    def copy(self) -> "ResourceState":
        def cp(v):
            if isinstance(v, np.ndarray):
                return v.copy()
            if isinstance(v, dict):
                return {k: cp(x) for k, x in v.items()}
            return v

        return ResourceState(**{f.name: cp(getattr(self, f.name)) for f in dataclasses.fields(self)})

    @property
    def K(self) -> int:
        return self.q_direct.shape[0]


@dataclass
class DelayBreakdown:
    computation: np.ndarray  # s
    fronthaul: np.ndarray
    transmission: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.computation + self.fronthaul + self.transmission


# ---------------------------------------------------------------------------
# Interference and SINR
# ---------------------------------------------------------------------------


def gain_matrices(state: ResourceState, h: np.ndarray):
    """Received-power matrices ``G[i, j] = |h_i^H x_j|^2``.

    Returns (direct-only, relay-only, combined) matrices of shape (K, K).
    """
    proj_d = h.conj() @ state.q_direct.T  # [i, j] = h_i^H q_j
    proj_r = h.conj() @ state.q_relay.T
    return np.abs(proj_d) ** 2, np.abs(proj_r) ** 2, np.abs(proj_d + proj_r) ** 2


def interference(i: int, X, Y, state: ResourceState, scenario: Scenario) -> float:
    """Interference plus noise at device ``i`` from strong set ``X`` (direct
    beams) and weak set ``Y`` (direct plus relay beams)."""
    h = scenario.h
    if state.q_direct.shape[1] != h.shape[1] or state.q_relay.shape[1] != h.shape[1]:
        raise ValueError("beamformer and channel dimensions differ")
    hi = h[i].conj()
    total = scenario.sigma2
    for s in X:
        total += abs(hi @ state.q_direct[s]) ** 2
    for j in Y:
        total += abs(hi @ (state.q_direct[j] + state.q_relay[j])) ** 2
    return float(total)


def sinr_all(state: ResourceState, scenario: Scenario, decode_flags, sic_source: str = "relay") -> dict:
    """All four SINR families.

    ``decode_flags[k]`` (indexed by device, read at strong devices) says
    whether the strong device decodes and cancels its partner's message.
    ``sic_source`` selects which beam of the weak device carries the stream
    decoded at the strong partner: ``"relay"`` for cooperative NOMA,
    ``"direct"`` for the plain NOMA baseline.
    """
    topo = scenario.topology
    K = state.K
    sig2 = scenario.sigma2
    Gd, Gr, G = gain_matrices(state, scenario.h)
    strong, weak = topo.is_strong, ~topo.is_strong
    partner = topo.partner
    decode = np.asarray(decode_flags, dtype=bool)
    # interference at device i from all strong (direct) and all weak (combined)
    full = sig2 + Gd[:, strong].sum(axis=1) + G[:, weak].sum(axis=1)
    out = {name: np.zeros(K) for name in FAMILIES}
    idx = np.arange(K)
    for w in np.flatnonzero(weak):
        s = partner[w]
        num_sic = Gr[s, w] if sic_source == "relay" else Gd[s, w]
        out["relay"][w] = num_sic / (full[s] - G[s, w])
        out["direct"][w] = Gd[w, w] / (full[w] - G[w, w])
    for s in np.flatnonzero(strong):
        w = partner[s]
        den = full[s] - Gd[s, s]
        if decode[s]:
            den -= G[s, w]
        out["strong"][s] = Gd[s, s] / den
    g2 = np.abs(scenario.channels.g_d2d) ** 2
    for w in np.flatnonzero(weak):
        s = partner[w]
        others = idx[strong & (idx != s)]
        den = sig2 + float(np.sum(g2[others, w] * state.p[others]))
        out["d2d"][w] = g2[s, w] * state.p[s] / den
    return out


def rates(sinr: dict, nu: float, W: float) -> dict:
    """Rate bounds (bit/s) of every SINR family for time split ``nu``."""
    if not 0 < nu <= 1:
        raise ValueError("time split must lie in (0, 1]")
    out = {}
    for name in ("strong", "relay", "direct"):
        out[name] = nu * W * np.log2(1.0 + np.asarray(sinr[name]))
    out["d2d"] = (1.0 - nu) * W * np.log2(1.0 + np.asarray(sinr["d2d"]))
    return out


def selection_combining_bound(r_direct, r_relay_hop1, r_relay_hop2):
    return np.maximum(r_direct, np.minimum(r_relay_hop1, r_relay_hop2))


# ---------------------------------------------------------------------------
# Power, delay, fronthaul
# ---------------------------------------------------------------------------


def power_cc(state: ResourceState, scenario: Scenario) -> np.ndarray:
    """Transmit power of every BS in W."""
    q2 = np.abs(state.q_direct) ** 2 + np.abs(state.q_relay) ** 2
    return np.array([q2[:, scenario.bs_slice(b)].sum() for b in range(scenario.B)])


def power_ec_tx(state: ResourceState, scenario: Scenario) -> np.ndarray:
    q2 = np.abs(state.q_direct) ** 2 + np.abs(state.q_relay) ** 2
    return np.array([q2[:, scenario.uav_slice(e)].sum() for e in range(scenario.E)])


def power_ec(state: ResourceState, scenario: Scenario) -> np.ndarray:
    """Total power of every edge computer: transmit, computation, operation."""
    prm = scenario.params
    tx = power_ec_tx(state, scenario)
    comp = np.array([prm.cpu_coeff * state.f[scenario.topology.platform == e + 1].sum() ** prm.cpu_exp
                     for e in range(scenario.E)])
    return tx + comp + prm.op_power


def bs_link_power(state: ResourceState, scenario: Scenario) -> np.ndarray:
    """(B, K) squared norm of the BS-device beamformer blocks (both links)."""
    q2 = np.abs(state.q_direct) ** 2 + np.abs(state.q_relay) ** 2
    return np.stack([q2[:, scenario.bs_slice(b)].sum(axis=1) for b in range(scenario.B)])


def active_bs_links(state: ResourceState, scenario: Scenario) -> np.ndarray:
    """(B, K) hard activity of BS-device links (CC devices only)."""
    thr = ACTIVITY_THRESHOLD * scenario.params.p_bs_max_w
    act = bs_link_power(state, scenario) > thr
    act[:, scenario.topology.platform != 0] = False
    return act


def link_activity(state: ResourceState, scenario: Scenario):
    """Per-device hard activity of the direct and relay beams."""
    prm = scenario.params
    budget = np.where(scenario.topology.platform == 0, prm.p_bs_max_w, prm.p_ec_max_w)
    thr = ACTIVITY_THRESHOLD * budget
    d = np.sum(np.abs(state.q_direct) ** 2, axis=1) > thr
    r = np.sum(np.abs(state.q_relay) ** 2, axis=1) > thr
    return d, r


def fronthaul_delay(scenario: Scenario, links: np.ndarray) -> np.ndarray:
    """Per-device fronthaul delay (s) for a (B, K) boolean link set.

    A CC device waits for the most loaded of its serving BSs.  A CC device
    with no serving BS is charged against every BS.  Edge devices have none.
    """
    prm = scenario.params
    topo = scenario.topology
    cc = topo.platform == 0
    links = np.asarray(links, dtype=bool) & cc[None, :]
    D = np.full(scenario.K, prm.data_bits)
    load = (links * D[None, :]).sum(axis=1) / prm.fronthaul_cap  # (B,)
    out = np.zeros(scenario.K)
    for k in np.flatnonzero(cc):
        serving = links[:, k]
        out[k] = load[serving].max() if serving.any() else load.max()
    return out


def delay(state: ResourceState, scenario: Scenario, active_links: np.ndarray) -> DelayBreakdown:
    """Computation, fronthaul and transmission delay per device in s.

    Zero computation or rate gives an infinite component instead of raising.
    """
    prm = scenario.params
    with np.errstate(divide="ignore"):
        comp = np.where(state.f > 0, prm.task_cycles / np.where(state.f > 0, state.f, 1.0), np.inf)
        trans = np.where(state.r > 0, prm.data_bits / np.where(state.r > 0, state.r, 1.0), np.inf)
    return DelayBreakdown(comp, fronthaul_delay(scenario, active_links), trans)


def fronthaul_load(state: ResourceState, hard_links: np.ndarray, scenario: Scenario | None = None,
                   capacity: float | None = None):
    """Per-BS fronthaul traffic in bit/s and the feasibility flag per BS."""
    links = np.asarray(hard_links, dtype=float)
    load = links @ state.r
    if capacity is None:
        capacity = scenario.params.fronthaul_cap if scenario is not None else np.inf
    return load, load <= capacity


def decode_flags_relaxed(state: ResourceState, scenario: Scenario) -> np.ndarray:
    """Strong device decodes its partner iff the partner leans to the relay link."""
    topo = scenario.topology
    flags = np.zeros(scenario.K, dtype=bool)
    for s in topo.strong_set:
        w = topo.partner[s]
        flags[s] = state.z_relay[w] > state.z_direct[w]
    return flags


def decode_flags_hard(relay_selected: np.ndarray, scenario: Scenario) -> np.ndarray:
    topo = scenario.topology
    flags = np.zeros(scenario.K, dtype=bool)
    for s in topo.strong_set:
        flags[s] = bool(relay_selected[topo.partner[s]])
    return flags
