"""Assembly of the per-iteration convex program.

Given the previous iterate (operating point, l1 weights, multipliers) the
nonconvex resource-management problem is replaced by a convex cone program.
This module builds that program, maps solutions back to a
:class:`~conoma.phy.ResourceState` and, for testing, maps a state into the
program's variable space.

Program units
-------------
The program works in scaled units to keep the cones well conditioned:
rates in Mbit/s, computation in Gcycles/s, delays in ms, beamformers in
sqrt(W), powers in W.  Channels are divided by the noise amplitude so that
every interference-plus-noise term starts at 1.  The objective is the sum of
natural logs of the device rates in Mbit/s.

Phases and schemes
------------------
``phase="relaxed"`` keeps the weighted-l1 selection variables of the weak
devices (cooperative NOMA only) and the BS clustering variables with the
convexified fronthaul constraint.  ``phase="fixed"`` hard-codes the link
choice and clusters stored in the previous state: direct-served weak devices
lose their relay beam, relay-served ones their direct beam, non-relaying
strong devices their D2D power, and the fronthaul constraint becomes linear.

``scheme`` is one of ``"conoma"`` (cooperative NOMA), ``"noma"`` (direct
links, one SIC layer at the strong device) or ``"sdma"`` (direct links, no
SIC).

Scope
-----
``platform=None`` assembles the centralized program over all devices.  An
integer platform id (0 for the cloud, ``e + 1`` for edge computer ``e``)
restricts the variables to that platform's devices; interference from other
platforms enters as the frozen constants in ``foreign``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conic.program import ConeProgram, LinExpr, ProgramBuilder, lin_sum
from .phy import FAMILIES, ResourceState, fronthaul_delay
from .scenario import Scenario
from .sparsity import worst_case_fronthaul_delay

RATE_UNIT = 1e6  # bit/s per program unit
FREQ_UNIT = 1e9  # cycles/s per program unit
TIME_UNIT = 1e-3  # s per program unit
RATE_FLOOR = 1e-6  # Mbit/s, i.e. 1 bit/s
RESTORATION_PENALTY = 1.0  # objective units per ms of delay slack (1e3 per s)
SCHEMES = ("conoma", "noma", "sdma")
PHASES = ("relaxed", "fixed")
LN2 = math.log(2.0)


class InfeasibleAssembly(ValueError):
    """The program cannot be feasible (for example a nonpositive delay budget)."""


@dataclass
class ForeignTerms:
    """Interference frozen at the values received from other platforms.

    ``interference[i]`` is the noise-normalised received power at device ``i``
    of all foreign beams; ``d2d[w]`` the normalised D2D power at weak device
    ``w`` from foreign strong devices.
    """

    interference: np.ndarray
    d2d: np.ndarray

    @classmethod
    def zeros(cls, K: int) -> "ForeignTerms":
        return cls(np.zeros(K), np.zeros(K))


@dataclass
class Assembly:
    program: ConeProgram
    scenario: Scenario
    devices: np.ndarray  # devices whose variables are in the program
    phase: str
    scheme: str
    nu: float
    decode_flags: np.ndarray
    fronthaul_delay: np.ndarray  # s, the Lambda used in the delay rows
    sic_source: str
    restoration: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def names(self) -> dict:
        return self.program.names

    # -- solution mapping -------------------------------------------------------
    def extract(self, x: np.ndarray, prev: ResourceState) -> ResourceState:
        """New state: program variables written back, everything outside the
        program's device scope left at ``prev``."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("solution vector contains NaN or Inf")
        nm = self.names
        st = prev.copy()
        own = self.devices

        def take(name, scale=1.0):
            idx = nm[name]
            vals = np.where(idx >= 0, x[np.maximum(idx, 0)], 0.0)
            return vals * scale

        for beam in ("q_direct", "q_relay"):
            idx = nm[beam]
            vals = np.where(idx >= 0, x[np.maximum(idx, 0)], 0.0)
            q = vals[..., 0] + 1j * vals[..., 1]
            getattr(st, beam)[own] = q[own]
        for name, scale in (("p", 1.0), ("r", RATE_UNIT), ("r_direct", RATE_UNIT),
                            ("r_relay1", RATE_UNIT), ("r_relay2", RATE_UNIT), ("r_aux", RATE_UNIT),
                            ("f", FREQ_UNIT), ("z_direct", 1.0), ("z_relay", 1.0)):
            getattr(st, name)[own] = take(name, scale)[own]
        if self.phase == "relaxed":
            zb = take("z_bs")
            if st.z_bs is None:
                st.z_bs = np.zeros((self.scenario.B, self.scenario.K))
            st.z_bs[:, own] = zb[:, own]
        gamma = {k: np.array(v, dtype=float) for k, v in prev.gamma.items()}
        for fam in FAMILIES:
            g = gamma.setdefault(fam, np.zeros(self.scenario.K))
            g[own] = take("gamma_" + fam)[own]
        st.gamma = gamma
        st.nu = self.nu
        return st

    def inject(self, state: ResourceState, local: bool = False) -> np.ndarray:
        """Program vector representing ``state``; auxiliary variables are set
        to their tightest values (for example the largest feasible SINR
        auxiliaries under the current multipliers).

        With ``local=True`` the state holds only this platform's beams and the
        frozen foreign terms of the program are added to the interference.
        """
        from .fp import max_feasible_gamma

        nm = self.names
        x = np.zeros(self.program.n)

        def put(name, vals):
            idx = nm[name]
            mask = idx >= 0
            x[idx[mask]] = np.asarray(vals)[mask]

        for beam in ("q_direct", "q_relay"):
            q = getattr(state, beam)
            put(beam, np.stack([q.real, q.imag], axis=-1))
        put("p", state.p)
        put("sqrt_p", np.sqrt(np.maximum(state.p, 0.0)))
        for name in ("r", "r_direct", "r_relay1", "r_relay2", "r_aux"):
            put(name, getattr(state, name) / RATE_UNIT)
        put("f", state.f / FREQ_UNIT)
        put("z_direct", state.z_direct)
        put("z_relay", state.z_relay)
        if state.z_bs is not None:
            put("z_bs", state.z_bs)
        a = self.meta["a"]
        extra = None
        if local:
            fr = self.meta["foreign"]
            extra = (fr.interference * self.scenario.sigma2, fr.d2d * self.scenario.sigma2)
        gam = max_feasible_gamma(state, self.scenario, self.decode_flags, a, self.sic_source, extra)
        for fam in FAMILIES:
            put("gamma_" + fam, np.maximum(gam[fam], 0.0))
        prm = self.scenario.params
        with np.errstate(divide="ignore"):
            put("t_comp", 1e3 * (prm.task_cycles / FREQ_UNIT) / (state.f / FREQ_UNIT))
            put("t_trans", 1e3 * (prm.data_bits / RATE_UNIT) / (state.r / RATE_UNIT))
        sc = self.scenario
        q2 = np.abs(state.q_direct) ** 2 + np.abs(state.q_relay) ** 2
        if "ec_tx" in nm:
            for e in range(sc.E):
                if nm["ec_tx"][e] >= 0:
                    mem = sc.topology.platform == e + 1
                    x[nm["ec_tx"][e]] = q2[:, sc.uav_slice(e)].sum()
                    x[nm["ec_comp"][e]] = (state.f[mem].sum() / FREQ_UNIT) ** prm.cpu_exp
        return x


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _proj(hc: np.ndarray, cols: np.ndarray):
    """Real and imaginary parts of ``h^H q`` as affine expressions.

    ``hc`` is the conjugate-free channel ``h`` (length N, complex) and ``cols``
    an (N, 2) array of (re, im) columns with -1 for entries fixed at zero.
    """
    mask = cols[:, 0] >= 0
    if not mask.any():
        return None
    hr, hi = hc.real[mask], hc.imag[mask]
    cr, ci = cols[mask, 0], cols[mask, 1]
    # conj(h) q = (hr - i hi)(qr + i qi) = hr qr + hi qi + i (hr qi - hi qr)
    re = LinExpr(np.concatenate([cr, ci]), np.concatenate([hr, hi]))
    im = LinExpr(np.concatenate([ci, cr]), np.concatenate([hr, -hi]))
    return re, im


def _beam_entries(cols: np.ndarray, dims: slice | np.ndarray | None = None) -> list:
    """All scalar variable expressions of a beam (optionally sub-block)."""
    c = cols if dims is None else cols[dims]
    flat = c.reshape(-1)
    return [LinExpr.var(int(i)) for i in flat if i >= 0]


def _device_dims(scenario: Scenario, k: int, clusters: np.ndarray | None) -> np.ndarray:
    """Boolean mask over the aggregate antenna index usable by device ``k``."""
    topo = scenario.topology
    mask = np.zeros(scenario.N, dtype=bool)
    plat = topo.platform[k]
    if plat == 0:
        for b in range(scenario.B):
            if clusters is None or clusters[b, k]:
                mask[scenario.bs_slice(b)] = True
    else:
        mask[scenario.uav_slice(plat - 1)] = True
    return mask


def platform_devices(scenario: Scenario, platform: int | None) -> np.ndarray:
    if platform is None:
        return np.arange(scenario.K)
    return np.flatnonzero(scenario.topology.platform == platform)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def assemble(scenario: Scenario, prev: ResourceState, nu: float, *, phase: str = "relaxed",
             scheme: str = "conoma", platform: int | None = None, decode_flags=None,
             foreign: ForeignTerms | None = None, restoration: bool = False,
             penalty: float = RESTORATION_PENALTY) -> Assembly:
    """Build the convex program around the operating point ``prev``.

    ``prev`` must carry the multipliers ``a`` (dict by SINR family) and, in the
    relaxed phase, the l1 weights ``beta_direct``, ``beta_relay``, ``beta_bs``.
    ``decode_flags`` defaults to the scheme's rule.
    """
    if phase not in PHASES:
        raise ValueError(f"unknown phase {phase}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme}")
    if not 0 < nu <= 1:
        raise ValueError("time split must lie in (0, 1]")
    sc = scenario
    prm = sc.params
    topo = sc.topology
    K, B, N = sc.K, sc.B, sc.N
    own_mask = np.zeros(K, dtype=bool)
    own_mask[platform_devices(sc, platform)] = True
    own = np.flatnonzero(own_mask)
    foreign = foreign or ForeignTerms.zeros(K)
    strong = topo.is_strong
    weak = ~strong
    partner = topo.partner
    # without a second slot the relay link carries nothing; leaving its
    # variables in would pin them at zero and remove the program's interior
    relay_capable = scheme == "conoma" and nu < 1
    selection = relay_capable and phase == "relaxed"
    sic_source = "direct" if scheme == "noma" else "relay"

    if decode_flags is None:
        from .phy import decode_flags_hard, decode_flags_relaxed

        if scheme == "noma":
            decode_flags = strong.copy()
        elif scheme == "sdma":
            decode_flags = np.zeros(K, dtype=bool)
        elif phase == "relaxed":
            decode_flags = decode_flags_relaxed(prev, sc)
        else:
            decode_flags = decode_flags_hard(prev.relay_selected, sc)
    decode = np.asarray(decode_flags, dtype=bool)

    if phase == "fixed":
        if relay_capable and prev.relay_selected is None:
            raise ValueError("fixed phase needs relay_selected in the previous state")
        relay_sel = (np.asarray(prev.relay_selected, dtype=bool) & weak) if relay_capable \
            else np.zeros(K, dtype=bool)
    else:
        relay_sel = None
    clusters = None if prev.clusters is None else np.asarray(prev.clusters, dtype=bool)

    # which beams exist
    has_direct = np.ones(K, dtype=bool)
    has_relay = weak.copy() if relay_capable else np.zeros(K, dtype=bool)
    if relay_sel is not None:
        has_direct = ~relay_sel
        has_relay = relay_sel.copy()
    relaying_strong = np.zeros(K, dtype=bool)  # strong devices with D2D power
    if relay_capable and nu < 1:
        for s in np.flatnonzero(strong):
            relaying_strong[s] = True if relay_sel is None else bool(relay_sel[partner[s]])

    # fronthaul delay bound
    if phase == "fixed":
        links = clusters if clusters is not None else np.ones((B, K), dtype=bool)
        lam = fronthaul_delay(sc, links)
    else:
        lam = worst_case_fronthaul_delay(prev, sc, None if clusters is None else
                                         _active_links(prev, sc) & clusters)
    budget_ms = (prm.delay_budget - lam) / TIME_UNIT
    if np.any(budget_ms[own] <= 0):
        bad = own[budget_ms[own] <= 0]
        raise InfeasibleAssembly(f"delay budget exhausted by fronthaul delay for devices {bad.tolist()}")

    sig = math.sqrt(sc.sigma2)
    h = sc.h / sig  # noise-normalised channels
    g2 = np.abs(sc.channels.g_d2d) ** 2 / sc.sigma2
    # multipliers n / I scale with the noise amplitude when channels are normalised
    a = {fam: np.asarray(prev.a[fam]) * sig for fam in FAMILIES}
    W = prm.bandwidth / RATE_UNIT

    bld = ProgramBuilder()
    neg = lambda shape: np.full(shape, -1, dtype=np.int64)  # noqa: E731
    names = {n: neg(K) for n in ("p", "sqrt_p", "r", "r_direct", "r_relay1", "r_relay2", "r_aux",
                                 "z_direct", "z_relay", "f", "t_comp", "t_trans", "slack",
                                 "gamma_strong", "gamma_relay", "gamma_direct", "gamma_d2d")}
    names["q_direct"] = neg((K, N, 2))
    names["q_relay"] = neg((K, N, 2))
    names["z_bs"] = neg((B, K))
    names["ec_tx"] = neg(sc.E)
    names["ec_comp"] = neg(sc.E)

    def new(name, k=None, count=1):
        idx = bld.add_vars(name, count) if count > 1 else bld.add_vars(name, 1)[0]
        if k is not None:
            names[name][k] = idx
        return idx

    nonneg: list[LinExpr] = []  # collected into one nonnegative block
    V = LinExpr.var

    # beamformer variables
    for k in own:
        dims = np.flatnonzero(_device_dims(sc, k, clusters))
        for beam, present in (("q_direct", has_direct[k]), ("q_relay", has_relay[k])):
            if not present or not len(dims):
                continue
            cols = bld.add_vars(beam, 2 * len(dims)).reshape(len(dims), 2)
            names[beam][k, dims] = cols
    # per-device scalars
    for k in own:
        new("r", k)
        nonneg.append(V(names["r"][k]) - RATE_FLOOR)
        bld.maximize_log(int(names["r"][k]))
        new("f", k)
        nonneg.append(V(names["f"][k]))
        new("t_comp", k)
        new("t_trans", k)
        if strong[k]:
            new("gamma_strong", k)
            if relaying_strong[k]:
                new("p", k)
                new("sqrt_p", k)
                nonneg.append(V(names["p"][k]))
                nonneg.append(prm.p_dev_max_w - V(names["p"][k]))
                nonneg.append(V(names["sqrt_p"][k]))
                bld.add_block("rsoc", [LinExpr.constant(0.5), V(names["p"][k]), V(names["sqrt_p"][k])],
                              tag=f"sqrtp_{k}")
            continue
        s = partner[k]
        if has_direct[k]:
            new("r_direct", k)
            new("gamma_direct", k)
            nonneg.append(V(names["r_direct"][k]))
        sic_stream = (scheme == "noma") or has_relay[k]
        if sic_stream:
            new("r_relay1", k)
            new("gamma_relay", k)
            nonneg.append(V(names["r_relay1"][k]))
        if has_relay[k]:
            new("r_relay2", k)
            nonneg.append(V(names["r_relay2"][k]))
            if relaying_strong[s]:
                new("gamma_d2d", k)
            else:
                nonneg.append(-V(names["r_relay2"][k]))  # no second slot
    for k in own:
        if weak[k] and selection:
            for nm in ("r_aux", "z_direct", "z_relay"):
                new(nm, k)
                nonneg.append(V(names[nm][k]))
    if restoration:
        for k in own:
            new("slack", k)
            nonneg.append(V(names["slack"][k]))
            bld.maximize_linear(LinExpr.var(int(names["slack"][k]), -penalty))

    # -- rate rows (exponential cones) -------------------------------------------
    def rate_row(rcol, gcol, share, tag):
        # r <= share * W * log2(1 + gamma)  <=>  (r ln2 / (share W), 1, 1 + gamma) in K_exp
        bld.add_block("exp", [LinExpr.var(int(rcol), LN2 / (share * W)), LinExpr.constant(1.0),
                              V(int(gcol)) + 1.0], tag=tag)

    for k in own:
        if strong[k]:
            rate_row(names["r"][k], names["gamma_strong"][k], nu, f"rate_strong_{k}")
            continue
        if names["r_direct"][k] >= 0:
            rate_row(names["r_direct"][k], names["gamma_direct"][k], nu, f"rate_direct_{k}")
        if names["r_relay1"][k] >= 0:
            rate_row(names["r_relay1"][k], names["gamma_relay"][k], nu, f"rate_relay_{k}")
        if names["gamma_d2d"][k] >= 0:
            rate_row(names["r_relay2"][k], names["gamma_d2d"][k], 1.0 - nu, f"rate_d2d_{k}")

    # -- weak device rate composition --------------------------------------------
    for k in own:
        if strong[k]:
            continue
        rw = V(names["r"][k])
        if selection:
            raux = V(names["r_aux"][k])
            nonneg.append(V(names["r_relay1"][k]) - raux)
            nonneg.append(V(names["r_relay2"][k]) - raux)
            zd, zr = V(names["z_direct"][k]), V(names["z_relay"][k])
            rd = V(names["r_direct"][k])
            nonneg.append(1.0 - zd - zr)
            zt_d, zt_r = float(prev.z_direct[k]), float(prev.z_relay[k])
            rt_d = float(prev.r_direct[k]) / RATE_UNIT
            rt_aux = float(prev.r_aux[k]) / RATE_UNIT
            sd, sr = zt_d + rt_d, zt_r + rt_aux
            lin = (-4.0 * rw + (sd * sd + sr * sr) + 2 * sd * (zd + rd - sd) + 2 * sr * (zr + raux - sr))
            bld.add_block("rsoc", [LinExpr.constant(0.5), lin, zd - rd, zr - raux], tag=f"selection_{k}")
            # weighted l1 caps on the beam powers
            for beam, zexpr, beta in (("q_direct", zd, prev.beta_direct[k]),
                                      ("q_relay", zr, prev.beta_relay[k])):
                ent = _beam_entries(names[beam][k])
                if ent:
                    bld.add_block("rsoc", [zexpr, LinExpr.constant(0.5 / float(beta))] + ent,
                                  tag=f"l1_{beam}_{k}")
        else:
            if names["r_direct"][k] >= 0:
                nonneg.append(V(names["r_direct"][k]) - rw)
            if names["r_relay1"][k] >= 0:
                nonneg.append(V(names["r_relay1"][k]) - rw)
            if names["r_relay2"][k] >= 0:
                nonneg.append(V(names["r_relay2"][k]) - rw)

    # -- SINR rows (quadratic transform) -------------------------------------------
    def combined_cols(j):
        """Column arrays of the beams carrying device j's message."""
        out = [names["q_direct"][j]]
        if weak[j]:
            out.append(names["q_relay"][j])
        return out

    def interference_entries(obs, interferers, amp):
        ent = []
        for j in interferers:
            if not own_mask[j]:
                continue
            parts = [pr for pr in (_proj(h[obs], c) for c in combined_cols(j)) if pr is not None]
            if not parts:
                continue
            re = lin_sum([p[0] for p in parts]) * amp
            im = lin_sum([p[1] for p in parts]) * amp
            ent.extend([re, im])
        return ent

    def g_row(obs, num_cols, interferers, a_val, gcol, tag):
        a_val = complex(a_val)
        amp = abs(a_val)
        pr = _proj(h[obs], num_cols)
        num = LinExpr()
        if pr is not None:
            num = pr[0] * (2 * a_val.real) + pr[1] * (2 * a_val.imag)
        head = num - V(int(gcol)) - amp * amp * (1.0 + float(foreign.interference[obs]))
        ent = interference_entries(obs, interferers, amp) if amp > 0 else []
        bld.add_block("rsoc", [LinExpr.constant(0.5), head] + ent, tag=tag)

    idx = np.arange(K)
    for k in own:
        if strong[k]:
            w = partner[k]
            inter = [j for j in idx if (strong[j] and j != k) or (weak[j] and not (decode[k] and j == w))]
            g_row(k, names["q_direct"][k], inter, a["strong"][k], names["gamma_strong"][k], f"sinr_strong_{k}")
            continue
        s = partner[k]
        inter = [j for j in idx if strong[j] or (weak[j] and j != k)]
        if names["gamma_direct"][k] >= 0:
            g_row(k, names["q_direct"][k], inter, a["direct"][k], names["gamma_direct"][k], f"sinr_direct_{k}")
        if names["gamma_relay"][k] >= 0:
            num_cols = names["q_direct"][k] if sic_source == "direct" else names["q_relay"][k]
            g_row(s, num_cols, inter, a["relay"][k], names["gamma_relay"][k], f"sinr_relay_{k}")
        if names["gamma_d2d"][k] >= 0:
            av = float(np.real(a["d2d"][k]))
            head = LinExpr.var(int(names["sqrt_p"][s]), 2 * av * math.sqrt(g2[s, k])) \
                - V(int(names["gamma_d2d"][k])) - av * av * (1.0 + float(foreign.d2d[k]))
            terms = [LinExpr.var(int(names["p"][j]), -av * av * g2[j, k])
                     for j in idx if strong[j] and j != s and names["p"][j] >= 0]
            nonneg.append(lin_sum([head] + terms))

    # -- power and computation -----------------------------------------------------
    plat_ids = sorted(set(topo.platform[own].tolist()))
    if 0 in plat_ids:
        cc = own[topo.platform[own] == 0]
        nonneg.append(prm.f_cc_max / FREQ_UNIT - lin_sum([V(names["f"][k]) for k in cc]))
        for b in range(B):
            ent = []
            for k in cc:
                for beam in ("q_direct", "q_relay"):
                    ent.extend(_beam_entries(names[beam][k], sc.bs_slice(b)))
            if ent:
                bld.add_block("soc", [LinExpr.constant(math.sqrt(prm.p_bs_max_w))] + ent, tag=f"power_bs_{b}")
    o_scaled = prm.cpu_coeff * FREQ_UNIT ** prm.cpu_exp
    for e in range(sc.E):
        if e + 1 not in plat_ids:
            continue
        mem = own[topo.platform[own] == e + 1]
        fsum = lin_sum([V(names["f"][k]) for k in mem])
        nonneg.append(prm.f_ec_max / FREQ_UNIT - fsum)
        tx = new("ec_tx")
        comp = new("ec_comp")
        names["ec_tx"][e], names["ec_comp"][e] = tx, comp
        ent = []
        for k in mem:
            for beam in ("q_direct", "q_relay"):
                ent.extend(_beam_entries(names[beam][k]))
        bld.add_block("rsoc", [LinExpr.constant(0.5), V(tx)] + ent, tag=f"power_ec_tx_{e}")
        bld.add_block("pow", [V(comp), LinExpr.constant(1.0), fsum], alpha=1.0 / prm.cpu_exp,
                      tag=f"power_ec_comp_{e}")
        nonneg.append(prm.p_ec_max_w - V(tx) - o_scaled * V(comp))

    # -- delay rows ------------------------------------------------------------------
    F_g = prm.task_cycles / FREQ_UNIT
    D_m = prm.data_bits / RATE_UNIT
    ms = 1.0 / TIME_UNIT
    for k in own:
        t1, t2 = V(names["t_comp"][k]), V(names["t_trans"][k])
        bld.add_block("rsoc", [t1, V(names["f"][k]), LinExpr.constant(math.sqrt(2 * ms * F_g))],
                      tag=f"delay_comp_{k}")
        bld.add_block("rsoc", [t2, V(names["r"][k]), LinExpr.constant(math.sqrt(2 * ms * D_m))],
                      tag=f"delay_trans_{k}")
        row = float(budget_ms[k]) - t1 - t2
        if restoration:
            row = row + V(names["slack"][k])
        nonneg.append(row)

    # -- fronthaul ---------------------------------------------------------------------
    cc_own = own[topo.platform[own] == 0]
    R = prm.fronthaul_cap / RATE_UNIT
    if len(cc_own):
        for b in range(B):
            members = [k for k in cc_own if clusters is None or clusters[b, k]]
            if not members:
                continue
            if phase == "fixed":
                nonneg.append(R - lin_sum([V(names["r"][k]) for k in members]))
                continue
            zt = prev.z_bs if prev.z_bs is not None else np.ones((B, K))
            ent, lin = [], []
            for k in members:
                zc = new("z_bs")
                names["z_bs"][b, k] = zc
                nonneg.append(V(zc))
                nonneg.append(1.0 - V(zc))
                d = float(zt[b, k]) - float(prev.r[k]) / RATE_UNIT
                zk, rk = V(zc), V(names["r"][k])
                ent.append(zk + rk)
                lin.append((zk - rk) * (2 * d) - d * d)
                beams = []
                for beam in ("q_direct", "q_relay"):
                    beams.extend(_beam_entries(names[beam][k], sc.bs_slice(b)))
                beta = float(prev.beta_bs[b, k]) if prev.beta_bs is not None else 1.0 / prm.l1_delta
                if beams:
                    bld.add_block("rsoc", [zk, LinExpr.constant(0.5 / beta)] + beams, tag=f"cluster_{b}_{k}")
            bld.add_block("rsoc", [LinExpr.constant(0.5), lin_sum(lin) + 4 * R] + ent, tag=f"fronthaul_{b}")

    bld.add_block("nonneg", nonneg, tag="linear")
    for k, v in names.items():
        bld.set_name(k, v)
    prog = bld.build()
    return Assembly(prog, sc, own, phase, scheme, float(nu), decode, lam, sic_source, restoration,
                    meta=dict(a=prev.a, foreign=foreign, budget_ms=budget_ms))


def _active_links(state: ResourceState, scenario: Scenario) -> np.ndarray:
    from .phy import active_bs_links

    return active_bs_links(state, scenario)
