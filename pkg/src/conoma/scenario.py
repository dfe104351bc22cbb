"""Network instances: parameters, geometry, device pairing and channels.

A :class:`Scenario` bundles everything that stays fixed during one
resource-management run.  It is built from a :class:`NetworkParams` and an
integer seed and is fully reproducible from that pair.

Conventions
-----------
* Devices are indexed ``0..K-1``.  Central-cloud (CC) pairs come first, then
  one pair per UAV-mounted edge computer (EC).
* ``platform[k] == 0`` marks a CC device and ``platform[k] == e + 1`` a device
  of edge computer ``e``.
* Channels are stored in linear amplitude units (square root of the linear
  gain times the small-scale fading), so ``|h|^2 * P`` is a received power in W.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

SPEED_OF_LIGHT = 299_792_458.0


class ScenarioError(ValueError):
    """Raised for invalid parameters or geometry that cannot be realised."""


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class NetworkParams:
    """All simulation parameters of one network instance.

    Defaults are the desk-scale configuration used by the acceptance suite.
    :meth:`paper_scale` returns the full-size reference configuration.
    """

    num_bs: int = 2
    num_ec: int = 2
    num_devices: int = 8
    antennas_bs: int = 4
    antennas_ec: int = 2
    inter_bs_distance: float = 500.0  # m
    uav_altitude: float = 125.0  # m
    bandwidth: float = 10e6  # Hz
    noise_psd: float = -159.0  # dBm/Hz
    p_bs_max: float = 32.0  # dBm
    p_ec_max: float = 22.0  # dBm, residual budget above the operational power
    p_dev_max: float = 20.0  # dBm
    f_cc_max: float = 5e10  # cycles/s
    f_ec_max: float = 1e9  # cycles/s
    task_cycles: float = 1e7  # cycles
    data_bits: float = 1e4  # bits
    fronthaul_cap: float = 100e6  # bit/s
    cpu_coeff: float = 1e-28
    cpu_exp: float = 3.0
    op_power: float = 100.0  # W
    delay_budget: float = 0.05  # s
    carrier_freq: float = 5e9  # Hz
    conv_threshold: float = 0.1
    l1_delta: float = 2.0
    additional_fading: float = 0.0  # dB
    nu_grid: tuple[float, ...] = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    seed: int = 0
    num_drops: int = 20
    # channel-model details
    shadowing_bs_db: float = 8.0
    shadowing_uav_db: float = 4.0
    shadowing_d2d_db: float = 10.0
    d2d_antenna_gain_db: float = 2.5
    pair_radius: float = 100.0  # m
    min_bs_distance: float = 10.0  # m
    ec_annulus_width: float = 500.0  # m

    def __post_init__(self) -> None:
        object.__setattr__(self, "nu_grid", tuple(float(v) for v in self.nu_grid))
        self.validate()

    # -- construction helpers -------------------------------------------
    @classmethod
    def desk_scale(cls, **overrides: Any) -> "NetworkParams":
        return cls(**overrides)

    @classmethod
    def paper_scale(cls, **overrides: Any) -> "NetworkParams":
        base = dict(num_bs=4, num_ec=6, num_devices=30, antennas_bs=6, antennas_ec=2)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes: Any) -> "NetworkParams":
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        counts = dict(num_bs=self.num_bs, num_devices=self.num_devices,
                      antennas_bs=self.antennas_bs, antennas_ec=self.antennas_ec,
                      num_drops=self.num_drops)
        for name, val in counts.items():
            if int(val) != val or val < 1:
                raise ScenarioError(f"{name} must be a positive integer, got {val}")
        if int(self.num_ec) != self.num_ec or self.num_ec < 0:
            raise ScenarioError(f"num_ec must be a nonnegative integer, got {self.num_ec}")
        positive = ("inter_bs_distance", "uav_altitude", "bandwidth", "f_cc_max",
                    "f_ec_max", "task_cycles", "data_bits", "fronthaul_cap", "cpu_coeff",
                    "op_power", "delay_budget", "carrier_freq", "conv_threshold",
                    "pair_radius", "ec_annulus_width")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be strictly positive")
        if self.cpu_exp < 1:
            raise ScenarioError("cpu_exp must be >= 1")
        if not self.l1_delta > 1:
            raise ScenarioError("l1_delta must exceed 1")
        if not self.nu_grid:
            raise ScenarioError("nu_grid must be nonempty")
        for nu in self.nu_grid:
            if not 0 < nu <= 1:
                raise ScenarioError(f"time-split value {nu} outside (0, 1]")

    # -- derived quantities in SI units -------------------------------------
    @property
    def p_bs_max_w(self) -> float:
        return dbm_to_watt(self.p_bs_max)

    @property
    def p_ec_max_w(self) -> float:
        return dbm_to_watt(self.p_ec_max)

    @property
    def p_dev_max_w(self) -> float:
        return dbm_to_watt(self.p_dev_max)

    @property
    def num_pairs(self) -> int:
        return self.num_devices // 2

    @property
    def num_cc_devices(self) -> int:
        return self.num_devices - 2 * self.num_ec

    @property
    def agg_dim(self) -> int:
        return self.num_bs * self.antennas_bs + self.num_ec * self.antennas_ec

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["nu_grid"] = list(self.nu_grid)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**data)


def load_params(path: str | Path, paper_scale: bool = False) -> NetworkParams:
    """Read parameters from a YAML key/value file.

    Nested sections (``network:``, ``channel:``, ...) are flattened, so both
    flat files and grouped files are accepted.
    """
    raw = yaml.safe_load(Path(path).read_text()) or {}
    flat: dict[str, Any] = {}

    def _flatten(node: dict) -> None:
        for key, val in node.items():
            if isinstance(val, dict):
                _flatten(val)
            else:
                flat[key] = val

    _flatten(raw)
    base = NetworkParams.paper_scale() if paper_scale else NetworkParams()
    return NetworkParams.from_dict({**base.to_dict(), **flat})


def noise_power(params: NetworkParams) -> float:
    """Thermal noise power over the full bandwidth in W."""
    if not params.bandwidth > 0:
        raise ScenarioError("bandwidth must be positive")
    return 10.0 ** ((params.noise_psd + 10.0 * math.log10(params.bandwidth) - 30.0) / 10.0)


# ---------------------------------------------------------------------------
# Pathloss models
# ---------------------------------------------------------------------------


def pathloss_bs(dist_km):
    """Macro-cell pathloss in dB for a BS-device distance in km."""
    d = np.asarray(dist_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = 128.1 + 37.6 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def los_probability(elevation_deg):
    theta = np.asarray(elevation_deg, dtype=float)
    return 1.0 / (1.0 + 9.61 * np.exp(-0.16 * (theta - 9.61)))


def pathloss_uav(dist_m, elevation_deg, f_carrier: float):
    """Air-to-ground pathloss in dB with elevation-dependent LoS probability."""
    d = np.asarray(dist_m, dtype=float)
    theta = np.asarray(elevation_deg, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if np.any(theta < 0) or np.any(theta > 90):
        raise ValueError("elevation must lie in [0, 90] degrees")
    p_los = los_probability(theta)
    out = (20 * np.log10(d) + 20 * np.log10(4 * np.pi / SPEED_OF_LIGHT)
           + 20 * np.log10(f_carrier) + 6.0 * p_los + 20.0 * (1.0 - p_los))
    return float(out) if np.ndim(out) == 0 else out


def pathloss_d2d(dist_m, f_carrier: float, antenna_gain_db: float = 2.5):
    """Short-range line-of-sight device-to-device pathloss in dB.

    Free-space lower bound of the short-range outdoor model minus the antenna
    gain.
    """
    d = np.asarray(dist_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    lam = SPEED_OF_LIGHT / f_carrier
    out = 20 * np.log10(d) + 20 * np.log10(4 * np.pi / lam) - antenna_gain_db
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    bs_positions: np.ndarray  # (B, 2)
    uav_positions: np.ndarray  # (E, 3)
    device_positions: np.ndarray  # (K, 2)
    partner: np.ndarray  # (K,) index of the paired device
    is_strong: np.ndarray  # (K,) bool
    platform: np.ndarray  # (K,) 0 = CC, e + 1 = edge computer e

    @property
    def num_devices(self) -> int:
        return len(self.partner)

    @property
    def strong_set(self) -> np.ndarray:
        return np.flatnonzero(self.is_strong)

    @property
    def weak_set(self) -> np.ndarray:
        return np.flatnonzero(~self.is_strong)

    @property
    def cc_set(self) -> np.ndarray:
        return np.flatnonzero(self.platform == 0)

    @property
    def ec_sets(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.platform == e + 1) for e in range(len(self.uav_positions))]

    def check(self) -> None:
        k = np.arange(self.num_devices)
        if not np.array_equal(self.partner[self.partner], k):
            raise ScenarioError("pairing is not an involution")
        if np.any(self.partner == k):
            raise ScenarioError("device paired with itself")
        if np.any(self.is_strong == self.is_strong[self.partner]):
            raise ScenarioError("each pair needs one strong and one weak device")
        if np.any(self.platform != self.platform[self.partner]):
            raise ScenarioError("paired devices must share a platform")

    def with_labels(self, is_strong: np.ndarray) -> "Topology":
        return dataclasses.replace(self, is_strong=np.asarray(is_strong, dtype=bool))


def hex_sites(num: int, spacing: float) -> np.ndarray:
    """First ``num`` sites of a hexagonal grid ordered by ring."""
    sites = [(0.0, 0.0)]
    ring = 1
    dirs = [(math.cos(math.pi / 3 * i), math.sin(math.pi / 3 * i)) for i in range(6)]
    while len(sites) < num:
        # walk the ring: start at ring * dir[4], step along dirs
        x, y = ring * spacing * dirs[4][0], ring * spacing * dirs[4][1]
        for side in range(6):
            for _ in range(ring):
                sites.append((x, y))
                x += spacing * dirs[side][0]
                y += spacing * dirs[side][1]
        ring += 1
    return np.array(sites[:num], dtype=float)


def inside_cells(points: np.ndarray, sites: np.ndarray, spacing: float) -> np.ndarray:
    """True for points inside the union of the hexagonal cells of ``sites``.

    Each cell is the hexagon with inradius ``spacing / 2`` whose flat edges
    face the neighbouring sites.
    """
    pts = np.atleast_2d(points)
    normals = np.array([[math.cos(a), math.sin(a)] for a in (0.0, math.pi / 3, 2 * math.pi / 3)])
    rel = pts[:, None, :] - sites[None, :, :]  # (P, B, 2)
    proj = np.abs(rel @ normals.T)  # (P, B, 3)
    return np.any(np.all(proj <= spacing / 2 + 1e-9, axis=2), axis=1)


MAX_RETRIES = 10_000


def build_topology(params: NetworkParams, rng_seed: int) -> Topology:
    """Place BSs, devices and UAVs.

    CC pairs: strong device uniform in the union of the cells, weak partner
    uniform in the disk of radius ``pair_radius`` around it (also inside the
    cells).  EC pairs: strong device uniform in an annulus outside the cells,
    partner within ``pair_radius`` and also outside.  Each UAV hovers above the
    strong device of its pair.
    """
    K, E, B = params.num_devices, params.num_ec, params.num_bs
    if K % 2:
        raise ScenarioError("number of devices must be even")
    if B < 1:
        raise ScenarioError("at least one BS is required")
    if 2 * E > K:
        raise ScenarioError("each edge computer serves one pair; need K >= 2E")
    rng = np.random.default_rng(rng_seed)
    d = params.inter_bs_distance
    sites = hex_sites(B, d)
    circum = d / math.sqrt(3.0)
    grid_radius = float(np.max(np.hypot(sites[:, 0], sites[:, 1]))) + circum

    def far_from_bs(p: np.ndarray) -> bool:
        return bool(np.min(np.hypot(*(sites - p).T)) >= params.min_bs_distance)

    def draw_cell_point() -> np.ndarray:
        for _ in range(MAX_RETRIES):
            p = rng.uniform(-grid_radius, grid_radius, size=2)
            if inside_cells(p, sites, d)[0] and far_from_bs(p):
                return p
        raise ScenarioError("could not sample a point inside the cells")

    def draw_annulus_point() -> np.ndarray:
        r_in, r_out = grid_radius, grid_radius + params.ec_annulus_width
        for _ in range(MAX_RETRIES):
            rad = math.sqrt(rng.uniform(r_in ** 2, r_out ** 2))
            ang = rng.uniform(0, 2 * math.pi)
            p = np.array([rad * math.cos(ang), rad * math.sin(ang)])
            if not inside_cells(p, sites, d)[0]:
                return p
        raise ScenarioError("could not sample a point outside the cells")

    def draw_partner(anchor: np.ndarray, want_inside: bool) -> np.ndarray:
        for _ in range(MAX_RETRIES):
            rad = params.pair_radius * math.sqrt(rng.uniform())
            ang = rng.uniform(0, 2 * math.pi)
            p = anchor + rad * np.array([math.cos(ang), math.sin(ang)])
            if rad < 1.0:
                continue
            if inside_cells(p, sites, d)[0] == want_inside and far_from_bs(p):
                return p
        raise ScenarioError("pairing distance bound cannot be met")

    positions = np.zeros((K, 2))
    platform = np.zeros(K, dtype=int)
    is_strong = np.zeros(K, dtype=bool)
    partner = np.zeros(K, dtype=int)
    uav = np.zeros((E, 3))
    n_cc_pairs = (K - 2 * E) // 2
    for i in range(K // 2):
        s, w = 2 * i, 2 * i + 1
        if i < n_cc_pairs:
            anchor = draw_cell_point()
            positions[s], positions[w] = anchor, draw_partner(anchor, True)
        else:
            e = i - n_cc_pairs
            anchor = draw_annulus_point()
            positions[s], positions[w] = anchor, draw_partner(anchor, False)
            platform[[s, w]] = e + 1
            uav[e] = [anchor[0], anchor[1], params.uav_altitude]
        is_strong[s] = True
        partner[s], partner[w] = w, s
    topo = Topology(sites, uav, positions, partner, is_strong, platform)
    topo.check()
    return topo


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelSet:
    h_bs: np.ndarray  # (B, K, L_b) complex
    h_uav: np.ndarray  # (E, K, L_e) complex
    g_d2d: np.ndarray  # (K, K) complex, g[i, j] = channel from device i to device j

    @property
    def agg_dim(self) -> int:
        B, _, Lb = self.h_bs.shape
        E, _, Le = self.h_uav.shape
        return B * Lb + E * Le

    def aggregate(self) -> np.ndarray:
        """Stacked channel per device, shape (K, B*L_b + E*L_e)."""
        B, K, Lb = self.h_bs.shape
        parts = [self.h_bs.transpose(1, 0, 2).reshape(K, B * Lb)]
        if self.h_uav.shape[0]:
            E, _, Le = self.h_uav.shape
            parts.append(self.h_uav.transpose(1, 0, 2).reshape(K, E * Le))
        return np.concatenate(parts, axis=1)


def _link_geometry(topo: Topology):
    diff = topo.device_positions[None, :, :] - topo.bs_positions[:, None, :]
    d_bs = np.hypot(diff[..., 0], diff[..., 1])  # (B, K) m
    if len(topo.uav_positions):
        horiz = topo.device_positions[None, :, :] - topo.uav_positions[:, None, :2]
        d_h = np.hypot(horiz[..., 0], horiz[..., 1])
        alt = topo.uav_positions[:, 2][:, None]
        d_uav = np.sqrt(d_h ** 2 + alt ** 2)
        elev = np.degrees(np.arcsin(np.clip(alt / d_uav, 0.0, 1.0)))
    else:
        d_uav = np.zeros((0, topo.num_devices))
        elev = np.zeros((0, topo.num_devices))
    dd = topo.device_positions[:, None, :] - topo.device_positions[None, :, :]
    d_dev = np.hypot(dd[..., 0], dd[..., 1])
    return d_bs, d_uav, elev, d_dev


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def draw_channels(topology: Topology, params: NetworkParams, rng_seed: int) -> ChannelSet:
    """Pathloss, log-normal shadowing and Rayleigh fading for every link.

    All random draws are made for every device (not per label), so relabelling
    strong and weak devices leaves the raw realisation unchanged.  The extra
    attenuation ``additional_fading`` (dB) is then applied to the BS and UAV
    links of the weak devices only.
    """
    rng = np.random.default_rng(rng_seed)
    B, K = len(topology.bs_positions), topology.num_devices
    E = len(topology.uav_positions)
    Lb, Le = params.antennas_bs, params.antennas_ec
    d_bs, d_uav, elev, d_dev = _link_geometry(topology)

    small_bs = _cn(rng, (B, K, Lb))
    small_uav = _cn(rng, (E, K, Le))
    small_d2d = _cn(rng, (K, K))
    shadow_bs = rng.standard_normal((B, K)) * params.shadowing_bs_db
    shadow_uav = rng.standard_normal((E, K)) * params.shadowing_uav_db
    shadow_d2d = rng.standard_normal((K, K)) * params.shadowing_d2d_db

    pl_bs = pathloss_bs(np.maximum(d_bs, params.min_bs_distance) / 1e3) + shadow_bs
    h_bs = small_bs * np.sqrt(10.0 ** (-pl_bs / 10.0))[..., None]
    if E:
        pl_uav = pathloss_uav(d_uav, elev, params.carrier_freq) + shadow_uav
        h_uav = small_uav * np.sqrt(10.0 ** (-pl_uav / 10.0))[..., None]
    else:
        h_uav = np.zeros((0, K, Le), dtype=complex)
    off = ~np.eye(K, dtype=bool)
    d_safe = np.where(off, np.maximum(d_dev, 1.0), 1.0)
    pl_d2d = pathloss_d2d(d_safe, params.carrier_freq, params.d2d_antenna_gain_db) + shadow_d2d
    g = np.where(off, small_d2d * np.sqrt(10.0 ** (-pl_d2d / 10.0)), 0.0)

    weak = ~topology.is_strong
    scale = 10.0 ** (-params.additional_fading / 20.0)
    h_bs = h_bs.copy()
    h_uav = h_uav.copy()
    h_bs[:, weak, :] *= scale
    h_uav[:, weak, :] *= scale
    return ChannelSet(h_bs, h_uav, g)


def relabel_by_channel(topology: Topology, channels: ChannelSet) -> Topology:
    """Swap strong/weak labels of CC pairs whose weak device has the larger
    aggregate channel norm.  Edge pairs keep the device under the UAV strong."""
    norms = np.linalg.norm(channels.aggregate(), axis=1)
    is_strong = topology.is_strong.copy()
    for s in topology.strong_set:
        w = topology.partner[s]
        if topology.platform[s] == 0 and norms[w] > norms[s]:
            is_strong[s], is_strong[w] = False, True
    return topology.with_labels(is_strong)


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    params: NetworkParams
    topology: Topology
    channels: ChannelSet
    seed: int = 0
    sigma2: float = field(default=0.0)

    def __post_init__(self) -> None:
        if self.sigma2 <= 0:
            object.__setattr__(self, "sigma2", noise_power(self.params))

    # convenience views -------------------------------------------------------
    @property
    def K(self) -> int:
        return self.topology.num_devices

    @property
    def B(self) -> int:
        return len(self.topology.bs_positions)

    @property
    def E(self) -> int:
        return len(self.topology.uav_positions)

    @property
    def N(self) -> int:
        return self.channels.agg_dim

    @property
    def h(self) -> np.ndarray:
        return self.channels.aggregate()

    def bs_slice(self, b: int) -> slice:
        Lb = self.channels.h_bs.shape[2]
        return slice(b * Lb, (b + 1) * Lb)

    def uav_slice(self, e: int) -> slice:
        off = self.B * self.channels.h_bs.shape[2]
        Le = self.channels.h_uav.shape[2]
        return slice(off + e * Le, off + (e + 1) * Le)

    def association_mask(self) -> np.ndarray:
        """(K, N) bool mask of beamformer entries a device may use."""
        mask = np.zeros((self.K, self.N), dtype=bool)
        for k in range(self.K):
            p = self.topology.platform[k]
            if p == 0:
                mask[k, : self.B * self.channels.h_bs.shape[2]] = True
            else:
                mask[k, self.uav_slice(p - 1)] = True
        return mask

    def transmitter_slices(self) -> list[slice]:
        """Antenna slices of every transmitter: BSs first, then UAVs."""
        return [self.bs_slice(b) for b in range(self.B)] + [self.uav_slice(e) for e in range(self.E)]

    # serialisation -----------------------------------------------------------
    def to_json(self) -> dict:
        def cplx(a: np.ndarray) -> dict:
            return {"shape": list(a.shape), "re": a.real.ravel().tolist(),
                    "im": a.imag.ravel().tolist()}

        t = self.topology
        return {
            "format": "conoma-scenario",
            "version": 1,
            "seed": int(self.seed),
            "params": self.params.to_dict(),
            "topology": {
                "bs_positions": t.bs_positions.tolist(),
                "uav_positions": t.uav_positions.tolist(),
                "device_positions": t.device_positions.tolist(),
                "partner": t.partner.tolist(),
                "is_strong": t.is_strong.tolist(),
                "platform": t.platform.tolist(),
            },
            "channels": {
                "h_bs": cplx(self.channels.h_bs),
                "h_uav": cplx(self.channels.h_uav),
                "g_d2d": cplx(self.channels.g_d2d),
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Scenario":
        if doc.get("format") != "conoma-scenario":
            raise ScenarioError("not a scenario document")

        def cplx(d: dict) -> np.ndarray:
            re = np.asarray(d["re"], dtype=float)
            im = np.asarray(d["im"], dtype=float)
            return (re + 1j * im).reshape(d["shape"])

        p = doc["params"]
        params = NetworkParams.from_dict(p)
        t = doc["topology"]
        E = params.num_ec
        topo = Topology(
            np.asarray(t["bs_positions"], dtype=float).reshape(-1, 2),
            np.asarray(t["uav_positions"], dtype=float).reshape(E, 3),
            np.asarray(t["device_positions"], dtype=float).reshape(-1, 2),
            np.asarray(t["partner"], dtype=int),
            np.asarray(t["is_strong"], dtype=bool),
            np.asarray(t["platform"], dtype=int),
        )
        topo.check()
        c = doc["channels"]
        ch = ChannelSet(cplx(c["h_bs"]), cplx(c["h_uav"]), cplx(c["g_d2d"]))
        return cls(params, topo, ch, seed=int(doc.get("seed", 0)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_json(json.loads(Path(path).read_text()))

    def with_params(self, **changes: Any) -> "Scenario":
        """Same geometry and channels, different non-channel parameters."""
        return dataclasses.replace(self, params=self.params.replace(**changes), sigma2=0.0)

    def with_fading(self, db: float) -> "Scenario":
        """Same drop at another additional fading of the weak devices' links."""
        scale = 10.0 ** (-(db - self.params.additional_fading) / 20.0)
        weak = ~self.topology.is_strong
        h_bs = self.channels.h_bs.copy()
        h_uav = self.channels.h_uav.copy()
        h_bs[:, weak, :] *= scale
        h_uav[:, weak, :] *= scale
        return dataclasses.replace(self, params=self.params.replace(additional_fading=float(db)),
                                   channels=ChannelSet(h_bs, h_uav, self.channels.g_d2d.copy()),
                                   sigma2=0.0)


def make_scenario(params: NetworkParams, seed: int | None = None) -> Scenario:
    """Build a reproducible scenario from parameters and a drop seed.

    The same seed yields the same geometry and raw fading for every value of
    ``additional_fading``, so sweeps over it are paired.
    """
    seed = params.seed if seed is None else int(seed)
    topo_seed, chan_seed = np.random.SeedSequence(seed).generate_state(2)
    topo0 = build_topology(params, int(topo_seed))
    raw = draw_channels(topo0, params.replace(additional_fading=0.0), int(chan_seed))
    topo = relabel_by_channel(topo0, raw)
    ch = draw_channels(topo, params, int(chan_seed))
    return Scenario(params, topo, ch, seed=seed)
