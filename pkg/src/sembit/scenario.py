"""Network scenario construction, validation, and (de)serialization.

A scenario is an immutable snapshot of an uplink cellular deployment: base
stations with bandwidth budgets, mobile users with traffic and
semantic-coding parameters, and one link model per (user, station) pair
carrying the channel statistics and the bit-rate-to-message-rate (B2M)
mapping of that link.  Scenarios are generated from a seeded configuration
or loaded from a JSON file (see docs/scenario-format.md for the schema).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

SEMCOM = "semcom"
BITCOM = "bitcom"

# Path loss in dB at distance d meters (clamped below 1 m).
PATHLOSS_REF_DB = 34.0
PATHLOSS_EXP_DB = 40.0

# Default interference scaling: calibrated so that the default 200-user /
# 10-station / 300 m deployment keeps per-link mean SINRs centered near 0 dB
# (median ~ -2 dB) while total interference stays comparable to the noise
# floor, so adding users still degrades links.  kappa=0 is the noise-only case.
DEFAULT_KAPPA = 5e-6


class ScenarioError(ValueError):
    """A scenario or generation config violates an invariant."""


class UnreachableRateError(ScenarioError):
    """A message rate lies above the saturation point of a B2M function."""


def path_loss_db(distance_m):
    """34 + 40*log10(d [m]), with d clamped to 1 m."""
    d = np.maximum(np.asarray(distance_m, dtype=float), 1.0)
    return PATHLOSS_REF_DB + PATHLOSS_EXP_DB * np.log10(d)


# ---------------------------------------------------------------------------
# B2M functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class B2MFunction:
    """Monotone concave map from bit rate (bit/s) to message rate (msg/s).

    Two kinds are supported:

    * ``linear``: ``rate = sigma * bit_rate`` with slope ``sigma`` in msg/bit.
    * ``pwl``: concave piecewise-linear interpolation of ``points``,
      a sequence of (bit_rate, msg_rate) breakpoints starting at (0, 0),
      strictly increasing in both coordinates with non-increasing segment
      slopes.  Beyond the last breakpoint the function saturates, so message
      rates above the last breakpoint are unreachable.
    """

    kind: str = "linear"
    sigma: float | None = None
    points: tuple[tuple[float, float], ...] | None = None

    def validate(self):
        if self.kind == "linear":
            if self.sigma is None or not self.sigma > 0:
                raise ScenarioError(f"b2m.sigma must be > 0, got {self.sigma}")
            return
        if self.kind != "pwl":
            raise ScenarioError(f"b2m.kind must be 'linear' or 'pwl', got {self.kind!r}")
        pts = self.points
        if not pts or len(pts) < 2:
            raise ScenarioError("b2m.points needs at least two breakpoints")
        if pts[0] != (0.0, 0.0) and tuple(pts[0]) != (0, 0):
            raise ScenarioError("b2m.points must start at (0, 0)")
        prev_slope = math.inf
        for k in range(1, len(pts)):
            db = pts[k][0] - pts[k - 1][0]
            dm = pts[k][1] - pts[k - 1][1]
            if db <= 0 or dm <= 0:
                raise ScenarioError("b2m.points must be strictly increasing in both coordinates")
            slope = dm / db
            if slope > prev_slope * (1 + 1e-12):
                raise ScenarioError("b2m.points segment slopes must be non-increasing")
            prev_slope = slope

    @property
    def max_rate(self) -> float:
        """Largest reachable message rate (inf for the linear kind)."""
        if self.kind == "linear":
            return math.inf
        return self.points[-1][1]

    def __call__(self, bit_rate):
        if np.any(np.asarray(bit_rate) < 0):
            raise ScenarioError(f"bit_rate must be >= 0, got {bit_rate}")
        if self.kind == "linear":
            return self.sigma * np.asarray(bit_rate, dtype=float)
        xs = np.array([p[0] for p in self.points])
        ys = np.array([p[1] for p in self.points])
        # np.interp saturates at ys[-1] beyond the last breakpoint.
        return np.interp(bit_rate, xs, ys)

    def invert(self, msg_rate):
        msg = np.asarray(msg_rate, dtype=float)
        if np.any(msg < 0):
            raise ScenarioError(f"msg_rate must be >= 0, got {msg_rate}")
        if self.kind == "linear":
            return msg / self.sigma
        if np.any(msg > self.max_rate * (1 + 1e-12)):
            raise UnreachableRateError(
                f"msg_rate {msg_rate} above B2M saturation {self.max_rate}"
            )
        xs = np.array([p[0] for p in self.points])
        ys = np.array([p[1] for p in self.points])
        return np.interp(np.minimum(msg, ys[-1]), ys, xs)


def b2m_eval(f: B2MFunction, bit_rate):
    """Message rate (msg/s) achieved at the given bit rate (bit/s)."""
    return f(bit_rate)


def b2m_invert(f: B2MFunction, msg_rate):
    """Smallest bit rate (bit/s) achieving the given message rate (msg/s)."""
    return f.invert(msg_rate)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemConfig:
    slot_length_T: float = 1e-3        # s
    packet_bits_L: float = 800.0       # bit/packet
    buffer_size_F: int = 20            # packets
    latency_budget_delta0: float = 20e-3   # s
    loss_budget_theta0: float = 0.01       # ratio
    num_slots_N: int = 10_000

    def validate(self):
        if not self.slot_length_T > 0:
            raise ScenarioError(f"slot_length_T must be > 0, got {self.slot_length_T}")
        if not self.packet_bits_L > 0:
            raise ScenarioError(f"packet_bits_L must be > 0, got {self.packet_bits_L}")
        if not (isinstance(self.buffer_size_F, int) and self.buffer_size_F >= 1):
            raise ScenarioError(f"buffer_size_F must be an integer >= 1, got {self.buffer_size_F}")
        if not 0 < self.loss_budget_theta0 < 1:
            raise ScenarioError(f"loss_budget_theta0 must be in (0, 1), got {self.loss_budget_theta0}")
        if not self.latency_budget_delta0 > 0:
            raise ScenarioError(f"latency_budget_delta0 must be > 0, got {self.latency_budget_delta0}")
        if not (isinstance(self.num_slots_N, int) and self.num_slots_N >= 1):
            raise ScenarioError(f"num_slots_N must be an integer >= 1, got {self.num_slots_N}")


@dataclass(frozen=True)
class MobileUser:
    id: int
    position: tuple[float, float]      # m
    arrival_rate_lambda: float         # packets/s
    matching_degree_tau: float         # ratio in [0, 1]
    mu_match: float                    # packets/s
    mu_mismatch: float                 # packets/s
    min_rate_Mo: float                 # msg/s
    transmit_power: float = 20.0       # dBm
    beta_std: float = 0.1

    def validate(self):
        if not self.arrival_rate_lambda > 0:
            raise ScenarioError(f"user {self.id}: arrival_rate_lambda must be > 0")
        if not 0 <= self.matching_degree_tau <= 1:
            raise ScenarioError(
                f"user {self.id}: matching_degree_tau must be in [0, 1], "
                f"got {self.matching_degree_tau}"
            )
        if not self.mu_mismatch > 0:
            raise ScenarioError(f"user {self.id}: mu_mismatch must be > 0")
        if not self.mu_match > self.mu_mismatch:
            raise ScenarioError(
                f"user {self.id}: mu_match ({self.mu_match}) must exceed "
                f"mu_mismatch ({self.mu_mismatch})"
            )
        if self.min_rate_Mo < 0:
            raise ScenarioError(f"user {self.id}: min_rate_Mo must be >= 0")
        if self.beta_std < 0:
            raise ScenarioError(f"user {self.id}: beta_std must be >= 0")


@dataclass(frozen=True)
class BaseStation:
    id: int
    position: tuple[float, float]      # m
    bandwidth_budget_Z: float          # Hz

    def validate(self):
        if not self.bandwidth_budget_Z > 0:
            raise ScenarioError(f"station {self.id}: bandwidth_budget_Z must be > 0")


@dataclass(frozen=True)
class LinkModel:
    mu_id: int
    bs_id: int
    mean_sinr_db: float
    sinr_std_db: float
    b2m: B2MFunction
    rho: float                         # msg/bit, BitCom B2M coefficient

    def validate(self):
        if not 0 < self.rho < 1:
            raise ScenarioError(
                f"link ({self.mu_id}, {self.bs_id}): rho must be in (0, 1), got {self.rho}"
            )
        if self.sinr_std_db < 0:
            raise ScenarioError(f"link ({self.mu_id}, {self.bs_id}): sinr_std_db must be >= 0")
        if not math.isfinite(self.mean_sinr_db):
            raise ScenarioError(f"link ({self.mu_id}, {self.bs_id}): mean_sinr_db must be finite")
        self.b2m.validate()

    @property
    def mean_sinr_linear(self) -> float:
        return 10.0 ** (self.mean_sinr_db / 10.0)


@dataclass(frozen=True)
class Scenario:
    system: SystemConfig
    users: tuple[MobileUser, ...]
    stations: tuple[BaseStation, ...]
    links: tuple[tuple[LinkModel, ...], ...]   # links[i][j], user-major
    rng_seed: int = 0
    optimizer: dict | None = None              # optional optimizer config block

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_stations(self) -> int:
        return len(self.stations)

    def link(self, i: int, j: int) -> LinkModel:
        return self.links[i][j]

    def validate(self):
        self.system.validate()
        if not self.users:
            raise ScenarioError("scenario has no users")
        if not self.stations:
            raise ScenarioError("scenario has no stations")
        for u in self.users:
            u.validate()
        for s in self.stations:
            s.validate()
        if len(self.links) != len(self.users):
            raise ScenarioError("links must have one row per user")
        for i, row in enumerate(self.links):
            if len(row) != len(self.stations):
                raise ScenarioError(f"links row {i} must have one entry per station")
            for j, lk in enumerate(row):
                if lk.mu_id != self.users[i].id or lk.bs_id != self.stations[j].id:
                    raise ScenarioError(
                        f"links[{i}][{j}] ids ({lk.mu_id}, {lk.bs_id}) do not match "
                        f"user/station ids ({self.users[i].id}, {self.stations[j].id})"
                    )
                lk.validate()

    def mean_sinr_db_matrix(self) -> np.ndarray:
        return np.array([[lk.mean_sinr_db for lk in row] for row in self.links])


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

@dataclass
class GenerationConfig:
    """Seeded recipe for a random scenario.

    Ranges are (low, high) pairs sampled uniformly; a point value is the
    degenerate pair (v, v).
    """

    num_users: int = 200
    num_stations: int = 10
    radius_m: float = 300.0
    seed: int = 0

    bandwidth_budget_Z: float = 15e6   # Hz per station
    tx_power_dbm: float = 20.0
    noise_dbm: float = -111.45
    interference_kappa: float = DEFAULT_KAPPA
    sinr_std_db: float = 4.0

    arrival_rate: float = 1000.0       # packets/s
    mu_match: float = 1250.0           # packets/s (1 / 8e-4 s)
    mu_mismatch: float = 1000.0        # packets/s (1 / 1e-3 s)
    tau_range: tuple[float, float] = (0.6, 1.0)
    min_rate_range: tuple[float, float] = (50.0, 100.0)
    rho_range: tuple[float, float] = (2e-5, 2e-4)
    # Learned codecs only produce so many messages per second, so the
    # default rate map is the saturating concave family.
    b2m_kind: str = "pwl"
    b2m_sigma_range: tuple[float, float] = (1e-4, 4e-4)
    beta_std: float = 0.1

    system: SystemConfig = field(default_factory=SystemConfig)

    def validate(self):
        if self.num_users < 1 or self.num_stations < 1:
            raise ScenarioError("num_users and num_stations must be >= 1")
        if not self.radius_m > 0:
            raise ScenarioError(f"radius_m must be > 0, got {self.radius_m}")
        if self.interference_kappa < 0:
            raise ScenarioError("interference_kappa must be >= 0")
        for name in ("tau_range", "min_rate_range", "rho_range", "b2m_sigma_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ScenarioError(f"{name} must be a non-empty (low, high) range, got {(lo, hi)}")
        if self.b2m_kind not in ("linear", "pwl"):
            raise ScenarioError(f"b2m_kind must be 'linear' or 'pwl', got {self.b2m_kind!r}")
        self.system.validate()


def _uniform_disk(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    ang = rng.random(n) * 2.0 * np.pi
    return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)


def _pwl_from_sigma(sigma: float) -> B2MFunction:
    # Concave three-segment curve saturating well above typical rate demands.
    knots_bit = (2e6, 6e6, 12e6)
    slopes = (1.3 * sigma, 0.85 * sigma, 0.45 * sigma)
    pts = [(0.0, 0.0)]
    msg = 0.0
    prev = 0.0
    for b, s in zip(knots_bit, slopes):
        msg += s * (b - prev)
        pts.append((b, msg))
        prev = b
    return B2MFunction(kind="pwl", sigma=None, points=tuple(pts))


def mean_sinr_db_for_positions(user_pos, station_pos, tx_power_dbm, noise_dbm, kappa):
    """Per-link mean SINR (dB) from geometry, noise, and scaled interference.

    The interference seen at a station for user i's uplink is the sum of the
    received powers of every other user, scaled by ``kappa``; kappa=0 is the
    pure-noise case.
    """
    user_pos = np.asarray(user_pos, dtype=float)
    station_pos = np.asarray(station_pos, dtype=float)
    d = np.linalg.norm(user_pos[:, None, :] - station_pos[None, :, :], axis=2)
    prx_dbm = np.asarray(tx_power_dbm)[..., None] - path_loss_db(d)
    prx_mw = 10.0 ** (prx_dbm / 10.0)
    noise_mw = 10.0 ** (noise_dbm / 10.0)
    total_mw = prx_mw.sum(axis=0, keepdims=True)
    interference_mw = total_mw - prx_mw
    sinr_lin = prx_mw / (noise_mw + kappa * interference_mw)
    return 10.0 * np.log10(sinr_lin)


def generate_scenario(cfg: GenerationConfig) -> Scenario:
    """Build a random scenario; deterministic for a given config and seed."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    u, j = cfg.num_users, cfg.num_stations

    user_pos = _uniform_disk(rng, u, cfg.radius_m)
    station_pos = _uniform_disk(rng, j, cfg.radius_m)
    tau = rng.uniform(cfg.tau_range[0], cfg.tau_range[1], u)
    min_rate = rng.uniform(cfg.min_rate_range[0], cfg.min_rate_range[1], u)
    rho = rng.uniform(cfg.rho_range[0], cfg.rho_range[1], (u, j))
    sigma = rng.uniform(cfg.b2m_sigma_range[0], cfg.b2m_sigma_range[1], (u, j))

    sinr_db = mean_sinr_db_for_positions(
        user_pos, station_pos,
        np.full(u, cfg.tx_power_dbm), cfg.noise_dbm, cfg.interference_kappa,
    )
    if not np.all(np.isfinite(sinr_db)):
        raise ScenarioError("generated mean SINRs are not all finite")

    users = tuple(
        MobileUser(
            id=i,
            position=(float(user_pos[i, 0]), float(user_pos[i, 1])),
            arrival_rate_lambda=cfg.arrival_rate,
            matching_degree_tau=float(tau[i]),
            mu_match=cfg.mu_match,
            mu_mismatch=cfg.mu_mismatch,
            min_rate_Mo=float(min_rate[i]),
            transmit_power=cfg.tx_power_dbm,
            beta_std=cfg.beta_std,
        )
        for i in range(u)
    )
    stations = tuple(
        BaseStation(
            id=k,
            position=(float(station_pos[k, 0]), float(station_pos[k, 1])),
            bandwidth_budget_Z=cfg.bandwidth_budget_Z,
        )
        for k in range(j)
    )
    links = tuple(
        tuple(
            LinkModel(
                mu_id=i,
                bs_id=k,
                mean_sinr_db=float(sinr_db[i, k]),
                sinr_std_db=cfg.sinr_std_db,
                b2m=(B2MFunction(kind="linear", sigma=float(sigma[i, k]))
                     if cfg.b2m_kind == "linear" else _pwl_from_sigma(float(sigma[i, k]))),
                rho=float(rho[i, k]),
            )
            for k in range(j)
        )
        for i in range(u)
    )
    scenario = Scenario(system=cfg.system, users=users, stations=stations,
                        links=links, rng_seed=cfg.seed)
    scenario.validate()
    return scenario


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    def b2m(f: B2MFunction):
        if f.kind == "linear":
            return {"kind": "linear", "sigma": f.sigma}
        return {"kind": "pwl", "points": [list(p) for p in f.points]}

    return {
        "system": asdict(s.system),
        "users": [
            {
                "id": u.id,
                "position": list(u.position),
                "arrival_rate_lambda": u.arrival_rate_lambda,
                "matching_degree_tau": u.matching_degree_tau,
                "mu_match": u.mu_match,
                "mu_mismatch": u.mu_mismatch,
                "min_rate_Mo": u.min_rate_Mo,
                "transmit_power": u.transmit_power,
                "beta_std": u.beta_std,
            }
            for u in s.users
        ],
        "stations": [
            {"id": b.id, "position": list(b.position), "bandwidth_budget_Z": b.bandwidth_budget_Z}
            for b in s.stations
        ],
        "links": [
            {
                "mu_id": lk.mu_id,
                "bs_id": lk.bs_id,
                "mean_sinr_db": lk.mean_sinr_db,
                "sinr_std_db": lk.sinr_std_db,
                "b2m": b2m(lk.b2m),
                "rho": lk.rho,
            }
            for row in s.links
            for lk in row
        ],
        "rng_seed": s.rng_seed,
        **({"optimizer": s.optimizer} if s.optimizer is not None else {}),
    }


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ScenarioError(f"{where}: missing field '{key}'")
    return d[key]


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    sysd = _require(doc, "system", "scenario")
    try:
        system = SystemConfig(**sysd)
    except TypeError as e:
        raise ScenarioError(f"system: {e}") from None

    users = []
    for k, ud in enumerate(_require(doc, "users", "scenario")):
        try:
            ud = dict(ud)
            ud["position"] = tuple(ud["position"])
            users.append(MobileUser(**ud))
        except (TypeError, KeyError) as e:
            raise ScenarioError(f"users[{k}]: {e}") from None
    stations = []
    for k, bd in enumerate(_require(doc, "stations", "scenario")):
        try:
            bd = dict(bd)
            bd["position"] = tuple(bd["position"])
            stations.append(BaseStation(**bd))
        except (TypeError, KeyError) as e:
            raise ScenarioError(f"stations[{k}]: {e}") from None

    by_pair = {}
    for k, ld in enumerate(_require(doc, "links", "scenario")):
        try:
            b2md = ld["b2m"]
            f = B2MFunction(
                kind=b2md["kind"],
                sigma=b2md.get("sigma"),
                points=tuple(tuple(p) for p in b2md["points"]) if "points" in b2md else None,
            )
            lk = LinkModel(
                mu_id=ld["mu_id"], bs_id=ld["bs_id"],
                mean_sinr_db=ld["mean_sinr_db"], sinr_std_db=ld["sinr_std_db"],
                b2m=f, rho=ld["rho"],
            )
        except (TypeError, KeyError) as e:
            raise ScenarioError(f"links[{k}]: {e}") from None
        if (lk.mu_id, lk.bs_id) in by_pair:
            raise ScenarioError(f"links[{k}]: duplicate link for pair ({lk.mu_id}, {lk.bs_id})")
        by_pair[(lk.mu_id, lk.bs_id)] = lk

    rows = []
    for uo in users:
        row = []
        for bo in stations:
            lk = by_pair.pop((uo.id, bo.id), None)
            if lk is None:
                raise ScenarioError(f"links: missing link for pair ({uo.id}, {bo.id})")
            row.append(lk)
        rows.append(tuple(row))
    if by_pair:
        raise ScenarioError(f"links: {len(by_pair)} entries do not match any (user, station) pair")

    scenario = Scenario(
        system=system,
        users=tuple(users),
        stations=tuple(stations),
        links=tuple(rows),
        rng_seed=doc.get("rng_seed", 0),
        optimizer=doc.get("optimizer"),
    )
    scenario.validate()
    return scenario


def save_scenario(s: Scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=2)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: not valid JSON (line {e.lineno}, column {e.colno}): {e.msg}") from None
    return scenario_from_dict(doc)
