"""Joint user-association, mode-selection, and bandwidth-allocation solver.

The pipeline fixes, per (user, station, mode), the minimum bandwidth that
simultaneously meets the rate, latency, and loss requirements; solves the
resulting association/mode problem by a Lagrangian dual subgradient loop
whose per-iteration assignment is projected back to feasibility with a
preference-list repair heuristic; and finally redistributes each station's
leftover bandwidth across its associated users by greedy marginal-rate
allocation, which is exact for the separable concave (piecewise-linear)
objective.  Four baseline schemes (max-SINR association combined with
threshold mode selection and water-filling or even-split allocation) share
the same assignment container so everything downstream can audit them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import SEMCOM, BITCOM, Scenario, UnreachableRateError
from .queueing import (
    DegenerateQueueError, UnstableQueueError,
    link_metrics, mean_message_rate, scq_latency,
)


class OptimizationError(Exception):
    pass


@dataclass
class OptimizerConfig:
    max_iterations: int = 200
    stepsize: float = 1e-6              # epsilon(l) = stepsize / l
    tolerance: float = 1e-9             # stop when max |eta change| drops below
    bisection_resolution_hz: float = 1e3
    bracket_factor: float = 10.0        # search minimum z on [0, factor * Z_j]
    ms1_tau_threshold: float = 0.8
    ms2_sinr_threshold_db: float = 6.0
    variance_model: str = "mixture"

    @classmethod
    def from_dict(cls, doc: dict | None) -> "OptimizerConfig":
        return cls(**doc) if doc else cls()


@dataclass
class BandwidthThresholds:
    """Per-(user, station) minimum bandwidths; +inf marks infeasible options.

    ``z_s_th``/``z_b_th`` are the componentwise maxima of the rate, latency,
    and loss minima for the semantic and bit modes; ``rate_s_th``/``rate_b_th``
    hold the mean message rate achieved exactly at those thresholds.
    """

    z_s_rate: np.ndarray
    z_s_latency: np.ndarray
    z_s_loss: np.ndarray
    z_s_th: np.ndarray
    z_b_rate: np.ndarray
    z_b_latency: np.ndarray
    z_b_loss: np.ndarray
    z_b_th: np.ndarray
    rate_s_th: np.ndarray
    rate_b_th: np.ndarray


@dataclass
class DualState:
    multipliers_eta: np.ndarray
    iteration: int
    stepsize: float
    xi: np.ndarray | None = None
    history: list = field(default_factory=list)

    def stepsize_at(self, l: int) -> float:
        return self.stepsize / l


@dataclass
class Assignment:
    x: np.ndarray                       # (U, J) 0/1
    y: np.ndarray                       # (U, J) 0/1, meaningful where x = 1
    z: np.ndarray                       # (U, J) Hz
    unserved: list[int]
    objective: float = 0.0
    scheme: str = "proposed"
    trace: list = field(default_factory=list)

    def mode_of(self, i: int, j: int) -> str:
        return SEMCOM if self.y[i, j] else BITCOM

    def station_of(self, i: int) -> int | None:
        js = np.flatnonzero(self.x[i])
        return int(js[0]) if js.size else None


@dataclass
class ConstraintViolation:
    user: int | None
    station: int | None
    kind: str                           # latency | loss | min-rate | single-bs | bandwidth
    value: float
    bound: float


@dataclass
class ObjectiveReport:
    total_rate: float                   # over all served links
    compliant_rate: float               # over served links meeting every constraint
    per_user_rate: np.ndarray
    violations: list[ConstraintViolation]
    unserved: list[int]


# ---------------------------------------------------------------------------
# Minimum-bandwidth thresholds
# ---------------------------------------------------------------------------

def min_bandwidth_rate(user, link, mode) -> float:
    """Smallest z meeting the user's minimum message rate in the given mode.

    Inverts the mode's rate map at the required message rate and divides by
    the mean-SINR spectral efficiency; +inf when the target is unreachable.
    """
    if user.min_rate_Mo == 0.0:
        return 0.0
    eff = math.log2(1.0 + link.mean_sinr_linear)
    if eff <= 0.0:
        return math.inf
    if mode == BITCOM:
        return user.min_rate_Mo / (link.rho * eff)
    tau = user.matching_degree_tau
    if tau <= 0.0:
        return math.inf
    try:
        bitrate = link.b2m.invert(user.min_rate_Mo / tau)
    except UnreachableRateError:
        return math.inf
    return float(bitrate) / eff


def min_bandwidth_qos(user, link, mode, target: str, sys, cfg: OptimizerConfig | None = None,
                      z_hi: float | None = None) -> float:
    """Smallest z meeting the latency or loss budget, by bisection.

    Loss and latency are non-increasing in z, so the bracket [0, z_hi]
    (failing below, satisfying above) shrinks to the configured resolution;
    the satisfying endpoint is returned.  +inf when even z_hi fails, or when
    the coding-stage delay alone already exceeds the latency budget in
    semantic mode.
    """
    cfg = cfg or OptimizerConfig()
    if target not in ("latency", "loss"):
        raise OptimizationError(f"target must be 'latency' or 'loss', got {target!r}")
    if mode == SEMCOM:
        try:
            scq = scq_latency(user, cfg.variance_model)
        except UnstableQueueError:
            return math.inf
        if target == "latency" and scq.latency_S1 > sys.latency_budget_delta0:
            return math.inf
    if z_hi is None:
        z_hi = cfg.bracket_factor * 15e6
    bound = sys.latency_budget_delta0 if target == "latency" else sys.loss_budget_theta0

    evals = []

    def satisfied(z):
        try:
            m = link_metrics(user, link, z, mode, sys, cfg.variance_model)
        except DegenerateQueueError:
            evals.append((z, math.inf))
            return False
        value = m.total_latency if target == "latency" else m.loss_ratio
        evals.append((z, value))
        return value <= bound

    if not satisfied(z_hi):
        return math.inf
    lo, hi = 0.0, z_hi
    while hi - lo > cfg.bisection_resolution_hz:
        mid = 0.5 * (lo + hi)
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
    # Bracket-monotonicity assertion: the metric must not increase with z.
    evals.sort(key=lambda p: p[0])
    values = [v for _, v in evals]
    for a, b in zip(values, values[1:]):
        if b > a + 1e-9 and math.isfinite(a):
            raise OptimizationError(
                f"{target} metric not monotone over bisection bracket "
                f"for link ({link.mu_id}, {link.bs_id})"
            )
    return hi


def compute_thresholds(scenario: Scenario, cfg: OptimizerConfig | None = None) -> BandwidthThresholds:
    """All per-(user, station, mode) minimum bandwidths for the scenario."""
    cfg = cfg or OptimizerConfig()
    u, j = scenario.num_users, scenario.num_stations
    sys = scenario.system
    shape = (u, j)
    arrays = {k: np.full(shape, math.inf) for k in
              ("z_s_rate", "z_s_latency", "z_s_loss", "z_b_rate", "z_b_latency", "z_b_loss")}
    for i, user in enumerate(scenario.users):
        for k, station in enumerate(scenario.stations):
            link = scenario.link(i, k)
            z_hi = cfg.bracket_factor * station.bandwidth_budget_Z
            arrays["z_s_rate"][i, k] = min_bandwidth_rate(user, link, SEMCOM)
            arrays["z_b_rate"][i, k] = min_bandwidth_rate(user, link, BITCOM)
            arrays["z_s_latency"][i, k] = min_bandwidth_qos(user, link, SEMCOM, "latency", sys, cfg, z_hi)
            arrays["z_s_loss"][i, k] = min_bandwidth_qos(user, link, SEMCOM, "loss", sys, cfg, z_hi)
            arrays["z_b_latency"][i, k] = min_bandwidth_qos(user, link, BITCOM, "latency", sys, cfg, z_hi)
            arrays["z_b_loss"][i, k] = min_bandwidth_qos(user, link, BITCOM, "loss", sys, cfg, z_hi)
    z_s_th = np.maximum(np.maximum(arrays["z_s_rate"], arrays["z_s_latency"]), arrays["z_s_loss"])
    z_b_th = np.maximum(np.maximum(arrays["z_b_rate"], arrays["z_b_latency"]), arrays["z_b_loss"])
    rate_s = np.zeros(shape)
    rate_b = np.zeros(shape)
    for i, user in enumerate(scenario.users):
        for k in range(j):
            link = scenario.link(i, k)
            if math.isfinite(z_s_th[i, k]):
                rate_s[i, k] = mean_message_rate(user, link, z_s_th[i, k], SEMCOM)
            if math.isfinite(z_b_th[i, k]):
                rate_b[i, k] = mean_message_rate(user, link, z_b_th[i, k], BITCOM)
    return BandwidthThresholds(
        z_s_rate=arrays["z_s_rate"], z_s_latency=arrays["z_s_latency"],
        z_s_loss=arrays["z_s_loss"], z_s_th=z_s_th,
        z_b_rate=arrays["z_b_rate"], z_b_latency=arrays["z_b_latency"],
        z_b_loss=arrays["z_b_loss"], z_b_th=z_b_th,
        rate_s_th=rate_s, rate_b_th=rate_b,
    )


# ---------------------------------------------------------------------------
# Dual subgradient machinery
# ---------------------------------------------------------------------------

def compute_xi(thresholds: BandwidthThresholds, eta: np.ndarray) -> np.ndarray:
    """(U, 2J) selection scores: threshold rate minus priced bandwidth.

    Columns 0..J-1 are the semantic options per station, J..2J-1 the bit
    options; infeasible (infinite-threshold) options score -inf.
    """
    z_s = np.nan_to_num(thresholds.z_s_th, posinf=0.0)
    z_b = np.nan_to_num(thresholds.z_b_th, posinf=0.0)
    xi_s = np.where(np.isfinite(thresholds.z_s_th),
                    thresholds.rate_s_th - eta[None, :] * z_s, -math.inf)
    xi_b = np.where(np.isfinite(thresholds.z_b_th),
                    thresholds.rate_b_th - eta[None, :] * z_b, -math.inf)
    return np.hstack([xi_s, xi_b])


def assign_best(xi: np.ndarray, available: np.ndarray):
    """Per-user argmax over its remaining (station, mode) options.

    Option index j' < J selects the semantic mode at station j', otherwise
    the bit mode at station j' - J.  Ties resolve to the lowest option
    index; users whose options are exhausted are reported unserved.
    """
    u, twoj = xi.shape
    j = twoj // 2
    masked = np.where(available, xi, -math.inf)
    best = masked.argmax(axis=1)
    best_val = masked[np.arange(u), best]
    x = np.zeros((u, j), dtype=np.int8)
    y = np.zeros((u, j), dtype=np.int8)
    unserved = []
    for i in range(u):
        if not math.isfinite(best_val[i]):
            unserved.append(i)
            continue
        jp = int(best[i])
        if jp < j:
            x[i, jp] = 1
            y[i, jp] = 1
        else:
            x[i, jp - j] = 1
    return x, y, unserved


def _demand_matrix(x, y, thresholds):
    picked = np.where(y == 1, thresholds.z_s_th, thresholds.z_b_th)
    return np.where(x == 1, picked, 0.0)


def bandwidth_demand(x, y, thresholds) -> np.ndarray:
    """Per-station total threshold bandwidth demanded by current assignment."""
    return _demand_matrix(x, y, thresholds).sum(axis=0)


def update_multipliers(state: DualState, x, y, thresholds, budgets) -> DualState:
    """Projected subgradient step on the station-price multipliers.

    The subgradient of the dual objective at the current assignment is the
    per-station bandwidth slack; prices rise where demand exceeds the
    budget and are clipped at zero.
    """
    grad = np.asarray(budgets, dtype=float) - bandwidth_demand(x, y, thresholds)
    step = state.stepsize_at(state.iteration)
    eta = np.maximum(state.multipliers_eta - step * grad, 0.0)
    return DualState(multipliers_eta=eta, iteration=state.iteration + 1,
                     stepsize=state.stepsize, xi=state.xi, history=state.history)


def repair_feasibility(x, y, unserved, thresholds, xi, budgets, available):
    """Evict largest-demand users from overloaded stations until feasible.

    Processes violated stations in ascending index; at each, the associated
    user with the largest threshold demand (ties to the lowest user index)
    loses its current (station, mode) option from its preference list and is
    re-assigned to its best remaining option.  Re-assignments can overload
    other stations, so the violation set is re-collected until empty.  Every
    eviction permanently shrinks one preference list, which bounds the loop.
    A user whose list empties becomes unserved.
    """
    x = x.copy()
    y = y.copy()
    unserved = list(unserved)
    j_n = x.shape[1]
    budgets = np.asarray(budgets, dtype=float)
    while True:
        demand = bandwidth_demand(x, y, thresholds)
        violated = np.flatnonzero(demand > budgets * (1 + 1e-12))
        if violated.size == 0:
            break
        for station in violated:
            while True:
                members = np.flatnonzero(x[:, station])
                demands = _demand_matrix(x, y, thresholds)[members, station]
                if demands.sum() <= budgets[station] * (1 + 1e-12):
                    break
                victim = int(members[np.argmax(demands)])
                option = station if y[victim, station] else station + j_n
                available[victim, option] = False
                x[victim, :] = 0
                y[victim, :] = 0
                row = np.where(available[victim], xi[victim], -math.inf)
                best = int(row.argmax())
                if math.isfinite(row[best]):
                    if best < j_n:
                        x[victim, best] = 1
                        y[victim, best] = 1
                    else:
                        x[victim, best - j_n] = 1
                else:
                    unserved.append(victim)
    return x, y, sorted(set(unserved))


def _p11_objective(x, y, thresholds) -> float:
    rates = np.where(y == 1, thresholds.rate_s_th, thresholds.rate_b_th)
    return float(np.where(x == 1, rates, 0.0).sum())


def solve_ua_ms(scenario: Scenario, thresholds: BandwidthThresholds,
                cfg: OptimizerConfig | None = None, return_candidates: bool = False):
    """Association and mode selection via the dual loop plus repair.

    Alternates the per-user argmax assignment with a projected subgradient
    update of the station prices; each iterate is repaired to feasibility
    and the best feasible assignment (by threshold-rate objective) is
    returned together with the convergence trace.  With
    ``return_candidates`` the distinct feasible iterates are also returned,
    so callers can re-rank them under the post-reallocation objective.
    """
    cfg = cfg or OptimizerConfig()
    budgets = np.array([s.bandwidth_budget_Z for s in scenario.stations])
    j_n = scenario.num_stations
    feasible = np.hstack([np.isfinite(thresholds.z_s_th), np.isfinite(thresholds.z_b_th)])
    state = DualState(multipliers_eta=np.zeros(j_n), iteration=1, stepsize=cfg.stepsize)
    best = None
    trace = []
    candidates = {}
    for _ in range(cfg.max_iterations):
        xi = compute_xi(thresholds, state.multipliers_eta)
        state.xi = xi
        x, y, unserved = assign_best(xi, feasible)
        xr, yr, unsr = repair_feasibility(x, y, unserved, thresholds, xi, budgets,
                                          feasible.copy())
        obj = _p11_objective(xr, yr, thresholds)
        if best is None or obj > best[0]:
            best = (obj, xr, yr, unsr)
        candidates.setdefault((xr.tobytes(), yr.tobytes()), (xr, yr, unsr))
        served = np.where(feasible, xi, -math.inf).max(axis=1)
        dual_value = float(served[np.isfinite(served)].sum()
                           + state.multipliers_eta @ budgets)
        nxt = update_multipliers(state, x, y, thresholds, budgets)
        delta = float(np.abs(nxt.multipliers_eta - state.multipliers_eta).max())
        trace.append({"iteration": state.iteration, "dual_value": dual_value,
                      "feasible_objective": obj, "multiplier_change": delta})
        state = nxt
        state.history = trace
        if delta < cfg.tolerance:
            break
    _, x, y, unserved = best
    if return_candidates:
        return x, y, unserved, trace, list(candidates.values())
    return x, y, unserved, trace


# ---------------------------------------------------------------------------
# Bandwidth reallocation
# ---------------------------------------------------------------------------

def _marginal_segments(user, link, mode, z_floor):
    """Remaining (slope msg/s per Hz, width Hz) pieces above the floor."""
    eff = math.log2(1.0 + link.mean_sinr_linear)
    if mode == BITCOM:
        return [(link.rho * eff, math.inf)]
    tau = user.matching_degree_tau
    if link.b2m.kind == "linear":
        return [(tau * link.b2m.sigma * eff, math.inf)]
    segs = []
    if eff > 0:
        bits0 = z_floor * eff
        pts = link.b2m.points
        for (b_lo, m_lo), (b_hi, m_hi) in zip(pts, pts[1:]):
            if b_hi <= bits0:
                continue
            slope = (m_hi - m_lo) / (b_hi - b_lo)
            width = (b_hi - max(b_lo, bits0)) / eff
            segs.append((tau * slope * eff, width))
    segs.append((0.0, math.inf))        # saturation
    return segs


def allocate_bandwidth(scenario: Scenario, x, y, thresholds: BandwidthThresholds) -> np.ndarray:
    """Exhaust each station's budget over its users, best marginal rate first.

    Every user starts at its mode's threshold bandwidth; the surplus fills
    the highest-slope remaining segments.  For concave piecewise-linear rate
    maps this greedy fill attains the separable-concave optimum.
    """
    u, j_n = x.shape
    z = np.zeros((u, j_n))
    for station in range(j_n):
        members = np.flatnonzero(x[:, station])
        if members.size == 0:
            continue
        budget = scenario.stations[station].bandwidth_budget_Z
        floors = _demand_matrix(x, y, thresholds)[members, station]
        if not np.all(np.isfinite(floors)):
            raise OptimizationError(f"station {station}: assignment uses an infeasible option")
        surplus = budget - floors.sum()
        if surplus < -1e-6 * budget:
            raise OptimizationError(
                f"station {station}: threshold demand {floors.sum():.1f} exceeds budget {budget:.1f}"
            )
        surplus = max(surplus, 0.0)
        z[members, station] = floors
        segments = []
        for order, i in enumerate(members):
            mode = SEMCOM if y[i, station] else BITCOM
            for seg_idx, (slope, width) in enumerate(
                    _marginal_segments(scenario.users[i], scenario.link(i, station),
                                       mode, floors[order])):
                segments.append((-slope, order, seg_idx, width, i))
        segments.sort(key=lambda s: (s[0], s[1], s[2]))
        remaining = surplus
        for neg_slope, _, _, width, i in segments:
            if remaining <= 0.0:
                break
            take = min(width, remaining)
            z[i, station] += take
            remaining -= take
    return z


# ---------------------------------------------------------------------------
# Objective and constraint audit
# ---------------------------------------------------------------------------

def evaluate_objective(scenario: Scenario, assignment: Assignment,
                       variance_model: str = "mixture") -> ObjectiveReport:
    """Total message throughput plus a per-link constraint report.

    Flags latency/loss/minimum-rate violations on every served link,
    non-unique association rows, and per-station bandwidth overruns.
    Unserved users are excluded from the objective.
    """
    sys = scenario.system
    u = scenario.num_users
    per_user = np.zeros(u)
    violations: list[ConstraintViolation] = []
    unserved = set(assignment.unserved)
    for i in range(u):
        js = np.flatnonzero(assignment.x[i])
        if js.size == 0:
            if i not in unserved:
                violations.append(ConstraintViolation(i, None, "single-bs", 0.0, 1.0))
            continue
        if js.size > 1:
            violations.append(ConstraintViolation(i, None, "single-bs", float(js.size), 1.0))
        station = int(js[0])
        mode = assignment.mode_of(i, station)
        user = scenario.users[i]
        link = scenario.link(i, station)
        z = float(assignment.z[i, station])
        rate = mean_message_rate(user, link, z, mode)
        per_user[i] = rate
        if rate < user.min_rate_Mo * (1 - 1e-9):
            violations.append(ConstraintViolation(i, station, "min-rate", rate, user.min_rate_Mo))
        try:
            metrics = link_metrics(user, link, z, mode, sys, variance_model)
            loss, latency = metrics.loss_ratio, metrics.total_latency
        except (DegenerateQueueError, UnstableQueueError):
            loss, latency = 1.0, math.inf
        if loss > sys.loss_budget_theta0 * (1 + 1e-9):
            violations.append(ConstraintViolation(i, station, "loss", loss, sys.loss_budget_theta0))
        if latency > sys.latency_budget_delta0 * (1 + 1e-9):
            violations.append(ConstraintViolation(i, station, "latency", latency,
                                                  sys.latency_budget_delta0))
    for station in range(scenario.num_stations):
        used = float((assignment.x[:, station] * assignment.z[:, station]).sum())
        budget = scenario.stations[station].bandwidth_budget_Z
        if used > budget * (1 + 1e-9):
            violations.append(ConstraintViolation(None, station, "bandwidth", used, budget))
    total = float(per_user.sum())
    bad_users = {v.user for v in violations if v.user is not None}
    compliant = float(sum(per_user[i] for i in range(u) if i not in bad_users))
    return ObjectiveReport(total_rate=total, compliant_rate=compliant,
                           per_user_rate=per_user,
                           violations=violations, unserved=sorted(unserved))


def _rate_sum(scenario, x, y, z):
    total = 0.0
    for i in range(scenario.num_users):
        js = np.flatnonzero(x[i])
        if js.size:
            j = int(js[0])
            mode = SEMCOM if y[i, j] else BITCOM
            total += mean_message_rate(scenario.users[i], scenario.link(i, j),
                                       float(z[i, j]), mode)
    return total


def solve(scenario: Scenario, cfg: OptimizerConfig | None = None,
          thresholds: BandwidthThresholds | None = None) -> Assignment:
    """Full pipeline: thresholds, dual association/mode loop, reallocation.

    Every distinct feasible iterate of the dual loop is carried through the
    bandwidth reallocation and the one with the highest resulting message
    throughput wins; all iterates respect the per-mode thresholds, so the
    winner keeps the latency/loss/rate guarantees.
    """
    cfg = cfg or OptimizerConfig.from_dict(scenario.optimizer)
    if thresholds is None:
        thresholds = compute_thresholds(scenario, cfg)
    x, y, unserved, trace, candidates = solve_ua_ms(scenario, thresholds, cfg,
                                                    return_candidates=True)
    best = (x, y, unserved)
    best_obj = -math.inf
    for xc, yc, unsc in candidates:
        zc = allocate_bandwidth(scenario, xc, yc, thresholds)
        obj = _rate_sum(scenario, xc, yc, zc)
        if obj > best_obj:
            best_obj = obj
            best = (xc, yc, unsc)
    x, y, unserved = best
    z = allocate_bandwidth(scenario, x, y, thresholds)
    assignment = Assignment(x=x, y=y, z=z, unserved=unserved, scheme="proposed")
    assignment.objective = evaluate_objective(scenario, assignment, cfg.variance_model).total_rate
    assignment.trace = trace
    return assignment


# ---------------------------------------------------------------------------
# Benchmark schemes
# ---------------------------------------------------------------------------

def _water_filling(gains, budget):
    """z_i = max(0, level - 1/gain_i) with sum z = budget, floors at zero.

    The per-Hz channel quality used as the gain is the mean spectral
    efficiency log2(1 + mean SINR); its dimensionless inverses are rescaled
    so their sum maps to the full budget, keeping the allocation scale-free
    while preserving the usual behavior of starving the worst channels
    first.
    """
    inv = 1.0 / np.log2(1.0 + np.asarray(gains, dtype=float))
    inv = inv * (budget / inv.sum())
    order = np.argsort(inv)
    allocation = np.zeros(inv.size)
    for active in range(inv.size, 0, -1):
        chosen = order[:active]
        level = (budget + inv[chosen].sum()) / active
        if level >= inv[chosen].max():
            allocation[chosen] = level - inv[chosen]
            break
    return allocation


def benchmark_assign(scenario: Scenario, ms: str, ba: str,
                     cfg: OptimizerConfig | None = None) -> Assignment:
    """Max-SINR association with threshold mode selection and naive allocation.

    ``ms`` is ``ms1`` (semantic when the matching degree exceeds its
    threshold) or ``ms2`` (bit when the mean SINR exceeds its threshold);
    ``ba`` is ``ba1`` (water-filling on mean channel gains) or ``ba2`` (even
    split).  The result can violate QoS constraints; violations surface via
    :func:`evaluate_objective`.
    """
    cfg = cfg or OptimizerConfig.from_dict(scenario.optimizer)
    if ms not in ("ms1", "ms2"):
        raise OptimizationError(f"ms must be 'ms1' or 'ms2', got {ms!r}")
    if ba not in ("ba1", "ba2"):
        raise OptimizationError(f"ba must be 'ba1' or 'ba2', got {ba!r}")
    u, j_n = scenario.num_users, scenario.num_stations
    sinr = scenario.mean_sinr_db_matrix()
    x = np.zeros((u, j_n), dtype=np.int8)
    y = np.zeros((u, j_n), dtype=np.int8)
    for i in range(u):
        station = int(sinr[i].argmax())
        x[i, station] = 1
        if ms == "ms1":
            semantic = scenario.users[i].matching_degree_tau > cfg.ms1_tau_threshold
        else:
            semantic = not (sinr[i, station] > cfg.ms2_sinr_threshold_db)
        y[i, station] = 1 if semantic else 0
    z = np.zeros((u, j_n))
    for station in range(j_n):
        members = np.flatnonzero(x[:, station])
        if members.size == 0:
            continue
        budget = scenario.stations[station].bandwidth_budget_Z
        if ba == "ba2":
            z[members, station] = budget / members.size
        else:
            gains = [scenario.link(i, station).mean_sinr_linear for i in members]
            z[members, station] = _water_filling(gains, budget)
    assignment = Assignment(x=x, y=y, z=z, unserved=[], scheme=f"maxsinr-{ms}-{ba}")
    # Benchmarks may violate QoS; their usable throughput counts only links
    # that meet every constraint (violations stay visible in the report).
    assignment.objective = evaluate_objective(scenario, assignment,
                                              cfg.variance_model).compliant_rate
    return assignment


BENCHMARK_SCHEMES = (("ms1", "ba1"), ("ms1", "ba2"), ("ms2", "ba1"), ("ms2", "ba2"))


def solve_all_schemes(scenario: Scenario, cfg: OptimizerConfig | None = None) -> dict[str, Assignment]:
    """Proposed solver plus the four benchmark combinations."""
    cfg = cfg or OptimizerConfig.from_dict(scenario.optimizer)
    out = {"proposed": solve(scenario, cfg)}
    for ms, ba in BENCHMARK_SCHEMES:
        a = benchmark_assign(scenario, ms, ba, cfg)
        out[a.scheme] = a
    return out
