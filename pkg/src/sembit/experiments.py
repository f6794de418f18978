"""Experiment campaign runner: validation sweeps, scheme comparisons, CDFs.

Each experiment writes plot-ready CSV files with a fixed column layout
(documented in docs/experiments.md) and returns the aggregated rows.  Grid
points derive their own seeds from the master seed, so reruns of the same
spec are byte-identical regardless of worker count.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as student_t

from .scenario import (
    SEMCOM, GenerationConfig, LinkModel, MobileUser, SystemConfig,
    generate_scenario, load_scenario,
)
from .queueing import (
    ArrivalSpec, DepartureSpec, UnstableQueueError,
    link_metrics, ptq_arrival_rate, scq_latency,
)
from .simulate import SimConfig, simulate_ptq, simulate_scq
from .optimize import evaluate_objective, solve_all_schemes

EXPERIMENTS = ("validate-scq", "validate-ptq", "sweep-bs", "sweep-mu", "sweep-tau",
               "rate-cdf", "single-run")

SCHEME_ORDER = ("proposed", "maxsinr-ms1-ba1", "maxsinr-ms1-ba2",
                "maxsinr-ms2-ba1", "maxsinr-ms2-ba2")

DEFAULT_GRIDS = {
    "validate-scq": [750, 800, 850, 900, 950, 1000, 1050],
    "validate-ptq": [10, 12, 14, 16, 18, 20, 22],
    "sweep-bs": [2, 3, 4],
    "sweep-mu": [10, 20, 30],
    "sweep-tau": [0.6, 0.8, 1.0],
}

# Desk-scale comparison regime: keeps the full-scale deployment physics
# (station density and per-user bandwidth contention) at a size where the
# benchmark suite runs in minutes.
DESK_RADIUS_M = 160.0
DESK_BANDWIDTH_Z = 5e6


def desk_generation_config(num_users, num_stations, seed, tau_range=None) -> GenerationConfig:
    cfg = GenerationConfig(num_users=num_users, num_stations=num_stations, seed=seed,
                           radius_m=DESK_RADIUS_M, bandwidth_budget_Z=DESK_BANDWIDTH_Z)
    if tau_range is not None:
        cfg.tau_range = tau_range
    return cfg


@dataclass
class ExperimentSpec:
    name: str
    out_dir: str
    seed: int = 0
    trials: int = 20
    grid: list | None = None
    scenario_path: str | None = None
    num_users: int = 20
    num_stations: int = 3
    num_slots: int = 200_000
    replications: int = 5
    threads: int = 1

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.name!r}; choose from {EXPERIMENTS}")
        if self.grid is None:
            self.grid = DEFAULT_GRIDS.get(self.name, [])
        if self.name in DEFAULT_GRIDS and not self.grid:
            raise ValueError("experiment grid must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass
class ExperimentResult:
    name: str
    rows: list[dict]
    csv_paths: list[str] = field(default_factory=list)


def derive_seed(master: int, *path: int) -> int:
    """Stable per-grid-point seed: child of the master seed keyed by indices."""
    return int(np.random.SeedSequence([int(master), *map(int, path)]).generate_state(1)[0])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in header])
    return path


def _mean_ci(values):
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(values.mean())
    if n < 2:
        return mean, math.inf
    return mean, float(student_t.ppf(0.975, n - 1) * values.std(ddof=1) / math.sqrt(n))


def _reference_user(arrival_rate=1000.0, tau=1.0):
    return MobileUser(id=0, position=(0.0, 0.0), arrival_rate_lambda=arrival_rate,
                      matching_degree_tau=tau, mu_match=1250.0, mu_mismatch=1000.0,
                      min_rate_Mo=50.0)


def _reference_link(mean_sinr_db=0.0, sinr_std_db=4.0):
    from .scenario import B2MFunction
    return LinkModel(mu_id=0, bs_id=0, mean_sinr_db=mean_sinr_db,
                     sinr_std_db=sinr_std_db,
                     b2m=B2MFunction(kind="linear", sigma=2e-4), rho=1e-4)


# ---------------------------------------------------------------------------
# Validation experiments (queue model vs simulation)
# ---------------------------------------------------------------------------

def _run_validate_scq(spec: ExperimentSpec):
    taus = (0.4, 0.7, 1.0)
    rows = []
    for pi, lam in enumerate(spec.grid):
        for ti, tau in enumerate(taus):
            user = _reference_user(arrival_rate=float(lam), tau=tau)
            row = {"arrival_rate": float(lam), "tau": tau, "status": "ok",
                   "analytic_s": "", "simulated_s": "", "ci_halfwidth_s": "", "within_ci": ""}
            try:
                analytic = scq_latency(user).latency_S1
            except UnstableQueueError:
                row["status"] = "infeasible"
                rows.append(row)
                continue
            cfg = SimConfig(num_slots=spec.num_slots, replications=spec.replications,
                            seed=derive_seed(spec.seed, pi, ti))
            est = simulate_scq(user, cfg)
            row.update(analytic_s=analytic, simulated_s=est.mean,
                       ci_halfwidth_s=est.half_width_95,
                       within_ci=int(est.covers(analytic)))
            rows.append(row)
    path = _write_csv(os.path.join(spec.out_dir, "validate_scq.csv"),
                      ["arrival_rate", "tau", "status", "analytic_s", "simulated_s",
                       "ci_halfwidth_s", "within_ci"], rows)
    return rows, [path]


def _run_validate_ptq(spec: ExperimentSpec):
    sys = SystemConfig()
    lat_rows = []
    bandwidths = (1.0e6, 1.5e6, 2.0e6)
    user = _reference_user(tau=1.0)
    link = _reference_link()
    for pi, buffer_size in enumerate(spec.grid):
        for zi, z in enumerate(bandwidths):
            sys_f = SystemConfig(buffer_size_F=int(buffer_size))
            analytic = link_metrics(user, link, z, SEMCOM, sys_f).ptq_latency
            cfg = SimConfig(num_slots=spec.num_slots, replications=spec.replications,
                            seed=derive_seed(spec.seed, 0, pi, zi))
            arrival = ArrivalSpec(rate=ptq_arrival_rate(user, SEMCOM),
                                  slot_length=sys_f.slot_length_T)
            departure = DepartureSpec(bandwidth_z=z, mean_sinr_db=link.mean_sinr_db,
                                      sinr_std_db=link.sinr_std_db,
                                      slot_length=sys_f.slot_length_T,
                                      packet_bits=sys_f.packet_bits_L)
            _, lat_est = simulate_ptq(arrival, departure, sys_f.buffer_size_F, cfg)
            lat_rows.append({"buffer_size": int(buffer_size), "bandwidth_hz": z,
                             "status": "ok", "analytic_s": analytic,
                             "simulated_s": lat_est.mean,
                             "ci_halfwidth_s": lat_est.half_width_95,
                             "within_ci": int(lat_est.covers(analytic))})
    p1 = _write_csv(os.path.join(spec.out_dir, "validate_ptq_latency.csv"),
                    ["buffer_size", "bandwidth_hz", "status", "analytic_s", "simulated_s",
                     "ci_halfwidth_s", "within_ci"], lat_rows)

    loss_rows = []
    z_grid = [1.0e6 + 0.1e6 * k for k in range(11)]
    for zi, z in enumerate(z_grid):
        for ti, tau in enumerate((0.0, 0.5, 1.0)):
            u2 = _reference_user(tau=tau)
            analytic = link_metrics(u2, link, z, SEMCOM, sys).loss_ratio
            cfg = SimConfig(num_slots=spec.num_slots, replications=spec.replications,
                            seed=derive_seed(spec.seed, 1, zi, ti))
            arrival = ArrivalSpec(rate=ptq_arrival_rate(u2, SEMCOM),
                                  slot_length=sys.slot_length_T)
            departure = DepartureSpec(bandwidth_z=z, mean_sinr_db=link.mean_sinr_db,
                                      sinr_std_db=link.sinr_std_db,
                                      slot_length=sys.slot_length_T,
                                      packet_bits=sys.packet_bits_L)
            loss_est, _ = simulate_ptq(arrival, departure, sys.buffer_size_F, cfg)
            loss_rows.append({"bandwidth_hz": z, "tau": tau, "status": "ok",
                              "analytic": analytic, "simulated": loss_est.mean,
                              "ci_halfwidth": loss_est.half_width_95,
                              "within_ci": int(loss_est.covers(analytic))})
    p2 = _write_csv(os.path.join(spec.out_dir, "validate_ptq_loss.csv"),
                    ["bandwidth_hz", "tau", "status", "analytic", "simulated",
                     "ci_halfwidth", "within_ci"], loss_rows)
    return lat_rows + loss_rows, [p1, p2]


# ---------------------------------------------------------------------------
# Scheme comparison sweeps
# ---------------------------------------------------------------------------

def _generation_config(spec: ExperimentSpec, sweep_value, seed):
    cfg = desk_generation_config(spec.num_users, spec.num_stations, seed)
    if spec.name == "sweep-bs":
        cfg.num_stations = int(sweep_value)
    elif spec.name == "sweep-mu":
        cfg.num_users = int(sweep_value)
    elif spec.name == "sweep-tau":
        center = float(sweep_value)
        half = 0.5 * min(0.4, 2 * (1 - center), 2 * center)
        cfg.tau_range = (center - half, center + half)
    return cfg


def _sweep_point(args):
    spec_state, sweep_value, point_index, trial = args
    spec = ExperimentSpec(**spec_state)
    seed = derive_seed(spec.seed, point_index, trial)
    scenario = generate_scenario(_generation_config(spec, sweep_value, seed))
    assignments = solve_all_schemes(scenario)
    return {
        "sweep_value": sweep_value,
        "trial": trial,
        "throughput": {name: a.objective for name, a in assignments.items()},
        "unserved": {name: len(a.unserved) for name, a in assignments.items()},
    }


def _spec_state(spec: ExperimentSpec) -> dict:
    return {k: getattr(spec, k) for k in (
        "name", "out_dir", "seed", "trials", "grid", "scenario_path",
        "num_users", "num_stations", "num_slots", "replications", "threads")}


def _run_sweep(spec: ExperimentSpec):
    tasks = [(_spec_state(spec), value, pi, trial)
             for pi, value in enumerate(spec.grid)
             for trial in range(spec.trials)]
    if spec.threads > 1:
        with ProcessPoolExecutor(max_workers=spec.threads) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]

    sweep_col = {"sweep-bs": "num_stations", "sweep-mu": "num_users",
                 "sweep-tau": "mean_tau"}[spec.name]
    rows = []
    for pi, value in enumerate(spec.grid):
        point = [r for r in results if r["sweep_value"] == value]
        for scheme in SCHEME_ORDER:
            tp_mean, tp_ci = _mean_ci([r["throughput"][scheme] for r in point])
            un_mean, un_ci = _mean_ci([r["unserved"][scheme] for r in point])
            rows.append({sweep_col: value, "scheme": scheme, "metric": "throughput_msg_s",
                         "mean": tp_mean, "ci_halfwidth": tp_ci, "trials": len(point)})
            rows.append({sweep_col: value, "scheme": scheme, "metric": "unserved_users",
                         "mean": un_mean, "ci_halfwidth": un_ci, "trials": len(point)})
    path = _write_csv(os.path.join(spec.out_dir, f"{spec.name.replace('-', '_')}.csv"),
                      [sweep_col, "scheme", "metric", "mean", "ci_halfwidth", "trials"], rows)
    return rows, [path]


# ---------------------------------------------------------------------------
# Rate CDF and single run
# ---------------------------------------------------------------------------

def _load_or_generate(spec: ExperimentSpec):
    if spec.scenario_path:
        return load_scenario(spec.scenario_path)
    return generate_scenario(desk_generation_config(spec.num_users, spec.num_stations,
                                                    spec.seed))


def _run_rate_cdf(spec: ExperimentSpec):
    scenario = _load_or_generate(spec)
    assignments = solve_all_schemes(scenario)
    rows = []
    for scheme in SCHEME_ORDER:
        a = assignments[scheme]
        served = [i for i in range(scenario.num_users) if a.x[i].any()]
        report = evaluate_objective(scenario, a)
        rates = sorted(report.per_user_rate[i] for i in served)
        n = len(rates)
        for k, rate in enumerate(rates):
            rows.append({"scheme": scheme, "rate_msg_s": float(rate),
                         "cdf": (k + 1) / n})
    path = _write_csv(os.path.join(spec.out_dir, "rate_cdf.csv"),
                      ["scheme", "rate_msg_s", "cdf"], rows)
    return rows, [path]


def _run_single(spec: ExperimentSpec):
    scenario = _load_or_generate(spec)
    assignments = solve_all_schemes(scenario)
    rows = []
    for scheme in SCHEME_ORDER:
        a = assignments[scheme]
        report = evaluate_objective(scenario, a)
        rows.append({"scheme": scheme, "throughput_msg_s": a.objective,
                     "unserved_users": len(a.unserved),
                     "constraint_violations": len(report.violations)})
    p1 = _write_csv(os.path.join(spec.out_dir, "single_run.csv"),
                    ["scheme", "throughput_msg_s", "unserved_users",
                     "constraint_violations"], rows)
    trace_rows = [
        {"iteration": t["iteration"], "dual_value": t["dual_value"],
         "feasible_objective": t["feasible_objective"],
         "multiplier_change": t["multiplier_change"]}
        for t in assignments["proposed"].trace
    ]
    p2 = _write_csv(os.path.join(spec.out_dir, "convergence.csv"),
                    ["iteration", "dual_value", "feasible_objective",
                     "multiplier_change"], trace_rows)
    return rows, [p1, p2]


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run one experiment, writing its CSV outputs under ``spec.out_dir``."""
    os.makedirs(spec.out_dir, exist_ok=True)
    if spec.name == "validate-scq":
        rows, paths = _run_validate_scq(spec)
    elif spec.name == "validate-ptq":
        rows, paths = _run_validate_ptq(spec)
    elif spec.name in ("sweep-bs", "sweep-mu", "sweep-tau"):
        rows, paths = _run_sweep(spec)
    elif spec.name == "rate-cdf":
        rows, paths = _run_rate_cdf(spec)
    else:
        rows, paths = _run_single(spec)
    return ExperimentResult(name=spec.name, rows=rows, csv_paths=paths)


def summarize(results_dir: str) -> str:
    """Headline metrics for every result CSV found under ``results_dir``."""
    lines = []
    names = sorted(os.listdir(results_dir)) if os.path.isdir(results_dir) else []
    csvs = [n for n in names if n.endswith(".csv")]
    if not csvs:
        return "no results found\n"
    for name in csvs:
        path = os.path.join(results_dir, name)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            lines.append(f"{name}: empty")
            continue
        if name.startswith("validate"):
            gaps, covered, total = [], 0, 0
            for r in rows:
                if r.get("status", "ok") != "ok":
                    continue
                a = float(r.get("analytic_s") or r.get("analytic"))
                s = float(r.get("simulated_s") or r.get("simulated"))
                gaps.append(abs(a - s) / max(abs(a), 1e-300))
                covered += int(r["within_ci"])
                total += 1
            lines.append(f"{name}: {total} points, {covered} within 95% CI, "
                         f"max relative gap {max(gaps):.4f}")
        elif name.startswith("sweep"):
            sweep_col = next(iter(rows[0]))
            by_value = {}
            for r in rows:
                if r["metric"] != "throughput_msg_s":
                    continue
                by_value.setdefault(r[sweep_col], {})[r["scheme"]] = float(r["mean"])
            for value, schemes in by_value.items():
                best_bench = max(v for k, v in schemes.items() if k != "proposed")
                gain = schemes["proposed"] - best_bench
                lines.append(f"{name}: {sweep_col}={value}: proposed "
                             f"{schemes['proposed']:.1f} msg/s, best benchmark "
                             f"{best_bench:.1f} msg/s, gain {gain:+.1f}")
        elif name == "single_run.csv":
            for r in rows:
                lines.append(f"{name}: {r['scheme']}: {float(r['throughput_msg_s']):.1f} msg/s, "
                             f"{r['unserved_users']} unserved, "
                             f"{r['constraint_violations']} violations")
        else:
            lines.append(f"{name}: {len(rows)} rows")
    return "\n".join(lines) + "\n"
