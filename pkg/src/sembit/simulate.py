"""Monte Carlo validation of the analytical queue metrics.

The coding queue is simulated in continuous time (its analysis is a
continuous-time M/G/1), the transmission queue in discrete slots following
the evolution rule Q' = min(max(Q - D, 0) + A, F) with departures leaving
before arrivals enter.  Each replication owns an independent RNG stream:
replication r uses the r-th child of ``numpy.random.SeedSequence(seed)``,
so any replication is reproducible in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .scenario import SEMCOM, LinkModel, MobileUser, SystemConfig
from .queueing import (
    ArrivalSpec, DepartureSpec, UnstableQueueError,
    link_metrics, ptq_arrival_rate, scq_latency,
)

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]

_CHUNK = 1_000_000  # fixed draw granularity keeps streams seed-stable


@dataclass
class SimConfig:
    num_slots: int = 1_000_000      # per replication; packets for the coding queue
    warmup_slots: int | None = None  # default: 10% of num_slots
    replications: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.warmup_slots is None:
            self.warmup_slots = self.num_slots // 10
        if not (self.num_slots > self.warmup_slots >= 0):
            raise ValueError(
                f"need num_slots > warmup_slots >= 0, got {self.num_slots}, {self.warmup_slots}"
            )
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass
class SimEstimate:
    mean: float
    half_width_95: float
    samples: int

    def covers(self, value: float) -> bool:
        return abs(value - self.mean) <= self.half_width_95


def _estimate(values) -> SimEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        return SimEstimate(float(values.mean()), math.inf, n)
    hw = float(student_t.ppf(0.975, n - 1) * values.std(ddof=1) / math.sqrt(n))
    return SimEstimate(float(values.mean()), hw, n)


# ---------------------------------------------------------------------------
# Coding queue (event-driven FIFO single server)
# ---------------------------------------------------------------------------

def _scq_replication(user: MobileUser, n_packets: int, warmup: int, rng) -> float:
    lam = user.arrival_rate_lambda
    inter = rng.exponential(1.0 / lam, n_packets)
    matched = rng.random(n_packets) < user.matching_degree_tau
    svc_match = rng.exponential(1.0 / user.mu_match, n_packets)
    svc_mis = rng.exponential(1.0 / user.mu_mismatch, n_packets)
    service = np.where(matched, svc_match, svc_mis)
    # Lindley recursion via running minimum of the cumulated (service - gap).
    increments = service[:-1] - inter[1:]
    walk = np.concatenate([[0.0], np.cumsum(increments)])
    waits = walk - np.minimum.accumulate(walk)
    sojourn = waits + service
    return float(sojourn[warmup:].mean())


def simulate_scq(user: MobileUser, cfg: SimConfig) -> SimEstimate:
    """Mean packet sojourn time in the coding queue across replications.

    Each packet is knowledge-matching with probability tau and served at the
    corresponding exponential rate.  Raises before running when the queue
    is unstable.
    """
    scq_latency(user)  # raises UnstableQueueError on utilization >= 1
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    means = [
        _scq_replication(user, cfg.num_slots, cfg.warmup_slots, np.random.default_rng(c))
        for c in children
    ]
    return _estimate(means)


# ---------------------------------------------------------------------------
# Transmission queue (slot-driven)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ptq_kernel(arr, dep, F, q, arrivals, departures, drops, qsum, lowq, highq):
    for i in range(arr.shape[0]):
        remaining = q - dep[i]
        if remaining < 0:
            remaining = 0
        departures += q - remaining
        q = remaining + arr[i]
        if q > F:
            drops += q - F
            q = F
        arrivals += arr[i]
        qsum += q
        if q < lowq:
            lowq = q
        if q > highq:
            highq = q
    return q, arrivals, departures, drops, qsum, lowq, highq


@njit(cache=True)
def _ptq_warmup_kernel(arr, dep, F, q):
    for i in range(arr.shape[0]):
        remaining = q - dep[i]
        if remaining < 0:
            remaining = 0
        q = remaining + arr[i]
        if q > F:
            q = F
    return q


def _draw_slots(rng, n, arrival_mean, departure: DepartureSpec):
    arr = rng.poisson(arrival_mean, n).astype(np.int64)
    if departure.bandwidth_z == 0.0:
        return arr, np.zeros(n, dtype=np.int64)
    if departure.sinr_std_db == 0.0:
        g_db = np.full(n, departure.mean_sinr_db)
    else:
        g_db = rng.normal(departure.mean_sinr_db, departure.sinr_std_db, n)
    capacity = (departure.slot_length * departure.bandwidth_z
                * np.log2(1.0 + 10.0 ** (g_db / 10.0)) / departure.packet_bits)
    return arr, np.floor(capacity).astype(np.int64)


def _ptq_replication(arrival: ArrivalSpec, departure: DepartureSpec, F: int,
                     num_slots: int, warmup: int, rng):
    mean = arrival.mean_per_slot
    q = 0
    done = 0
    while done < warmup:
        n = min(_CHUNK, warmup - done)
        arr, dep = _draw_slots(rng, n, mean, departure)
        q = _ptq_warmup_kernel(arr, dep, F, q)
        done += n
    q_start = q
    arrivals = departures = drops = qsum = 0
    lowq, highq = q, q
    measured = num_slots - warmup
    done = 0
    while done < measured:
        n = min(_CHUNK, measured - done)
        arr, dep = _draw_slots(rng, n, mean, departure)
        q, arrivals, departures, drops, qsum, lowq, highq = _ptq_kernel(
            arr, dep, F, q, arrivals, departures, drops, qsum, lowq, highq
        )
        done += n
    if not (0 <= lowq and highq <= F):
        raise AssertionError(f"queue left [0, {F}]: range [{lowq}, {highq}]")
    if arrivals != departures + drops + (q - q_start):
        raise AssertionError("packet conservation violated in replication")
    admitted = arrivals - drops
    loss = drops / arrivals if arrivals > 0 else 0.0
    if admitted > 0:
        latency = (qsum / measured) / (admitted / (measured * arrival.slot_length))
    else:
        latency = 0.0 if qsum == 0 else math.inf
    return loss, latency


def simulate_ptq(arrival: ArrivalSpec, departure: DepartureSpec, F: int,
                 cfg: SimConfig) -> tuple[SimEstimate, SimEstimate]:
    """(loss ratio, queueing latency) estimates for the finite-buffer queue.

    Per slot the SINR is drawn Gaussian in dB, departures follow the floored
    Shannon capacity, arrivals are Poisson, and drops are counted whenever
    admissions would exceed the buffer.  Latency uses Little's law on the
    time-averaged queue length and the admitted arrival rate.
    """
    if F < 1:
        raise ValueError(f"F must be >= 1, got {F}")
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    losses, latencies = [], []
    for child in children:
        loss, lat = _ptq_replication(arrival, departure, F, cfg.num_slots,
                                     cfg.warmup_slots, np.random.default_rng(child))
        losses.append(loss)
        latencies.append(lat)
    return _estimate(losses), _estimate(latencies)


# ---------------------------------------------------------------------------
# Analytic-vs-simulated comparison
# ---------------------------------------------------------------------------

@dataclass
class ValidationRow:
    metric: str
    analytic: float
    simulated: float
    half_width_95: float
    abs_gap: float
    rel_gap: float
    within_ci: bool


@dataclass
class LinkValidation:
    rows: list[ValidationRow]
    passed: bool


def _row(metric, analytic, est: SimEstimate) -> ValidationRow:
    gap = abs(analytic - est.mean)
    rel = gap / max(abs(analytic), 1e-300)
    # Absolute floor handles the degenerate zero-variance case where the
    # metric vanishes both ways (e.g. loss in an overprovisioned regime).
    within = est.covers(analytic) or gap < 1e-8
    return ValidationRow(metric, analytic, est.mean, est.half_width_95, gap, rel,
                         within)


def validate_link(user: MobileUser, link: LinkModel, z: float, mode: str,
                  sys: SystemConfig, cfg: SimConfig,
                  variance_model: str = "mixture") -> LinkValidation:
    """Compare analytic loss/latency of one link against simulation."""
    analytic = link_metrics(user, link, z, mode, sys, variance_model)
    arrival = ArrivalSpec(rate=ptq_arrival_rate(user, mode), slot_length=sys.slot_length_T)
    departure = DepartureSpec(bandwidth_z=z, mean_sinr_db=link.mean_sinr_db,
                              sinr_std_db=link.sinr_std_db,
                              slot_length=sys.slot_length_T, packet_bits=sys.packet_bits_L)
    loss_est, lat_est = simulate_ptq(arrival, departure, sys.buffer_size_F, cfg)
    rows = [
        _row("loss_ratio", analytic.loss_ratio, loss_est),
        _row("ptq_latency", analytic.ptq_latency, lat_est),
    ]
    if mode == SEMCOM:
        scq_est = simulate_scq(user, cfg)
        rows.append(_row("scq_latency", analytic.scq_latency, scq_est))
    return LinkValidation(rows=rows, passed=all(r.within_ci for r in rows))
