"""Closed-form and matrix-analytic queue metrics for both link modes.

Two queues are analyzed per semantic-mode link: an infinite M/G/1
semantic-coding queue (SCQ) whose sojourn time follows the
Pollaczek-Khintchine formula, and a finite-buffer slotted
packet-transmission queue (PTQ) modeled as a discrete-time Markov chain
over queue lengths 0..F.  Bit-mode links have only the PTQ, fed directly by
the user's Poisson packet source.  Per-slot departures are driven by the
Shannon capacity of the link under an SINR that is Gaussian in the dB
domain (hence strictly positive in linear scale), so every arrival and
departure probability used here has an exact closed form; no series
truncation is involved.

All functions are pure; different links may be evaluated concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, ndtr, pdtrc

from .scenario import SEMCOM, BITCOM, LinkModel, MobileUser, SystemConfig


class QueueingError(Exception):
    """Numerical or contract failure inside the queueing analysis."""


class UnstableQueueError(QueueingError):
    """SCQ utilization is >= 1, so no steady state exists."""

    def __init__(self, message, utilization):
        super().__init__(message)
        self.utilization = utilization


class DegenerateQueueError(QueueingError):
    """Effective arrival rate is zero; latency is undefined."""


# ---------------------------------------------------------------------------
# Specs and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArrivalSpec:
    rate: float            # packets/s
    slot_length: float     # s

    def __post_init__(self):
        if not self.rate > 0:
            raise QueueingError(f"arrival rate must be > 0, got {self.rate}")
        if not self.slot_length > 0:
            raise QueueingError(f"slot_length must be > 0, got {self.slot_length}")

    @property
    def mean_per_slot(self) -> float:
        return self.rate * self.slot_length


@dataclass(frozen=True)
class DepartureSpec:
    bandwidth_z: float     # Hz
    mean_sinr_db: float
    sinr_std_db: float
    slot_length: float     # s
    packet_bits: float     # bit/packet

    def __post_init__(self):
        if self.bandwidth_z < 0:
            raise QueueingError(f"bandwidth_z must be >= 0, got {self.bandwidth_z}")


@dataclass
class ScqAnalysis:
    mean_service: float    # s
    second_moment: float   # s^2
    utilization: float
    latency_S1: float      # s


@dataclass
class PtqChain:
    """Finite-buffer PTQ chain: transition matrix and derived quantities.

    ``steady_state_alpha``, ``drop_rate_G``, and ``cumulative_W`` are filled
    lazily by :func:`steady_state` and :func:`expected_drops`.
    """

    transition_matrix_omega: np.ndarray
    steady_state_alpha: np.ndarray | None = None
    drop_rate_G: float | None = None
    cumulative_W: np.ndarray | None = None
    # Cached distribution vectors the matrix was built from.
    pa: np.ndarray = field(default=None, repr=False)
    sa: np.ndarray = field(default=None, repr=False)
    pd: np.ndarray = field(default=None, repr=False)
    sd: np.ndarray = field(default=None, repr=False)
    arrival_excess: np.ndarray = field(default=None, repr=False)

    @property
    def buffer_size(self) -> int:
        return self.transition_matrix_omega.shape[0] - 1


@dataclass
class LinkQueueMetrics:
    mode: str
    loss_ratio: float
    ptq_latency: float
    scq_latency: float
    total_latency: float
    effective_arrival: float


# ---------------------------------------------------------------------------
# Elementary distributions (exact closed forms)
# ---------------------------------------------------------------------------

def _poisson_pmf_vector(mean, kmax):
    k = np.arange(kmax + 1)
    if mean == 0.0:
        out = np.zeros(kmax + 1)
        out[0] = 1.0
        return out
    return np.exp(k * math.log(mean) - mean - gammaln(k + 1))


def _poisson_tail(mean, c):
    """Pr{X >= c} for Poisson(mean), exact."""
    c = np.asarray(c)
    out = np.where(c <= 0, 1.0, pdtrc(np.maximum(c, 1) - 1, mean))
    return out if out.ndim else float(out)


def _poisson_excess(mean, c):
    """E[(X - c)+] = mean*Pr{X >= c-1} - c*Pr{X >= c}, exact."""
    c = np.asarray(c)
    return mean * _poisson_tail(mean, c - 1) - c * _poisson_tail(mean, c)


def poisson_pmf(spec: ArrivalSpec, k):
    """Per-slot arrival count pmf: (lam*T)^k * exp(-lam*T) / k!."""
    k = np.asarray(k)
    if np.any(k < 0):
        raise QueueingError("k must be >= 0")
    mu = spec.mean_per_slot
    out = np.exp(k * math.log(mu) - mu - gammaln(k + 1))
    return out if out.ndim else float(out)


def merged_arrival_rate(tau, mu_match, mu_mismatch):
    """Mean departure rate of the coding stage: tau*mu_match + (1-tau)*mu_mismatch."""
    return tau * mu_match + (1 - tau) * mu_mismatch


def _capacity_cdf_db(spec: DepartureSpec, k):
    """Pr{D <= k} where D = floor(T*z*log2(1+sinr)/L) and sinr is dB-Gaussian.

    Equals Phi((g(k+1) - mean)/std) with g(k) = 10*log10(2^(k*L/(T*z)) - 1);
    g(0) = -inf, so Pr{sinr <= 0} = 0.  For std = 0 the SINR is
    deterministic and the comparison is strict, matching floor semantics at
    exact capacity boundaries.
    """
    k = np.asarray(k, dtype=float)
    if spec.bandwidth_z == 0.0:
        return np.where(k >= 0, 1.0, 0.0)
    expo = (k + 1) * spec.packet_bits / (spec.slot_length * spec.bandwidth_z)
    with np.errstate(over="ignore"):
        x = np.expm1(expo * math.log(2.0))
    with np.errstate(divide="ignore"):
        g_db = 10.0 * np.log10(x)
    if spec.sinr_std_db == 0.0:
        return np.where(k < 0, 0.0, (spec.mean_sinr_db < g_db).astype(float))
    return np.where(k < 0, 0.0, ndtr((g_db - spec.mean_sinr_db) / spec.sinr_std_db))


def departure_cdf(spec: DepartureSpec, k):
    """Pr{D <= k}: per-slot packet departures at or below k."""
    if np.any(np.asarray(k) < 0):
        raise QueueingError("k must be >= 0")
    out = _capacity_cdf_db(spec, k)
    return out if out.ndim else float(out)


def departure_pmf(spec: DepartureSpec, k):
    """Pr{D = k}: difference of the departure CDF at k and k-1."""
    k = np.asarray(k)
    if np.any(k < 0):
        raise QueueingError("k must be >= 0")
    out = _capacity_cdf_db(spec, k) - _capacity_cdf_db(spec, k - 1)
    return out if out.ndim else float(out)


def _departure_vectors(spec: DepartureSpec, F):
    """(pd[0..F-1], sd[0..F]) with sd[k] = Pr{D >= k}."""
    cdf = np.asarray(_capacity_cdf_db(spec, np.arange(-1, F)), dtype=float)  # Pr{D<=k}, k=-1..F-1
    pd = np.diff(cdf)
    sd = np.empty(F + 1)
    sd[0] = 1.0
    sd[1:] = 1.0 - cdf[1:]
    return pd, sd


def _arrival_vectors(mean, F):
    """(pa[0..F-1], sa[0..F], excess[0..F]) for Poisson per-slot arrivals."""
    pa = _poisson_pmf_vector(mean, F - 1)
    c = np.arange(F + 1)
    sa = np.asarray(_poisson_tail(mean, c), dtype=float)
    excess = np.asarray(_poisson_excess(mean, c), dtype=float)
    return pa, sa, excess


def _tabulated_vectors(pmf, F, name):
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or pmf.size == 0 or np.any(pmf < 0):
        raise QueueingError(f"{name} pmf must be a 1-D nonnegative vector")
    loss = abs(pmf.sum() - 1.0)
    if loss > 1e-9:
        raise QueueingError(f"{name} pmf mass deviates from 1 by {loss:.3e} (> 1e-9)")
    full = np.zeros(max(pmf.size, F + 1))
    full[: pmf.size] = pmf
    p = full[:F]
    tail = np.concatenate([full[::-1].cumsum()[::-1], [0.0]])   # tail[c] = Pr{X>=c}
    s = tail[: F + 1]
    kk = np.arange(full.size)
    excess = np.array([(np.maximum(kk - c, 0) * full).sum() for c in range(F + 1)])
    return p, s, excess


# ---------------------------------------------------------------------------
# Transition matrix (six-case construction) and steady state
# ---------------------------------------------------------------------------

_OMEGA_INDEX_CACHE: dict[int, tuple] = {}


def _omega_index(F):
    """Precomputed gather indices/masks for the case-by-case matrix build."""
    cached = _OMEGA_INDEX_CACHE.get(F)
    if cached is not None:
        return cached
    a = np.arange(F + 1)[:, None, None]
    b = np.arange(F)[None, :, None]
    d = np.arange(F)[None, None, :]
    m = b - a + d
    corr_mask = ((d <= a - 1) & (m >= 0) & (m <= F - 1)).astype(float)
    corr_idx = np.clip(m, 0, F - 1)
    a2 = np.arange(F + 1)[:, None]
    d2 = np.arange(F)[None, :]
    m2 = F - a2 + d2
    last_mask = (d2 <= a2 - 1).astype(float)
    last_idx = np.clip(m2, 0, F)
    cached = (corr_idx, corr_mask, last_idx, last_mask)
    _OMEGA_INDEX_CACHE[F] = cached
    return cached


def _omega_from_vectors(pa, sa, pd, sd, F):
    """One-step transition matrix for Q' = min(max(Q - D, 0) + A, F).

    Row a, column b < F:  Pr{A=b}*Pr{D>=a} + sum over partial departures
    d in [max(0, a-b), a-1] of Pr{D=d}*Pr{A=b-a+d}; column F collects the
    tail mass Pr{A>=F}*Pr{D>=a} + sum_d Pr{D=d}*Pr{A >= F-a+d}.
    """
    corr_idx, corr_mask, last_idx, last_mask = _omega_index(F)
    om = np.empty((F + 1, F + 1))
    corr = np.einsum("d,abd->ab", pd, pa[corr_idx] * corr_mask)
    om[:, :F] = pa[None, :] * sd[:, None] + corr
    om[:, F] = sa[F] * sd + (sa[last_idx] * last_mask) @ pd
    return om


def _validate_rows(om):
    err = np.abs(om.sum(axis=1) - 1.0).max()
    if err > 1e-10:
        raise QueueingError(f"transition matrix rows deviate from 1 by {err:.3e} (> 1e-10)")
    if om.min() < -1e-12:
        raise QueueingError(f"transition matrix has negative entry {om.min():.3e}")


def transition_matrix(arrival: ArrivalSpec, departure: DepartureSpec, F: int) -> PtqChain:
    """PTQ chain over queue lengths 0..F for Poisson arrivals."""
    if F < 1:
        raise QueueingError(f"F must be >= 1, got {F}")
    pa, sa, excess = _arrival_vectors(arrival.mean_per_slot, F)
    pd, sd = _departure_vectors(departure, F)
    om = _omega_from_vectors(pa, sa, pd, sd, F)
    _validate_rows(om)
    return PtqChain(transition_matrix_omega=om, pa=pa, sa=sa, pd=pd, sd=sd,
                    arrival_excess=excess)


def transition_matrix_from_pmfs(arrival_pmf, departure_pmf, F: int) -> PtqChain:
    """PTQ chain for explicitly tabulated per-slot arrival/departure pmfs."""
    if F < 1:
        raise QueueingError(f"F must be >= 1, got {F}")
    pa, sa, excess = _tabulated_vectors(arrival_pmf, F, "arrival")
    pd, sd, _ = _tabulated_vectors(departure_pmf, F, "departure")
    om = _omega_from_vectors(pa, sa, pd, sd, F)
    _validate_rows(om)
    return PtqChain(transition_matrix_omega=om, pa=pa, sa=sa, pd=pd, sd=sd,
                    arrival_excess=excess)


def _power_iteration(om, steps=200_000, tol=1e-15):
    v = np.full(om.shape[0], 1.0 / om.shape[0])
    for _ in range(steps):
        nxt = v @ om
        if np.abs(nxt - v).max() < tol:
            v = nxt
            break
        v = nxt
    return v / v.sum()


def steady_state(chain: PtqChain) -> np.ndarray:
    """Unique probability vector alpha with Omega^T alpha = alpha, sum = 1.

    Solved directly by replacing one balance equation with the
    normalization row; power iteration is the fallback on conditioning
    failure.  The result is cached on the chain.
    """
    if chain.steady_state_alpha is not None:
        return chain.steady_state_alpha
    om = chain.transition_matrix_omega
    n = om.shape[0]
    a_mat = om.T - np.eye(n)
    a_mat[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    alpha = None
    try:
        alpha = np.linalg.solve(a_mat, rhs)
    except np.linalg.LinAlgError:
        alpha = None
    if alpha is None or not np.all(np.isfinite(alpha)) or alpha.min() < -1e-9:
        alpha = _power_iteration(om)
    alpha = np.clip(alpha, 0.0, None)
    alpha /= alpha.sum()
    residual = np.abs(alpha @ om - alpha).max()
    if residual > 1e-10:
        alpha = _power_iteration(om)
        alpha = np.clip(alpha, 0.0, None)
        alpha /= alpha.sum()
        residual = np.abs(alpha @ om - alpha).max()
        if residual > 1e-10:
            raise QueueingError(f"steady-state residual {residual:.3e} exceeds 1e-10")
    chain.steady_state_alpha = alpha
    chain.cumulative_W = np.cumsum(alpha)
    return alpha


def expected_drops(chain: PtqChain, arrival: ArrivalSpec | None = None,
                   departure: DepartureSpec | None = None, F: int | None = None) -> float:
    """Mean packets dropped per slot at the steady-state PTQ.

    In state l with d departing packets, the free space is F - l + d (or F
    when d >= l), and the expected overflow of the Poisson arrival batch
    beyond that space is an exact truncated-mean expression.
    """
    if F is None:
        F = chain.buffer_size
    if chain.pd is None:
        if arrival is None or departure is None:
            raise QueueingError("chain carries no cached pmfs; pass arrival and departure specs")
        pa, sa, excess = _arrival_vectors(arrival.mean_per_slot, F)
        pd, sd = _departure_vectors(departure, F)
        chain.pa, chain.sa, chain.pd, chain.sd = pa, sa, pd, sd
        chain.arrival_excess = excess
    alpha = steady_state(chain)
    g = _drops_from_vectors(alpha, chain.pd, chain.sd, chain.arrival_excess, F)
    chain.drop_rate_G = g
    return g


def _drops_from_vectors(alpha, pd, sd, excess, F):
    # inner[l] = sum_{k<l} pd[k]*excess[F-l+k] + Pr{D>=l}*excess[F]
    ls = np.arange(1, F + 1)[:, None]
    ks = np.arange(F)[None, :]
    mask = (ks < ls).astype(float)
    idx = np.clip(F - ls + ks, 0, F)
    inner = ((excess[idx] * mask) * pd[None, :]).sum(axis=1) + sd[1:] * excess[F]
    return float(alpha[0] * excess[F] + alpha[1:] @ inner)


def ptq_metrics(chain: PtqChain, arrival: ArrivalSpec | None = None,
                F: int | None = None, T: float | None = None,
                arrival_rate: float | None = None,
                slot_length: float | None = None):
    """(loss ratio, queueing latency) of the steady-state PTQ.

    Loss is drops per slot over mean arrivals per slot; latency follows
    Little's law on the mean queue length and the effective (admitted)
    arrival rate.
    """
    if arrival is not None:
        arrival_rate = arrival.rate
        slot_length = arrival.slot_length if T is None else T
    elif slot_length is None:
        slot_length = T
    if arrival_rate is None or slot_length is None:
        raise QueueingError("ptq_metrics needs an ArrivalSpec or explicit rate and slot length")
    if F is None:
        F = chain.buffer_size
    alpha = steady_state(chain)
    g = chain.drop_rate_G if chain.drop_rate_G is not None else expected_drops(chain, F=F)
    mean_per_slot = arrival_rate * slot_length
    theta = min(g / mean_per_slot, 1.0)
    mean_q = float(np.arange(F + 1) @ alpha)
    lam_eff = arrival_rate * (1.0 - theta)
    if lam_eff <= 0.0:
        if mean_q == 0.0:
            return theta, 0.0
        raise DegenerateQueueError(
            f"effective arrival rate is {lam_eff}; latency undefined (loss {theta:.4f})"
        )
    return theta, mean_q / lam_eff


# ---------------------------------------------------------------------------
# SCQ (M/G/1, Pollaczek-Khintchine)
# ---------------------------------------------------------------------------

def scq_latency(user: MobileUser, variance_model: str = "mixture") -> ScqAnalysis:
    """Steady-state mean sojourn time of the semantic-coding queue.

    The service time is Exp(mu_match) with probability tau and
    Exp(mu_mismatch) otherwise, so E[I] = tau/mu_match + (1-tau)/mu_mismatch
    in both variance models.  ``mixture`` uses the hyperexponential second
    moment E[I^2] = 2*tau/mu_match^2 + 2*(1-tau)/mu_mismatch^2;
    ``weighted-sum`` instead treats the variance as the weighted sum of the
    two exponential variances, V = (tau/mu_match)^2 + ((1-tau)/mu_mismatch)^2.
    """
    tau = user.matching_degree_tau
    lam = user.arrival_rate_lambda
    mean_service = tau / user.mu_match + (1 - tau) / user.mu_mismatch
    utilization = lam * mean_service
    if utilization >= 1.0:
        raise UnstableQueueError(
            f"user {user.id}: SCQ utilization {utilization:.4f} >= 1", utilization
        )
    if variance_model == "mixture":
        second = 2 * tau / user.mu_match**2 + 2 * (1 - tau) / user.mu_mismatch**2
    elif variance_model == "weighted-sum":
        var = (tau / user.mu_match) ** 2 + ((1 - tau) / user.mu_mismatch) ** 2
        second = mean_service**2 + var
    else:
        raise QueueingError(f"unknown variance_model {variance_model!r}")
    latency = lam * second / (2.0 * (1.0 - utilization)) + mean_service
    return ScqAnalysis(mean_service=mean_service, second_moment=second,
                       utilization=utilization, latency_S1=latency)


# ---------------------------------------------------------------------------
# Combined link metrics
# ---------------------------------------------------------------------------

def _ptq_solve_fast(arrival_mean, dep_spec, F):
    """(theta, mean queue length) without constructing a PtqChain."""
    pa, sa, excess = _arrival_vectors(arrival_mean, F)
    pd, sd = _departure_vectors(dep_spec, F)
    om = _omega_from_vectors(pa, sa, pd, sd, F)
    n = F + 1
    a_mat = om.T - np.eye(n)
    a_mat[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        alpha = np.linalg.solve(a_mat, rhs)
    except np.linalg.LinAlgError:
        alpha = _power_iteration(om)
    if not np.all(np.isfinite(alpha)) or alpha.min() < -1e-9:
        alpha = _power_iteration(om)
    alpha = np.clip(alpha, 0.0, None)
    alpha /= alpha.sum()
    g = _drops_from_vectors(alpha, pd, sd, excess, F)
    theta = min(g / arrival_mean, 1.0)
    mean_q = float(np.arange(n) @ alpha)
    return theta, mean_q


def ptq_arrival_rate(user: MobileUser, mode: str) -> float:
    """PTQ input rate: the merged coding-stage rate for semantic mode,
    the raw packet source rate for bit mode."""
    if mode == SEMCOM:
        return merged_arrival_rate(user.matching_degree_tau, user.mu_match, user.mu_mismatch)
    if mode == BITCOM:
        return user.arrival_rate_lambda
    raise QueueingError(f"unknown mode {mode!r}")


def link_metrics(user: MobileUser, link: LinkModel, z: float, mode: str,
                 sys: SystemConfig, variance_model: str = "mixture") -> LinkQueueMetrics:
    """Loss ratio and total queueing latency of one link at bandwidth z."""
    if z < 0:
        raise QueueingError(f"bandwidth must be >= 0, got {z}")
    scq_delay = 0.0
    if mode == SEMCOM:
        scq_delay = scq_latency(user, variance_model).latency_S1
    rate = ptq_arrival_rate(user, mode)
    dep = DepartureSpec(bandwidth_z=z, mean_sinr_db=link.mean_sinr_db,
                        sinr_std_db=link.sinr_std_db,
                        slot_length=sys.slot_length_T, packet_bits=sys.packet_bits_L)
    theta, mean_q = _ptq_solve_fast(rate * sys.slot_length_T, dep, sys.buffer_size_F)
    lam_eff = rate * (1.0 - theta)
    if lam_eff <= 0.0:
        if mean_q == 0.0:
            ptq_delay = 0.0
        else:
            raise DegenerateQueueError(
                f"link ({link.mu_id}, {link.bs_id}): effective arrival rate is 0 at z={z}"
            )
    else:
        ptq_delay = mean_q / lam_eff
    return LinkQueueMetrics(
        mode=mode,
        loss_ratio=theta,
        ptq_latency=ptq_delay,
        scq_latency=scq_delay,
        total_latency=scq_delay + ptq_delay,
        effective_arrival=lam_eff,
    )


def mean_message_rate(user: MobileUser, link: LinkModel, z: float, mode: str) -> float:
    """Long-run mean message rate (msg/s) of the link at bandwidth z.

    Semantic mode passes the mean-SINR Shannon rate through the link's B2M
    function and scales by the matching degree; bit mode scales the Shannon
    rate by the link's fixed bit-level B2M coefficient.
    """
    if z < 0:
        raise QueueingError(f"bandwidth must be >= 0, got {z}")
    bitrate = z * math.log2(1.0 + link.mean_sinr_linear)
    if mode == SEMCOM:
        return user.matching_degree_tau * float(link.b2m(bitrate))
    if mode == BITCOM:
        return link.rho * bitrate
    raise QueueingError(f"unknown mode {mode!r}")
