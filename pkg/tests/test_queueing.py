import math

import numpy as np
import pytest

from sembit.scenario import SEMCOM, BITCOM, B2MFunction, LinkModel, MobileUser, SystemConfig
from sembit.queueing import (
    ArrivalSpec, DepartureSpec, QueueingError, UnstableQueueError,
    departure_cdf, departure_pmf, expected_drops, link_metrics,
    mean_message_rate, merged_arrival_rate, poisson_pmf, ptq_metrics,
    scq_latency, steady_state, transition_matrix, transition_matrix_from_pmfs,
)

from oracles import brute_force_transition_matrix, power_iteration


def make_user(tau=0.5, lam=1000.0, mu_match=1250.0, mu_mismatch=1000.0):
    return MobileUser(id=0, position=(0.0, 0.0), arrival_rate_lambda=lam,
                      matching_degree_tau=tau, mu_match=mu_match,
                      mu_mismatch=mu_mismatch, min_rate_Mo=50.0)


def make_link(mean_db=0.0, std_db=4.0, sigma=2e-4, rho=1e-4):
    return LinkModel(mu_id=0, bs_id=0, mean_sinr_db=mean_db, sinr_std_db=std_db,
                     b2m=B2MFunction(kind="linear", sigma=sigma), rho=rho)


TABLE_DEFAULTS = SystemConfig()


# ---------------------------------------------------------------------------
# Arrival process
# ---------------------------------------------------------------------------

def test_poisson_pmf_unit_mean():
    spec = ArrivalSpec(rate=1000.0, slot_length=1e-3)
    assert poisson_pmf(spec, 0) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_poisson_pmf_merged_rate_point():
    lam_merged = merged_arrival_rate(0.5, 1250.0, 1000.0)
    assert lam_merged == pytest.approx(1125.0)
    spec = ArrivalSpec(rate=lam_merged, slot_length=1e-3)
    assert poisson_pmf(spec, 1) == pytest.approx(1.125 * math.exp(-1.125), rel=1e-12)


def test_poisson_pmf_normalization():
    for rate in (100.0, 1125.0, 4000.0):
        spec = ArrivalSpec(rate=rate, slot_length=1e-3)
        ks = np.arange(0, 200)
        assert poisson_pmf(spec, ks).sum() >= 1.0 - 1e-12


def test_merged_rate_boundaries():
    assert merged_arrival_rate(1.0, 1250.0, 1000.0) == 1250.0
    assert merged_arrival_rate(0.0, 1250.0, 1000.0) == 1000.0


# ---------------------------------------------------------------------------
# Coding queue (Pollaczek-Khintchine)
# ---------------------------------------------------------------------------

def test_scq_reduces_to_mm1_when_fully_matched():
    res = scq_latency(make_user(tau=1.0))
    assert res.latency_S1 == pytest.approx(1.0 / (1250.0 - 1000.0), rel=1e-12)


def test_scq_mixture_reference_point():
    res = scq_latency(make_user(tau=0.5), variance_model="mixture")
    assert res.latency_S1 == pytest.approx(9.1e-3, rel=1e-12)


def test_scq_weighted_sum_reference_point():
    res = scq_latency(make_user(tau=0.5), variance_model="weighted-sum")
    assert res.latency_S1 == pytest.approx(7.0e-3, rel=1e-12)


def test_scq_unstable_raises_with_utilization():
    user = make_user(tau=0.0, lam=1000.0, mu_mismatch=900.0, mu_match=1000.0)
    with pytest.raises(UnstableQueueError) as err:
        scq_latency(user)
    assert err.value.utilization == pytest.approx(1000.0 / 900.0)


# ---------------------------------------------------------------------------
# Departure process
# ---------------------------------------------------------------------------

def test_departure_zero_bandwidth_degenerate():
    spec = DepartureSpec(bandwidth_z=0.0, mean_sinr_db=0.0, sinr_std_db=4.0,
                         slot_length=1e-3, packet_bits=800.0)
    assert departure_pmf(spec, 0) == 1.0
    assert departure_pmf(spec, 3) == 0.0
    assert departure_cdf(spec, 0) == 1.0


def test_departure_deterministic_exact_capacity():
    # T*z*log2(1+1)/L = 1e-3 * 1.6e6 / 800 = 2 packets exactly
    spec = DepartureSpec(bandwidth_z=1.6e6, mean_sinr_db=0.0, sinr_std_db=0.0,
                         slot_length=1e-3, packet_bits=800.0)
    assert departure_pmf(spec, 2) == 1.0
    assert departure_pmf(spec, 1) == 0.0
    assert departure_cdf(spec, 1) == 0.0
    assert departure_cdf(spec, 2) == 1.0


def test_departure_cdf_matches_monte_carlo():
    spec = DepartureSpec(bandwidth_z=1.55e6, mean_sinr_db=0.0, sinr_std_db=4.0,
                         slot_length=1e-3, packet_bits=800.0)
    rng = np.random.default_rng(123)
    g_db = rng.normal(0.0, 4.0, 1_000_000)
    d = np.floor(1e-3 * 1.55e6 * np.log2(1 + 10 ** (g_db / 10)) / 800.0)
    for k in range(6):
        empirical = (d <= k).mean()
        assert departure_cdf(spec, k) == pytest.approx(empirical, abs=1e-3)


def test_departure_pmf_sums_to_one():
    spec = DepartureSpec(bandwidth_z=2.3e6, mean_sinr_db=3.0, sinr_std_db=5.0,
                         slot_length=1e-3, packet_bits=800.0)
    ks = np.arange(0, 200)
    assert departure_pmf(spec, ks).sum() == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Transition matrix and steady state
# ---------------------------------------------------------------------------

def test_transition_matrix_zero_arrival_limit():
    chain = transition_matrix_from_pmfs([1.0], [0.4, 0.6], F=3)
    om = chain.transition_matrix_omega
    assert om[0, 0] == 1.0
    # from any state, arrivals are zero so the queue can only drain
    assert np.allclose(np.triu(om, 1), 0.0)
    alpha = steady_state(chain)
    assert np.allclose(alpha, [1.0, 0.0, 0.0, 0.0], atol=1e-12)


def test_transition_matrix_hand_case_f1():
    chain = transition_matrix_from_pmfs([0.5, 0.5], [0.5, 0.5], F=1)
    expected = np.array([[0.5, 0.5], [0.25, 0.75]])
    assert np.allclose(chain.transition_matrix_omega, expected, atol=1e-15)
    oracle = brute_force_transition_matrix([0.5, 0.5], [0.5, 0.5], 1)
    assert np.allclose(chain.transition_matrix_omega, oracle, atol=1e-15)
    alpha = steady_state(chain)
    assert np.allclose(alpha, [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)


def test_transition_matrix_against_brute_force_fuzz():
    rng = np.random.default_rng(42)
    for _ in range(60):
        F = int(rng.integers(1, 9))
        na = int(rng.integers(1, F + 4))
        nd = int(rng.integers(1, F + 4))
        pa = rng.random(na) + 1e-3
        pa /= pa.sum()
        pd = rng.random(nd) + 1e-3
        pd /= pd.sum()
        chain = transition_matrix_from_pmfs(pa, pd, F)
        oracle = brute_force_transition_matrix(pa, pd, F)
        assert np.abs(chain.transition_matrix_omega - oracle).max() < 1e-12


def test_transition_matrix_table_defaults_stochastic():
    arrival = ArrivalSpec(rate=1125.0, slot_length=1e-3)
    departure = DepartureSpec(bandwidth_z=1.55e6, mean_sinr_db=0.0, sinr_std_db=4.0,
                              slot_length=1e-3, packet_bits=800.0)
    chain = transition_matrix(arrival, departure, F=20)
    om = chain.transition_matrix_omega
    assert om.shape == (21, 21)
    assert om.min() >= 0.0 and om.max() <= 1.0
    assert np.abs(om.sum(axis=1) - 1.0).max() < 1e-10


def test_steady_state_matches_power_iteration_fuzz():
    rng = np.random.default_rng(5)
    for _ in range(25):
        F = 20
        mean = rng.uniform(0.3, 2.5)
        spec_a = ArrivalSpec(rate=mean / 1e-3, slot_length=1e-3)
        spec_d = DepartureSpec(bandwidth_z=rng.uniform(0.8e6, 3e6),
                               mean_sinr_db=rng.uniform(-4, 6),
                               sinr_std_db=rng.uniform(1.5, 5.0),
                               slot_length=1e-3, packet_bits=800.0)
        chain = transition_matrix(spec_a, spec_d, F)
        alpha = steady_state(chain)
        assert alpha.min() >= 0.0
        assert alpha.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.abs(alpha @ chain.transition_matrix_omega - alpha).max() < 1e-10
        oracle = power_iteration(chain.transition_matrix_omega, 20_000)
        assert np.abs(alpha - oracle).max() < 1e-8
        assert chain.cumulative_W[-1] == pytest.approx(1.0, abs=1e-10)
        assert np.all(np.diff(chain.cumulative_W) >= -1e-15)


def test_tabulated_pmf_mass_check():
    with pytest.raises(QueueingError, match="1e-9"):
        transition_matrix_from_pmfs([0.5, 0.49], [1.0], F=2)


# ---------------------------------------------------------------------------
# Drops, loss, latency
# ---------------------------------------------------------------------------

def test_drops_zero_when_no_arrivals():
    chain = transition_matrix_from_pmfs([1.0], [0.3, 0.7], F=4)
    assert expected_drops(chain) == pytest.approx(0.0, abs=1e-15)


def test_drops_zero_when_arrivals_fit_free_space():
    # buffer 4, at most 1 arrival, at least 1 departure per slot: never full
    chain = transition_matrix_from_pmfs([0.5, 0.5], [0.0, 0.5, 0.5], F=4)
    assert expected_drops(chain) == pytest.approx(0.0, abs=1e-14)


def test_ptq_metrics_empty_queue():
    chain = transition_matrix_from_pmfs([1.0], [0.5, 0.5], F=5)
    theta, delta = ptq_metrics(chain, arrival_rate=100.0, slot_length=1e-3)
    assert theta == pytest.approx(0.0, abs=1e-15)
    assert delta == pytest.approx(0.0, abs=1e-15)


def test_drop_rate_matches_slot_simulation():
    from sembit.simulate import _draw_slots, _ptq_kernel
    arrival = ArrivalSpec(rate=1125.0, slot_length=1e-3)
    departure = DepartureSpec(bandwidth_z=1.15e6, mean_sinr_db=0.0, sinr_std_db=4.0,
                              slot_length=1e-3, packet_bits=800.0)
    F = 20
    chain = transition_matrix(arrival, departure, F)
    g = expected_drops(chain)
    rng = np.random.default_rng(77)
    arr, dep = _draw_slots(rng, 4_000_000, arrival.mean_per_slot, departure)
    _, arrivals, _, drops, _, _, _ = _ptq_kernel(arr, dep, F, 0, 0, 0, 0, 0, 0, 0)
    sim_g = drops / arr.shape[0]
    assert g == pytest.approx(sim_g, rel=0.02)


def test_loss_and_latency_match_simulation_at_reference_point():
    from sembit.simulate import SimConfig, simulate_ptq
    arrival = ArrivalSpec(rate=1125.0, slot_length=1e-3)
    departure = DepartureSpec(bandwidth_z=1.2e6, mean_sinr_db=0.0, sinr_std_db=4.0,
                              slot_length=1e-3, packet_bits=800.0)
    F = 20
    chain = transition_matrix(arrival, departure, F)
    theta, delta = ptq_metrics(chain, arrival, F=F)
    loss_est, lat_est = simulate_ptq(arrival, departure, F,
                                     SimConfig(num_slots=1_000_000, replications=8, seed=3))
    assert loss_est.mean == pytest.approx(theta, rel=0.02)
    assert lat_est.covers(delta) or lat_est.mean == pytest.approx(delta, rel=0.02)


# ---------------------------------------------------------------------------
# Link metrics and message rate
# ---------------------------------------------------------------------------

def test_link_metrics_total_is_sum_of_stages():
    m = link_metrics(make_user(tau=0.5), make_link(), 1.55e6, SEMCOM, TABLE_DEFAULTS)
    assert m.total_latency == pytest.approx(m.scq_latency + m.ptq_latency, rel=1e-12)
    assert m.scq_latency == pytest.approx(9.1e-3, rel=1e-12)
    mb = link_metrics(make_user(tau=0.5), make_link(), 1.55e6, BITCOM, TABLE_DEFAULTS)
    assert mb.scq_latency == 0.0
    assert mb.total_latency == mb.ptq_latency


def test_semcom_loss_dominates_bitcom_at_equal_bandwidth():
    # fully matched coding stage feeds packets faster than the raw source
    rng = np.random.default_rng(11)
    for _ in range(50):
        user = make_user(tau=1.0, lam=1000.0,
                         mu_match=float(rng.uniform(1050, 2000)), mu_mismatch=1000.0)
        link = make_link(mean_db=float(rng.uniform(-3, 6)),
                         std_db=float(rng.uniform(1, 5)))
        z = float(rng.uniform(0.9e6, 2.2e6))
        ms = link_metrics(user, link, z, SEMCOM, TABLE_DEFAULTS)
        mb = link_metrics(user, link, z, BITCOM, TABLE_DEFAULTS)
        assert ms.loss_ratio >= mb.loss_ratio - 1e-12


def test_mean_message_rate_points():
    assert mean_message_rate(make_user(), make_link(), 0.0, SEMCOM) == 0.0
    assert mean_message_rate(make_user(), make_link(rho=1e-4), 1e6, BITCOM) == pytest.approx(100.0)
    user = make_user(tau=1.0)
    link = make_link(sigma=3e-4)
    z = 2e6
    cap = z * math.log2(1 + link.mean_sinr_linear)
    assert mean_message_rate(user, link, z, SEMCOM) == pytest.approx(3e-4 * cap, rel=1e-12)


def test_mean_message_rate_monotone_in_bandwidth():
    user = make_user(tau=0.8)
    link = make_link()
    zs = np.linspace(0, 2e7, 60)
    vals = [mean_message_rate(user, link, z, SEMCOM) for z in zs]
    assert np.all(np.diff(vals) >= -1e-9)
    vals_b = [mean_message_rate(user, link, z, BITCOM) for z in zs]
    assert np.all(np.diff(vals_b) >= -1e-9)


def test_departure_cdf_decreasing_in_bandwidth():
    # more bandwidth shifts the departure distribution upward
    spec_lo = DepartureSpec(bandwidth_z=1.0e6, mean_sinr_db=0.0, sinr_std_db=4.0,
                            slot_length=1e-3, packet_bits=800.0)
    spec_hi = DepartureSpec(bandwidth_z=1.6e6, mean_sinr_db=0.0, sinr_std_db=4.0,
                            slot_length=1e-3, packet_bits=800.0)
    for k in range(8):
        assert departure_cdf(spec_lo, k) >= departure_cdf(spec_hi, k) - 1e-12
