import numpy as np
import pytest

from sembit.scenario import SEMCOM, BITCOM, B2MFunction, LinkModel, MobileUser, SystemConfig
from sembit.queueing import ArrivalSpec, DepartureSpec, UnstableQueueError, scq_latency
from sembit.simulate import (
    SimConfig, _ptq_kernel, _ptq_replication, simulate_ptq, simulate_scq,
    validate_link,
)


def make_user(tau=1.0, lam=1000.0, mu_match=1250.0, mu_mismatch=1000.0):
    return MobileUser(id=0, position=(0.0, 0.0), arrival_rate_lambda=lam,
                      matching_degree_tau=tau, mu_match=mu_match,
                      mu_mismatch=mu_mismatch, min_rate_Mo=50.0)


def make_link(mean_db=0.0, std_db=4.0):
    return LinkModel(mu_id=0, bs_id=0, mean_sinr_db=mean_db, sinr_std_db=std_db,
                     b2m=B2MFunction(kind="linear", sigma=2e-4), rho=1e-4)


def kernel_step(q, d, a, F):
    arr = np.array([a], dtype=np.int64)
    dep = np.array([d], dtype=np.int64)
    q2, arrivals, deps, drops, qsum, lo, hi = _ptq_kernel(arr, dep, F, q, 0, 0, 0, 0, q, q)
    return q2, drops


def test_single_step_normal_update():
    q, drops = kernel_step(q=5, d=2, a=3, F=20)
    assert q == 6 and drops == 0


def test_single_step_overflow_drops():
    q, drops = kernel_step(q=19, d=0, a=4, F=20)
    assert q == 20 and drops == 3


def test_single_step_drain_floor():
    q, drops = kernel_step(q=1, d=5, a=0, F=20)
    assert q == 0 and drops == 0


def test_replication_conservation_and_bounds():
    arrival = ArrivalSpec(rate=1500.0, slot_length=1e-3)
    departure = DepartureSpec(bandwidth_z=1.0e6, mean_sinr_db=0.0, sinr_std_db=4.0,
                              slot_length=1e-3, packet_bits=800.0)
    # conservation and 0 <= q <= F are asserted inside the replication
    loss, lat = _ptq_replication(arrival, departure, 10, 200_000, 20_000,
                                 np.random.default_rng(4))
    assert 0.0 <= loss <= 1.0 and lat >= 0.0


def test_ptq_seeded_determinism():
    arrival = ArrivalSpec(rate=1125.0, slot_length=1e-3)
    departure = DepartureSpec(bandwidth_z=1.4e6, mean_sinr_db=0.0, sinr_std_db=4.0,
                              slot_length=1e-3, packet_bits=800.0)
    cfg = SimConfig(num_slots=100_000, replications=3, seed=11)
    first = simulate_ptq(arrival, departure, 20, cfg)
    second = simulate_ptq(arrival, departure, 20, cfg)
    assert first[0].mean == second[0].mean
    assert first[1].mean == second[1].mean
    other = simulate_ptq(arrival, departure, 20,
                         SimConfig(num_slots=100_000, replications=3, seed=12))
    assert other[0].mean != first[0].mean


def test_scq_low_load_sojourn_is_service_time():
    user = make_user(tau=1.0, lam=1.0, mu_match=1250.0, mu_mismatch=1000.0)
    est = simulate_scq(user, SimConfig(num_slots=40_000, replications=5, seed=2))
    assert est.covers(1.0 / 1250.0) or est.mean == pytest.approx(1.0 / 1250.0, rel=0.02)


def test_scq_matches_mm1_closed_form():
    user = make_user(tau=1.0)
    est = simulate_scq(user, SimConfig(num_slots=300_000, replications=6, seed=8))
    assert est.covers(4.0e-3) or est.mean == pytest.approx(4.0e-3, rel=0.02)


def test_scq_matches_mixture_model():
    user = make_user(tau=0.5)
    est = simulate_scq(user, SimConfig(num_slots=300_000, replications=6, seed=9))
    analytic = scq_latency(user, "mixture").latency_S1
    assert est.covers(analytic) or est.mean == pytest.approx(analytic, rel=0.02)


def test_scq_rejects_unstable_input():
    user = make_user(tau=0.0, lam=1000.0, mu_match=1001.0, mu_mismatch=999.0)
    with pytest.raises(UnstableQueueError):
        simulate_scq(user, SimConfig(num_slots=1000, replications=2, seed=0))


def test_validate_link_reference_defaults():
    report = validate_link(make_user(tau=1.0), make_link(), 1.8e6, SEMCOM,
                           SystemConfig(), SimConfig(num_slots=400_000,
                                                     replications=5, seed=21))
    metrics = {r.metric for r in report.rows}
    assert metrics == {"loss_ratio", "ptq_latency", "scq_latency"}
    for row in report.rows:
        assert row.within_ci or row.rel_gap < 0.05


def test_validate_link_negligible_loss_regime():
    report = validate_link(make_user(tau=1.0), make_link(), 6e6, BITCOM,
                           SystemConfig(), SimConfig(num_slots=100_000,
                                                     replications=4, seed=5))
    loss_row = next(r for r in report.rows if r.metric == "loss_ratio")
    assert loss_row.analytic < 1e-6 and loss_row.simulated < 1e-6
    assert loss_row.within_ci


def test_validate_link_statistical_acceptance():
    # 10 random stable configurations; at least 9 fully within 95% CIs
    rng = np.random.default_rng(31)
    passed = 0
    for _ in range(10):
        tau = float(rng.uniform(0.3, 1.0))
        user = make_user(tau=tau)
        link = make_link(mean_db=float(rng.uniform(-2, 5)),
                         std_db=float(rng.uniform(2, 5)))
        z = float(rng.uniform(1.3e6, 2.5e6))
        mode = SEMCOM if rng.random() < 0.5 else BITCOM
        report = validate_link(user, link, z, mode, SystemConfig(),
                               SimConfig(num_slots=750_000, replications=8,
                                         seed=int(rng.integers(1 << 30))))
        passed += report.passed
    assert passed >= 9
