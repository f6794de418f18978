"""Queueing analysis and joint resource optimization for hybrid
semantic/bit cellular links."""

from .scenario import (
    SEMCOM, BITCOM,
    B2MFunction, BaseStation, GenerationConfig, LinkModel, MobileUser,
    Scenario, ScenarioError, SystemConfig, UnreachableRateError,
    b2m_eval, b2m_invert, generate_scenario, load_scenario, save_scenario,
)
from .queueing import (
    ArrivalSpec, DegenerateQueueError, DepartureSpec, LinkQueueMetrics,
    PtqChain, QueueingError, ScqAnalysis, UnstableQueueError,
    departure_cdf, departure_pmf, expected_drops, link_metrics,
    mean_message_rate, merged_arrival_rate, poisson_pmf, ptq_metrics,
    scq_latency, steady_state, transition_matrix, transition_matrix_from_pmfs,
)
from .simulate import (
    LinkValidation, SimConfig, SimEstimate, simulate_ptq, simulate_scq,
    validate_link,
)
from .optimize import (
    Assignment, BandwidthThresholds, DualState, ObjectiveReport,
    OptimizationError, OptimizerConfig,
    allocate_bandwidth, assign_best, benchmark_assign, compute_thresholds,
    compute_xi, evaluate_objective, min_bandwidth_qos, min_bandwidth_rate,
    repair_feasibility, solve, solve_all_schemes, solve_ua_ms,
    update_multipliers,
)
from .experiments import ExperimentSpec, ExperimentResult, run_experiment, summarize

__version__ = "0.1.0"
