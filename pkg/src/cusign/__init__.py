"""CUSIGN non-randomness detection for stealthy sensor attacks on LTI systems."""

__version__ = "0.1.0"

from .attacks import AttackKind, AttackSpec, AttackerView, apply_attack, payload_at, stealthy_xi
from .chi2 import (
    ChiSquareContext,
    ChiSquareDetector,
    chi2_threshold_alarm,
    median_reference,
    reg_lower_gamma,
    sign_probabilities,
    test_measure,
)
from .cusign_detector import (
    AlarmRateBounds,
    CusignConfig,
    CusignDetector,
    CusignState,
    cusign_step,
    detection_bounds,
    expected_alarm_rate,
    monitor,
    mre_update,
    sign_of,
    theta_scale,
    transition_matrix,
)
from .cusum_detector import CusumConfig, CusumDetector, CusumState, cusum_step, tune_threshold, windowed_alarm_rate
from .lti import (
    EstimatorState,
    SteadyStateKalmanFilter,
    SystemModel,
    kf_step,
    make_rng,
    mat_sqrt_sym,
    simulate_step,
    solve_steady_state,
)
from .ugv import ScenarioConfig, ScenarioTrace, UgvParams, build_ugv_model, run_scenario, waypoint_controller

__all__ = [
    "AlarmRateBounds",
    "AttackKind",
    "AttackSpec",
    "AttackerView",
    "ChiSquareContext",
    "ChiSquareDetector",
    "CusignConfig",
    "CusignDetector",
    "CusignState",
    "CusumConfig",
    "CusumDetector",
    "CusumState",
    "EstimatorState",
    "ScenarioConfig",
    "ScenarioTrace",
    "SteadyStateKalmanFilter",
    "SystemModel",
    "UgvParams",
    "apply_attack",
    "build_ugv_model",
    "chi2_threshold_alarm",
    "cusign_step",
    "cusum_step",
    "detection_bounds",
    "expected_alarm_rate",
    "kf_step",
    "make_rng",
    "mat_sqrt_sym",
    "median_reference",
    "monitor",
    "mre_update",
    "payload_at",
    "reg_lower_gamma",
    "run_scenario",
    "sign_of",
    "sign_probabilities",
    "simulate_step",
    "solve_steady_state",
    "stealthy_xi",
    "test_measure",
    "theta_scale",
    "transition_matrix",
    "tune_threshold",
    "waypoint_controller",
    "windowed_alarm_rate",
]
