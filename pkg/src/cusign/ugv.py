"""Skid-steer UGV case study: linearized model, waypoint controller, closed loop.

State ``x = [v, heading, omega]``, input ``u = [F_l, F_r]``:

    dv/dt       = (F_l + F_r - B_r v) / m
    domega/dt   = (w (F_l - F_r) / 2 - B_l omega) / I_z
    dheading/dt = omega

discretized by forward Euler at ``t_s`` with all three states measured.
Planar position is not part of the linear state; it is integrated
kinematically, from the true state for the vehicle and from the estimate for
the controller's dead-reckoned position.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackerView, AttackKind, AttackSpec, apply_attack
from .chi2 import test_measure
from .cusign_detector import CusignConfig, CusignState, cusign_step, detection_bounds, expected_alarm_rate, monitor
from .cusum_detector import CusumConfig, CusumState, cusum_step, rate_band, windowed_alarm_rate
from .lti import SystemModel, kf_step, make_rng, measure, propagate, solve_steady_state

CSV_SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class UgvParams:
    m: float = 10.0
    I_z: float = 1.0
    w: float = 0.5
    B_r: float = 5.0
    B_l: float = 2.0
    t_s: float = 0.01

    def __post_init__(self):
        for name in ("m", "I_z", "w", "B_r", "B_l", "t_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"UGV parameter {name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class ControllerGains:
    k_v: float = 2.0
    k_heading: float = 3.0
    k_omega: float = 10.0
    f_max: float = 50.0
    switch_radius: float = 0.2


DEFAULT_Q = np.diag([1e-4, 1e-5, 1e-4])
DEFAULT_R = np.diag([1e-3, 1e-3, 1e-3])


def continuous_matrices(params):
    p = params
    A_c = np.array([[-p.B_r / p.m, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -p.B_l / p.I_z]])
    B_c = np.array([[1.0 / p.m, 1.0 / p.m], [0.0, 0.0], [p.w / (2 * p.I_z), -p.w / (2 * p.I_z)]])
    return A_c, B_c


def build_ugv_model(params, Q=None, R=None):
    A_c, B_c = continuous_matrices(params)
    A = np.eye(3) + params.t_s * A_c
    B = params.t_s * B_c
    return SystemModel(A=A, B=B, C=np.eye(3), Q=DEFAULT_Q if Q is None else Q, R=DEFAULT_R if R is None else R)


def wrap_angle(a):
    """Map an angle to (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def waypoint_controller(xhat, position, goal, params, speed=0.5, gains=ControllerGains()):
    """Proportional speed and heading control, returns ``[F_l, F_r]``.

    The speed loop sets the force sum around the cruise feedforward
    ``B_r * speed``; the heading loop sets the force difference from a
    yaw-rate command proportional to the wrapped bearing error.
    """
    v, heading, omega = xhat
    bearing = math.atan2(goal[1] - position[1], goal[0] - position[0])
    heading_error = wrap_angle(bearing - heading)
    f_sum = params.B_r * speed + params.m * gains.k_v * (speed - v)
    omega_cmd = gains.k_heading * heading_error
    f_diff = (2.0 / params.w) * (params.B_l * omega_cmd + params.I_z * gains.k_omega * (omega_cmd - omega))
    u = np.array([0.5 * (f_sum + f_diff), 0.5 * (f_sum - f_diff)])
    return np.clip(u, -gains.f_max, gains.f_max)


def square_corners(side):
    return np.array([[side, 0.0], [side, side], [0.0, side], [0.0, 0.0]])


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one closed-loop run."""

    params: UgvParams = field(default_factory=UgvParams)
    gains: ControllerGains = field(default_factory=ControllerGains)
    side_length: float = 5.0
    speed: float = 0.5
    duration: float = 200.0
    Q: np.ndarray = field(default_factory=lambda: DEFAULT_Q.copy())
    R: np.ndarray = field(default_factory=lambda: DEFAULT_R.copy())
    tau: int = 2
    ell: int = 100
    Z: float = 3.0
    z_ref: float | None = None
    cusum_bias: float = 3.3
    cusum_threshold: float = 2.3226
    cusum_target_rate: float = 0.15
    cusum_window: int = 100
    cusum_Z: float = 3.0
    attack: AttackSpec = field(default_factory=AttackSpec)
    seed: int = 0
    warmup: int | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not self.side_length > 0:
            raise ValueError(f"side_length must be positive, got {self.side_length}")
        if not self.speed > 0:
            raise ValueError(f"speed must be positive, got {self.speed}")

    @property
    def n_steps(self):
        return int(round(self.duration / self.params.t_s))

    @property
    def warmup_steps(self):
        return 5 * self.ell if self.warmup is None else self.warmup


TRACE_VECTORS = ("x", "xhat", "y", "xi", "r")
TRACE_SCALARS = (
    "z",
    "S_plus",
    "S_minus",
    "zeta_plus",
    "zeta_minus",
    "alpha_plus",
    "alpha_minus",
    "C",
    "zeta_C",
    "alpha_C",
    "cusign_detect",
    "cusum_detect",
)


def csv_columns(s=3):
    cols = ["k", "t"]
    for name in TRACE_VECTORS:
        cols += [f"{name}{i + 1}" for i in range(s)]
    return cols + list(TRACE_SCALARS)


@dataclass(eq=False)
class ScenarioTrace:
    """Per-step record of a closed-loop run (one row per sample)."""

    config: ScenarioConfig
    k: np.ndarray
    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    r: np.ndarray
    z: np.ndarray
    S_plus: np.ndarray
    S_minus: np.ndarray
    zeta_plus: np.ndarray
    zeta_minus: np.ndarray
    alpha_plus: np.ndarray
    alpha_minus: np.ndarray
    C: np.ndarray
    zeta_C: np.ndarray
    alpha_C: np.ndarray
    cusign_detect: np.ndarray
    cusum_detect: np.ndarray
    position: np.ndarray
    position_hat: np.ndarray
    goal_index: np.ndarray
    bounds_plus: object = None
    bounds_minus: object = None
    cusum_band: tuple = None

    def __len__(self):
        return self.k.size

    def first_detection(self, flags, start=None):
        start = self.config.warmup_steps if start is None else start
        hits = np.flatnonzero(flags[start:])
        return int(self.k[start + hits[0]]) if hits.size else None

    def summary(self):
        warm = self.config.warmup_steps
        onset = self.config.attack.onset if self.config.attack.kind is not AttackKind.NONE else None
        out = {
            "steps": len(self),
            "warmup": warm,
            "attack_kind": self.config.attack.kind.value,
            "attack_onset": onset,
            "cusign_first_detection": self.first_detection(self.cusign_detect),
            "cusum_first_detection": self.first_detection(self.cusum_detect),
            "cusign_detection_fraction": float(np.mean(self.cusign_detect[warm:])),
            "cusum_detection_fraction": float(np.mean(self.cusum_detect[warm:])),
            "bounds_plus": [self.bounds_plus.lower, self.bounds_plus.upper],
            "bounds_minus": [self.bounds_minus.lower, self.bounds_minus.upper],
            "cusum_band": list(self.cusum_band),
            "waypoints_reached": int(np.count_nonzero(np.diff(self.goal_index))),
        }
        if onset is not None:
            out["cusign_first_detection_after_onset"] = self.first_detection(self.cusign_detect, max(onset, warm))
            out["cusum_first_detection_after_onset"] = self.first_detection(self.cusum_detect, max(onset, warm))
            pre = slice(warm, max(onset, warm))
            out["cusign_detection_fraction_pre_onset"] = (
                float(np.mean(self.cusign_detect[pre])) if onset > warm else None
            )
        return out

    def rows(self):
        for i in range(len(self)):
            row = [int(self.k[i]), float(self.t[i])]
            for name in TRACE_VECTORS:
                row += [float(v) for v in getattr(self, name)[i]]
            for name in TRACE_SCALARS:
                v = getattr(self, name)[i]
                row.append(int(v) if name.startswith(("S_", "zeta", "cusign_", "cusum_")) else float(v))
            yield row

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(csv_columns(self.x.shape[1]))
            for row in self.rows():
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def run_scenario(cfg):
    """Closed loop: measure, inject attack, filter, test measure, detectors, control, plant."""
    params = cfg.params
    model = build_ugv_model(params, cfg.Q, cfg.R)
    cfg.attack.check_dimension(model.s)
    est = solve_steady_state(model)
    rng = make_rng(cfg.seed)

    cusign_cfg = CusignConfig.for_sensors(model.s, cfg.tau, cfg.ell, cfg.Z, cfg.z_ref)
    bounds_plus = detection_bounds(
        expected_alarm_rate(cusign_cfg.tau, cusign_cfg.p_plus, cusign_cfg.p_minus, "+"),
        cusign_cfg.tau,
        cusign_cfg.ell,
        cusign_cfg.Z,
        p_plus=cusign_cfg.p_plus,
    )
    bounds_minus = detection_bounds(
        expected_alarm_rate(cusign_cfg.tau, cusign_cfg.p_plus, cusign_cfg.p_minus, "-"),
        cusign_cfg.tau,
        cusign_cfg.ell,
        cusign_cfg.Z,
        p_plus=cusign_cfg.p_plus,
    )
    cusum_cfg = CusumConfig(cfg.cusum_bias, cfg.cusum_threshold, cfg.cusum_target_rate, cfg.cusum_window)
    band = rate_band(cfg.cusum_target_rate, cfg.cusum_window, cfg.cusum_Z)

    n, s = cfg.n_steps, model.s
    corners = square_corners(cfg.side_length)
    rec = {name: np.zeros((n, s)) for name in TRACE_VECTORS}
    z_arr = np.zeros(n)
    ints = {name: np.zeros(n, dtype=np.int64) for name in ("S_plus", "S_minus", "zeta_plus", "zeta_minus", "zeta_C")}
    floats = {name: np.zeros(n) for name in ("alpha_plus", "alpha_minus", "C", "alpha_C")}
    det_cusign = np.zeros(n, dtype=bool)
    det_cusum = np.zeros(n, dtype=bool)
    position = np.zeros((n, 2))
    position_hat = np.zeros((n, 2))
    goal_index = np.zeros(n, dtype=np.int64)

    x = np.zeros(model.n)
    p_true = np.zeros(2)
    p_hat = np.zeros(2)
    goal = 0
    cusign_state = CusignState()
    cusum_state = CusumState.for_config(cusum_cfg)

    for k in range(n):
        y_clean = measure(model, x, rng)
        xhat = est.xhat
        view = AttackerView(y=y_clean, y_hat=model.C @ xhat)
        xi = apply_attack(cfg.attack, view, est, k)
        y = y_clean + xi

        if np.hypot(*(corners[goal] - p_hat)) < cfg.gains.switch_radius:
            goal = (goal + 1) % len(corners)
        u = waypoint_controller(xhat, p_hat, corners[goal], params, cfg.speed, cfg.gains)

        est, r = kf_step(est, model, u, y)
        z = test_measure(r, est.SigmaInv)
        cusign_state, _, _ = cusign_step(cusign_state, cusign_cfg, z)
        cusum_step(cusum_state, cusum_cfg, z)
        alpha_c = windowed_alarm_rate(cusum_state)

        rec["x"][k] = x
        rec["xhat"][k] = xhat
        rec["y"][k] = y
        rec["xi"][k] = xi
        rec["r"][k] = r
        z_arr[k] = z
        ints["S_plus"][k] = cusign_state.s_plus
        ints["S_minus"][k] = cusign_state.s_minus
        ints["zeta_plus"][k] = cusign_state.zeta_plus
        ints["zeta_minus"][k] = cusign_state.zeta_minus
        ints["zeta_C"][k] = cusum_state.zeta
        floats["alpha_plus"][k] = cusign_state.alpha_hat_plus
        floats["alpha_minus"][k] = cusign_state.alpha_hat_minus
        floats["C"][k] = cusum_state.c
        floats["alpha_C"][k] = alpha_c
        det_cusign[k] = monitor(cusign_state.alpha_hat_plus, bounds_plus) or monitor(
            cusign_state.alpha_hat_minus, bounds_minus
        )
        det_cusum[k] = alpha_c > band[1]
        position[k] = p_true
        position_hat[k] = p_hat
        goal_index[k] = goal

        dt = params.t_s
        p_true = p_true + dt * x[0] * np.array([math.cos(x[1]), math.sin(x[1])])
        p_hat = p_hat + dt * xhat[0] * np.array([math.cos(xhat[1]), math.sin(xhat[1])])
        x = propagate(model, x, u, rng)

    k_arr = np.arange(n)
    return ScenarioTrace(
        config=cfg,
        k=k_arr,
        t=k_arr * params.t_s,
        z=z_arr,
        cusign_detect=det_cusign,
        cusum_detect=det_cusum,
        position=position,
        position_hat=position_hat,
        goal_index=goal_index,
        bounds_plus=bounds_plus,
        bounds_minus=bounds_minus,
        cusum_band=band,
        **rec,
        **ints,
        **floats,
    )
