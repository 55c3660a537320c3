"""CUSIGN: cumulative sign detector with a memoryless alarm-rate estimate.

Two integer counters accumulate ``sgn(z - z_ref)``: ``S+`` floored at zero
and ``S-`` capped at zero. A counter that reaches ``+tau`` (resp. ``-tau``)
raises an alarm and is reset to zero on the same step. Alarm rates are
tracked with a fixed-divisor running mean (pseudo-window ``ell``) and compared
against a Normal band around the analytic alarm rate of the counter's
absorbing Markov chain.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import as_measure_stream, check_probability_pair
from .chi2 import ChiSquareContext, median_reference
from .exceptions import DegenerateProbabilityError, UnsupportedThresholdError

# scaling value theta = coefficient * ell / (2 ell - 1), valid for ell >= 10
THETA_COEFFICIENTS = {1: 1.0, 2: 0.74, 3: 0.7, 4: 0.69}

# |p_plus - 0.5| beyond which the Normal model for the estimate is only approximate
NORMAL_MODEL_TOLERANCE = 0.05


def sign_of(z, z_ref):
    if z > z_ref:
        return 1
    if z < z_ref:
        return -1
    return 0


@dataclass(frozen=True)
class CusignConfig:
    """Threshold, reference point, sign probabilities, and monitor settings."""

    tau: int
    z_ref: float
    p_plus: float
    p_minus: float
    ell: int = 100
    Z: float = 3.0

    def __post_init__(self):
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be a positive integer, got {self.tau}")
        if int(self.ell) != self.ell or self.ell < 10:
            raise ValueError(f"ell must be an integer >= 10, got {self.ell}")
        if not self.Z > 0:
            raise ValueError(f"Z must be positive, got {self.Z}")
        if not self.z_ref > 0:
            raise ValueError(f"z_ref must be positive, got {self.z_ref}")
        check_probability_pair(self.p_plus, self.p_minus)

    @classmethod
    def for_sensors(cls, s, tau, ell=100, Z=3.0, z_ref=None):
        """Config for a chi2_s test measure; ``z_ref`` defaults to the median approximation."""
        ctx = ChiSquareContext(s=s, z_ref=median_reference(s) if z_ref is None else z_ref)
        return cls(tau=tau, z_ref=ctx.z_ref, p_plus=ctx.p_plus, p_minus=ctx.p_minus, ell=ell, Z=Z)


@dataclass(frozen=True)
class CusignState:
    s_plus: int = 0
    s_minus: int = 0
    alpha_hat_plus: float = 0.0
    alpha_hat_minus: float = 0.0
    zeta_plus: int = 0
    zeta_minus: int = 0


@dataclass(frozen=True)
class AlarmRateBounds:
    expected: float
    lower: float
    upper: float
    theta: float
    approximate: bool = False


def cusign_step(state, cfg, z):
    """One CUSIGN update; returns ``(new_state, zeta_plus, zeta_minus)``.

    The running alarm-rate estimates in the state are advanced too.
    """
    sgn = sign_of(z, cfg.z_ref)
    s_plus = max(0, state.s_plus + sgn)
    zeta_plus = 0
    if s_plus >= cfg.tau:
        s_plus, zeta_plus = 0, 1
    s_minus = min(0, state.s_minus + sgn)
    zeta_minus = 0
    if s_minus <= -cfg.tau:
        s_minus, zeta_minus = 0, 1
    new = CusignState(
        s_plus=s_plus,
        s_minus=s_minus,
        alpha_hat_plus=mre_update(state.alpha_hat_plus, zeta_plus, cfg.ell),
        alpha_hat_minus=mre_update(state.alpha_hat_minus, zeta_minus, cfg.ell),
        zeta_plus=zeta_plus,
        zeta_minus=zeta_minus,
    )
    return new, zeta_plus, zeta_minus


def _case_probabilities(p_plus, p_minus, case):
    if case in ("+", "plus", 1):
        return p_plus, p_minus
    if case in ("-", "minus", -1):
        return p_minus, p_plus
    raise ValueError(f"case must be '+' or '-', got {case!r}")


def transition_matrix(tau, p_plus, p_minus, case="+"):
    """(tau+1) x (tau+1) transition matrix of the counter chain.

    State j is ``|S| = j``; state ``tau`` is absorbing. For the positive case
    the counter advances with ``p_plus`` and retreats (or stays at 0) with
    ``p_minus``; the negative case swaps the two.
    """
    if int(tau) != tau or tau < 1:
        raise ValueError(f"tau must be a positive integer, got {tau}")
    check_probability_pair(p_plus, p_minus)
    advance, retreat = _case_probabilities(p_plus, p_minus, case)
    T = np.zeros((tau + 1, tau + 1))
    T[0, 0] = retreat
    for j in range(tau):
        T[j, j + 1] = advance
        if j > 0:
            T[j, j - 1] = retreat
    T[tau, tau] = 1.0
    return T


def mean_absorption_times(tau, p_plus, p_minus, case="+"):
    """Expected steps to absorption from each transient state, ``(I - R)^-1 1``."""
    advance, _ = _case_probabilities(p_plus, p_minus, case)
    if advance <= 0.0:
        raise DegenerateProbabilityError(f"advance probability {advance} never reaches the threshold")
    R = transition_matrix(tau, p_plus, p_minus, case)[:-1, :-1]
    try:
        return np.linalg.solve(np.eye(tau) - R, np.ones(tau))
    except np.linalg.LinAlgError as exc:
        raise DegenerateProbabilityError("I - R is singular") from exc


def expected_alarm_rate(tau, p_plus, p_minus, case="+"):
    """Inverse mean run length from the reset state."""
    mu = mean_absorption_times(tau, p_plus, p_minus, case)
    return 1.0 / mu[0]


def mre_update(alpha_hat, zeta, ell):
    """Running mean with divisor fixed at ``ell``."""
    return alpha_hat + (zeta - alpha_hat) / ell


def theta_scale(tau, ell, table=None):
    table = THETA_COEFFICIENTS if table is None else table
    if tau not in table:
        raise UnsupportedThresholdError(
            f"no tabulated scaling value for tau={tau}; calibrate one and pass theta explicitly"
        )
    if ell < 1:
        raise ValueError(f"ell must be positive, got {ell}")
    return table[tau] * ell / (2 * ell - 1)


def detection_bounds(expected_rate, tau, ell, Z, theta=None, p_plus=None, table=None):
    """Band ``E[a] +/- Z sqrt(theta E[a](1 - E[a]) / ell)``, lower edge clamped at 0.

    Pass ``p_plus`` to flag bounds computed away from ``p = 0.5``, where the
    Normal model for the estimate is only approximate.
    """
    if not 0.0 < expected_rate < 1.0:
        raise ValueError(f"expected_rate must lie in (0, 1), got {expected_rate}")
    if theta is None:
        theta = theta_scale(tau, ell, table)
    half = Z * np.sqrt(theta * expected_rate * (1.0 - expected_rate) / ell)
    approximate = p_plus is not None and abs(p_plus - 0.5) > NORMAL_MODEL_TOLERANCE
    return AlarmRateBounds(
        expected=expected_rate,
        lower=max(0.0, expected_rate - half),
        upper=expected_rate + half,
        theta=theta,
        approximate=approximate,
    )


def monitor(alpha_hat, bounds):
    """True when the estimate lies strictly outside the band."""
    return bool(alpha_hat < bounds.lower or alpha_hat > bounds.upper)


@dataclass(frozen=True)
class CusignRun:
    """Per-step arrays from a batch CUSIGN pass."""

    s_plus: np.ndarray
    s_minus: np.ndarray
    zeta_plus: np.ndarray
    zeta_minus: np.ndarray
    alpha_hat_plus: np.ndarray
    alpha_hat_minus: np.ndarray


def run_cusign(z, cfg):
    """Batch CUSIGN + running alarm rates over a stream, from the zero state."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    return CusignRun(*_kernels.cusign_run(z, float(cfg.z_ref), int(cfg.tau), float(cfg.ell)))


def alarm_frequencies(z, z_ref, tau):
    """Empirical ``(alpha+, alpha-)`` over a stream."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    n_plus, n_minus = _kernels.cusign_alarm_counts(z, float(z_ref), int(tau))
    return n_plus / z.size, n_minus / z.size


class CusignDetector(BaseEstimator):
    """CUSIGN detector with estimator-style configuration.

    ``fit`` fixes the reference point and sign probabilities, computes the
    analytic alarm rates and detection bounds for both counters. ``transform``
    returns the alarm-rate estimates ``(alpha+, alpha-)`` per step, and
    ``predict`` flags steps where either estimate leaves its band. Both start
    from the zero state on every call; use :meth:`update` for online use.

    Parameters
    ----------
    tau : int
        Counter threshold.
    ell : int
        Pseudo-window of the running alarm-rate estimate.
    Z : float
        Band half-width in standard deviations.
    dof : int, optional
        Degrees of freedom of the test measure (sensor count). Inferred from the
        sample mean of the data passed to ``fit`` when omitted.
    z_ref : float, optional
        Reference point; defaults to the median approximation for ``dof``.
    theta : float, optional
        Scaling value; taken from the built-in table for ``tau <= 4``.
    """

    def __init__(self, tau=2, ell=100, Z=3.0, dof=None, z_ref=None, theta=None):
        self.tau = tau
        self.ell = ell
        self.Z = Z
        self.dof = dof
        self.z_ref = z_ref
        self.theta = theta

    def fit(self, X=None, y=None):
        if self.dof is not None:
            dof = int(self.dof)
        elif X is not None:
            dof = max(1, int(round(float(np.mean(as_measure_stream(X))))))
        else:
            raise ValueError("either set `dof` or pass nominal test measures to fit")
        self.config_ = CusignConfig.for_sensors(dof, self.tau, self.ell, self.Z, self.z_ref)
        cfg = self.config_
        self.dof_ = dof
        self.expected_rate_plus_ = expected_alarm_rate(cfg.tau, cfg.p_plus, cfg.p_minus, "+")
        self.expected_rate_minus_ = expected_alarm_rate(cfg.tau, cfg.p_plus, cfg.p_minus, "-")
        self.bounds_plus_ = detection_bounds(
            self.expected_rate_plus_, cfg.tau, cfg.ell, cfg.Z, self.theta, cfg.p_plus
        )
        self.bounds_minus_ = detection_bounds(
            self.expected_rate_minus_, cfg.tau, cfg.ell, cfg.Z, self.theta, cfg.p_plus
        )
        self.state_ = CusignState()
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        run = run_cusign(as_measure_stream(X), self.config_)
        return np.column_stack([run.alpha_hat_plus, run.alpha_hat_minus])

    def predict(self, X):
        alpha = self.transform(X)
        bp, bm = self.bounds_plus_, self.bounds_minus_
        return (
            (alpha[:, 0] < bp.lower) | (alpha[:, 0] > bp.upper) | (alpha[:, 1] < bm.lower) | (alpha[:, 1] > bm.upper)
        )

    def update(self, z):
        """Feed one test measure to the online state; returns the detection flag."""
        check_is_fitted(self, "config_")
        self.state_, _, _ = cusign_step(self.state_, self.config_, z)
        return monitor(self.state_.alpha_hat_plus, self.bounds_plus_) or monitor(
            self.state_.alpha_hat_minus, self.bounds_minus_
        )

    def reset(self):
        check_is_fitted(self, "config_")
        self.state_ = CusignState()
        return self
